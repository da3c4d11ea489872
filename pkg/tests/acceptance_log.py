"""Shared store for the one-line-per-criterion acceptance report."""

LINES: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    LINES[n] = line
    print(line)
    return ok
