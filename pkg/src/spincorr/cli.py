"""Command-line front end: JSON configuration in, CSV tables out.

Exit status: 0 success, 1 configuration error, 2 runtime error,
3 insufficient statistics.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import analytic as an
from . import config as cf
from .bell import (
    TERM_NAMES,
    SingletPredictor,
    ch_statistic,
    eberhard_scan,
    efficiency_threshold_model,
    efficiency_threshold_paper,
    optimize_angles,
    simulate_ch,
)
from .montecarlo import (
    PATTERNS,
    ConfigError,
    InsufficientStatistics,
    estimate_P,
    expected_frequencies,
    expected_gate_rate,
    frequency,
    preselection_patterns,
    run_trials,
    standard_error,
)
from .optics import OpticsError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_STATS = 0, 1, 2, 3


def _deg(value):
    return "removed" if value == "removed" else math.radians(value)


def _spec(cfg):
    return cf.central_bs(cfg)


# name -> (evaluator(params, cfg), parameter names); theta* and phi in degrees
FORMULAS = {
    "prob2": (
        lambda p, c: an.prob2(
            _deg(p["theta1_0"]), _deg(p["theta2_0"]), _deg(p["theta1"]), _deg(p["theta2"]), _spec(c), math.radians(p["phi"]), p["v"]
        ),
        ("theta1_0", "theta2_0", "theta1", "theta2", "phi", "v"),
    ),
    "prob2_coinc": (
        lambda p, c: an.prob2_coinc(*(_deg(p[k]) for k in ("theta1_0", "theta2_0", "theta1", "theta2"))),
        ("theta1_0", "theta2_0", "theta1", "theta2"),
    ),
    "prob2_opposite": (lambda p, c: an.prob2_opposite(_deg(p["theta1_0"]), _deg(p["theta2_0"])), ("theta1_0", "theta2_0")),
    "prob2_same_side": (lambda p, c: an.prob2_same_side(_deg(p["theta1_0"]), _deg(p["theta2_0"])), ("theta1_0", "theta2_0")),
    "prob2_unpolarized_out": (
        lambda p, c: an.prob2_unpolarized_out(_deg(p["theta1_0"]), _deg(p["theta2_0"]), _deg(p["theta1"])),
        ("theta1_0", "theta2_0", "theta1"),
    ),
    "prob2_unpolarized_in": (lambda p, c: an.prob2_unpolarized_in(_deg(p["theta1"]), _deg(p["theta2"])), ("theta1", "theta2")),
    "prob2_same_side_unpolarized": (
        lambda p, c: an.prob2_same_side_unpolarized(_deg(p["theta1"]), _deg(p["theta2"])),
        ("theta1", "theta2"),
    ),
    "prob4": (
        lambda p, c: an.prob4(
            _deg(p["theta1p"]), _deg(p["theta2p"]), _deg(p["theta1"]), _deg(p["theta2"]), _spec(c), math.radians(p["phi"]), p["v"]
        ),
        ("theta1p", "theta2p", "theta1", "theta2", "phi", "v"),
    ),
    "prob4_lr": (
        lambda p, c: an.prob4_lr(*(_deg(p[k]) for k in ("theta1p", "theta2p", "theta1", "theta2"))),
        ("theta1p", "theta2p", "theta1", "theta2"),
    ),
    "prob4_bell": (lambda p, c: an.prob4_bell(_deg(p["theta1p"]), _deg(p["theta2p"]), p["v"]), ("theta1p", "theta2p", "v")),
    "prob4_one_arm": (
        lambda p, c: an.prob4_one_arm(*(_deg(p[k]) for k in ("theta1p", "theta2p", "theta1", "theta2"))),
        ("theta1p", "theta2p", "theta1", "theta2"),
    ),
    "prob4_one_arm_nopol": (lambda p, c: an.prob4_one_arm_nopol(_deg(p["theta1p"]), _deg(p["theta2p"])), ("theta1p", "theta2p")),
    "prob4_triplet": (lambda p, c: an.prob4_triplet(_deg(p["theta1p"]), _deg(p["theta2p"])), ("theta1p", "theta2p")),
    "visibility": (lambda p, c: float(an.visibility_from_geometry(p["dz_over_L"], 1.0)), ("dz_over_L",)),
    "eberhard_prob": (
        lambda p, c: an.eberhard_prob(_deg(p["theta1p"]), _deg(p["theta2p"]), p["r"], p["v"]),
        ("theta1p", "theta2p", "r", "v"),
    ),
    "transmittance_x": (lambda p, c: an.transmittance_x(p["r"]), ("r",)),
}

ANALYTIC_COLUMNS = (
    "formula", "theta1_0", "theta2_0", "theta1", "theta2", "theta1p", "theta2p", "phi", "v", "r", "dz_over_L", "value",
)
SIMULATE_COLUMNS = ("kind", "preselection", "pattern", "count", "frequency", "standard_error", "estimate_P", "expected")
BELL_COLUMNS = ("method", "a", "a2", "b", "b2") + TERM_NAMES + ("S", "standard_error")
SCAN_COLUMNS = ("table", "v", "convention", "r", "T_x", "S_max", "eta_min", "eta_closed_form")


def fmt(value) -> str:
    """Locale-independent rendering; floats use the shortest exact round-trip form."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunManifest:
    config_path: str
    subcommand: str
    output_path: str
    version: str
    seed: int
    config_hash: str
    config_echo: str
    timestamp: str

    def header(self) -> list[str]:
        return [
            f"# spincorr {self.version}",
            f"# subcommand: {self.subcommand}",
            f"# config_path: {self.config_path}",
            f"# output_path: {self.output_path}",
            f"# config_sha256: {self.config_hash}",
            f"# seed: {self.seed}",
            f"# timestamp: {self.timestamp}",
            f"# config: {self.config_echo}",
        ]


def render_csv(manifest: RunManifest, columns, rows) -> str:
    buf = io.StringIO()
    for line in manifest.header():
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def data_section(text: str) -> str:
    """CSV body without the commented header."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def read_config_echo(text: str) -> dict:
    for line in text.splitlines():
        if line.startswith("# config: "):
            return cf.parse_config_text(line[len("# config: "):], "<echo>")
    raise ConfigError("no config echo in header")


# --- subcommands ------------------------------------------------------------


def cmd_analytic(cfg: dict) -> tuple[tuple[str, ...], list[dict]]:
    rows = []
    for req in cfg["angles"]["formulas"]:
        fn, params = FORMULAS[req["formula"]]
        grid = req["grid"]
        for combo in itertools.product(*(grid[p] for p in params)):
            p = dict(zip(params, combo))
            try:
                value = fn(p, cfg)
            except (ValueError, OpticsError) as exc:
                raise ConfigError(f"formula {req['formula']} at {p}: {exc}") from None
            rows.append({"formula": req["formula"], **p, "value": float(value)})
    return ANALYTIC_COLUMNS, rows


def cmd_simulate(cfg: dict, threads: int = 1):
    config = cf.experiment_config(cfg)
    tally = run_trials(config, threads=threads)
    if tally.n_accepted == 0:
        raise InsufficientStatistics(f"no accepted events in {tally.n_trials} trials")
    rows = []
    no_dark = all(config.detector(l).dark_count_prob == 0 for l in config.labels)
    pres = [None] + (list(preselection_patterns(config)) if config.preselection_analyzers is not None else [])
    for pre in pres:
        if tally.accepted(pre) == 0:
            continue
        expected = expected_frequencies(config, pre) if no_dark else {}
        for pat in PATTERNS:
            f = frequency(tally, pat, pre)
            rows.append(
                {
                    "kind": "pattern",
                    "preselection": pre or "all",
                    "pattern": pat,
                    "count": tally.count(pat, pre),
                    "frequency": f,
                    "standard_error": standard_error(tally, pat, pre),
                    "estimate_P": f / 4 if pre else estimate_P(tally, pat),
                    "expected": expected.get(pat),
                }
            )
    n = tally.n_trials
    try:
        gate_expected = expected_gate_rate(config) if no_dark else None
    except ConfigError:
        gate_expected = None
    for name, count, exp in (
        ("trials", n, None),
        ("gate_opened", tally.n_gate_opened, gate_expected),
        ("discarded", tally.n_discarded, None),
        ("accepted", tally.n_accepted, None),
    ):
        rate = count / n
        rows.append(
            {
                "kind": "summary",
                "preselection": "all",
                "pattern": name,
                "count": count,
                "frequency": rate,
                "standard_error": math.sqrt(rate * (1 - rate) / n),
                "expected": exp,
            }
        )
    return SIMULATE_COLUMNS, rows


def _bell_row(method, result, se=None):
    row = {"method": method, "S": result.S, "standard_error": se}
    row.update(zip(("a", "a2", "b", "b2"), result.quadruple.as_degrees()))
    row.update(result.terms)
    return row


def cmd_bell(cfg: dict, threads: int = 1):
    pred = cf.predictor(cfg)
    q = cf.quadruple(cfg)
    rows = [_bell_row("analytic", ch_statistic(pred, q))]
    if cfg["angles"]["optimize"]:
        rows.append(_bell_row("optimized", optimize_angles(pred, math.radians(cfg["angles"]["grid_step"]))))
    if cfg["run"]["monte_carlo"]:
        result, se = simulate_ch(cf.experiment_config(cfg), q, cfg["run"]["trials"], threads)
        rows.append(_bell_row("monte_carlo", result, se))
    return BELL_COLUMNS, rows


def _none(value):
    return "none" if value is None else value


def cmd_scan(cfg: dict):
    # threshold grids are the library defaults; angles.grid_step only drives bell --optimize
    scan = cfg["experiment"]["scan"]
    rows = []
    for v in scan["visibilities"]:
        for conv in scan["conventions"]:
            eta = efficiency_threshold_model(SingletPredictor(v, conv))
            closed = efficiency_threshold_paper(v) if conv == "fringe" and v > 0 else None
            rows.append({"table": "threshold", "v": v, "convention": conv, "eta_min": _none(eta), "eta_closed_form": closed})
    v = cf.visibility(cfg)
    for row in eberhard_scan(scan["r_values"], v):
        rows.append(
            {"table": "eberhard", "v": v, "r": row.r, "T_x": row.T_x, "S_max": row.S_max, "eta_min": _none(row.eta_min)}
        )
    return SCAN_COLUMNS, rows


def cmd_selftest(out=None) -> int:
    from .oracles import TOL, run_oracles

    out = out or sys.stdout

    results = run_oracles()
    ok = True
    for r in results:
        ok &= r.passed
        print(f"{'PASS' if r.passed else 'FAIL'} {r.family}: n={r.n} max_error={r.max_error:.3e} (tol {TOL:g})", file=out)
    total = sum(r.n for r in results)
    print(f"{'PASS' if ok else 'FAIL'} oracle equivalence over {total} tuples", file=out)
    return EXIT_OK if ok else EXIT_RUNTIME


# --- entry point ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spincorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spincorr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "analytic": "evaluate closed-form probabilities over angle grids",
        "simulate": "run the event-level Monte Carlo and tabulate counts",
        "bell": "evaluate the CH statistic (analytic, optimized, simulated)",
        "scan": "efficiency thresholds versus visibility and unequal-superposition ratio",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="JSON configuration (defaults apply to missing keys)")
        p.add_argument("--out", type=Path, required=True, help="CSV output path")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--trials", type=int, help="override run.trials")
        p.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    sub.add_parser("selftest", help="check closed forms against the exact Fock engine")
    return parser


def _prepare(args) -> dict:
    cfg = json.loads(cf.canonical_json(cf.load_config(args.config)))
    for key in ("seed", "trials", "threads"):
        value = getattr(args, key)
        if value is not None:
            cfg["run"][key] = value
    return cf.normalize(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        try:
            return cmd_selftest()
        except Exception as exc:  # noqa: BLE001
            print(f"spincorr: error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    try:
        cfg = _prepare(args)
    except (ConfigError, OpticsError) as exc:
        print(f"spincorr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = cfg["run"]["threads"]
    try:
        if args.command == "analytic":
            columns, rows = cmd_analytic(cfg)
        elif args.command == "simulate":
            columns, rows = cmd_simulate(cfg, threads)
        elif args.command == "bell":
            columns, rows = cmd_bell(cfg, threads)
        else:
            columns, rows = cmd_scan(cfg)
    except InsufficientStatistics as exc:
        print(f"spincorr: insufficient statistics: {exc}", file=sys.stderr)
        return EXIT_STATS
    except (ConfigError, OpticsError) as exc:
        print(f"spincorr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"spincorr: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = RunManifest(
        config_path=str(args.config) if args.config else "",
        subcommand=args.command,
        output_path=str(args.out),
        version=__version__,
        seed=cfg["run"]["seed"],
        config_hash=cf.config_hash(cfg),
        config_echo=cf.canonical_json(cfg),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    try:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(render_csv(manifest, columns, rows), encoding="utf-8")
    except OSError as exc:
        print(f"spincorr: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
