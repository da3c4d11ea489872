"""JSON experiment configuration: validation, normalization and hashing.

Top-level sections are ``experiment``, ``phase``, ``detectors``, ``angles``
and ``run``; every key is optional and unknown keys are rejected. Angles
are in degrees. :func:`normalize` fills defaults so that two documents
describing the same run normalize to equal dictionaries and hash alike.
The hash ignores ``run.threads``, which never changes results.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

from .analytic import visibility_from_geometry
from .bell import CONVENTIONS, FRINGE, AngleQuadruple, EberhardPredictor, SingletPredictor
from .montecarlo import SOURCE_MODELS, ConfigError, DetectorSpec, ExperimentConfig
from .optics import (
    REMOVED,
    SQRT_HALF,
    Angle,
    Beat,
    BeamSplitterSpec,
    Fixed,
    OpticsError,
    TransverseFringe,
    phase_of,
)

SECTIONS = ("experiment", "phase", "detectors", "angles", "run")
DETECTOR_LABELS = ("D1", "D1_perp", "D2", "D2_perp", "D1'", "D1'_perp", "D2'", "D2'_perp")

DEFAULTS = {
    "experiment": {
        "source_model": "ideal_singlets",
        "central_bs": {"ratio": 1.0},
        "preselection_analyzers": None,
        "visibility": None,
        "convention": FRINGE,
        "pulse_period": 50e-9,
        "window": 10e-9,
        "scan": {"visibilities": [1.0, 0.87, 0.8], "conventions": [FRINGE], "r_values": []},
    },
    "phase": {"model": "fixed", "phi": 0.0},
    "detectors": {"efficiency": 1.0, "dark_count_prob": 0.0, "per_label": {}},
    "angles": {
        "prime": [0.0, 90.0],
        "quadruple": [0.0, 135.0, 67.5, 22.5],
        "optimize": False,
        "grid_step": 0.5,
        "formulas": [],
    },
    "run": {"trials": 100000, "seed": 0, "threads": 1, "monte_carlo": False},
}

PHASE_KEYS = {
    "fixed": {"phi": 0.0},
    "transverse_fringe": {"z1": 0.0, "z2": 0.0, "L": 1.0, "dz": 0.0},
    "beat": {"d_omega": 0.0, "delta": 0.0, "c": 299_792_458.0},
}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(path, f"unknown key {extra[0]!r}; allowed: {sorted(allowed)}")


def _num(value, path, lo=-math.inf, hi=math.inf, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if integer:
        if not float(value).is_integer():
            _fail(path, f"expected an integer, got {value!r}")
        value = int(value)
    elif not math.isfinite(value):
        _fail(path, f"expected a finite number, got {value!r}")
    if not lo <= value <= hi:
        _fail(path, f"{value!r} outside [{lo}, {hi}]")
    return value if integer else float(value)


def _setting(value, path, allow_removed=True):
    if isinstance(value, str) and value.lower() in {"removed", "inf"}:
        if not allow_removed:
            _fail(path, "an angle is required here")
        return "removed"
    return _num(value, path)


def _list(value, path, n=None):
    if not isinstance(value, list):
        _fail(path, f"expected a list, got {value!r}")
    if n is not None and len(value) != n:
        _fail(path, f"expected {n} entries, got {len(value)}")
    return value


def _bool(value, path):
    if not isinstance(value, bool):
        _fail(path, f"expected true or false, got {value!r}")
    return value


def _experiment(raw):
    d = DEFAULTS["experiment"]
    _check_keys(raw, d, "experiment")
    out = {}
    sm = raw.get("source_model", d["source_model"])
    if sm not in SOURCE_MODELS:
        _fail("experiment.source_model", f"must be one of {list(SOURCE_MODELS)}, got {sm!r}")
    out["source_model"] = sm
    bs = raw.get("central_bs", d["central_bs"])
    if isinstance(bs, dict) and "ratio" in bs:
        _check_keys(bs, {"ratio"}, "experiment.central_bs")
        out["central_bs"] = {"ratio": _num(bs["ratio"], "experiment.central_bs.ratio", 0.0)}
    else:
        _check_keys(bs, {"t_x", "t_y", "r_x", "r_y"}, "experiment.central_bs")
        out["central_bs"] = {
            k: _num(bs.get(k, SQRT_HALF), f"experiment.central_bs.{k}", 0.0, 1.0) for k in ("t_x", "t_y", "r_x", "r_y")
        }
    pre = raw.get("preselection_analyzers", d["preselection_analyzers"])
    if pre is not None:
        pre = [_setting(v, f"experiment.preselection_analyzers[{i}]", False) for i, v in enumerate(_list(pre, "experiment.preselection_analyzers", 2))]
    out["preselection_analyzers"] = pre
    vis = raw.get("visibility", d["visibility"])
    out["visibility"] = None if vis is None else _num(vis, "experiment.visibility", 0.0, 1.0)
    conv = raw.get("convention", d["convention"])
    if conv not in CONVENTIONS:
        _fail("experiment.convention", f"must be one of {list(CONVENTIONS)}, got {conv!r}")
    out["convention"] = conv
    out["pulse_period"] = _num(raw.get("pulse_period", d["pulse_period"]), "experiment.pulse_period", 0.0)
    out["window"] = _num(raw.get("window", d["window"]), "experiment.window", 0.0)
    scan = raw.get("scan", {})
    _check_keys(scan, d["scan"], "experiment.scan")
    vs = _list(scan.get("visibilities", d["scan"]["visibilities"]), "experiment.scan.visibilities")
    cs = _list(scan.get("conventions", d["scan"]["conventions"]), "experiment.scan.conventions")
    rs = _list(scan.get("r_values", d["scan"]["r_values"]), "experiment.scan.r_values")
    for i, c in enumerate(cs):
        if c not in CONVENTIONS:
            _fail(f"experiment.scan.conventions[{i}]", f"must be one of {list(CONVENTIONS)}")
    out["scan"] = {
        "visibilities": [_num(v, f"experiment.scan.visibilities[{i}]", 0.0, 1.0) for i, v in enumerate(vs)],
        "conventions": list(cs),
        "r_values": [_num(v, f"experiment.scan.r_values[{i}]", 0.0) for i, v in enumerate(rs)],
    }
    return out


def _phase(raw):
    model = raw.get("model", "fixed") if isinstance(raw, dict) else None
    if model not in PHASE_KEYS:
        _fail("phase.model", f"must be one of {sorted(PHASE_KEYS)}, got {model!r}")
    keys = PHASE_KEYS[model]
    _check_keys(raw, set(keys) | {"model"}, "phase")
    out = {"model": model}
    for k, default in keys.items():
        out[k] = _num(raw.get(k, default), f"phase.{k}")
    return out


def _detector(raw, path):
    _check_keys(raw, {"efficiency", "dark_count_prob"}, path)
    return {
        "efficiency": _num(raw.get("efficiency", 1.0), f"{path}.efficiency", 0.0, 1.0),
        "dark_count_prob": _num(raw.get("dark_count_prob", 0.0), f"{path}.dark_count_prob", 0.0, 1.0),
    }


def _detectors(raw):
    _check_keys(raw, DEFAULTS["detectors"], "detectors")
    out = _detector({k: v for k, v in raw.items() if k != "per_label"}, "detectors")
    per = raw.get("per_label", {})
    _check_keys(per, DETECTOR_LABELS, "detectors.per_label")
    out["per_label"] = {k: _detector(per[k], f"detectors.per_label.{k}") for k in sorted(per)}
    return out


def _angles(raw):
    from .cli import FORMULAS

    d = DEFAULTS["angles"]
    _check_keys(raw, d, "angles")
    out = {}
    out["prime"] = [_setting(v, f"angles.prime[{i}]") for i, v in enumerate(_list(raw.get("prime", d["prime"]), "angles.prime", 2))]
    out["quadruple"] = [
        _num(v, f"angles.quadruple[{i}]") for i, v in enumerate(_list(raw.get("quadruple", d["quadruple"]), "angles.quadruple", 4))
    ]
    out["optimize"] = _bool(raw.get("optimize", d["optimize"]), "angles.optimize")
    out["grid_step"] = _num(raw.get("grid_step", d["grid_step"]), "angles.grid_step", 1e-3, 90.0)
    formulas = []
    for i, req in enumerate(_list(raw.get("formulas", d["formulas"]), "angles.formulas")):
        path = f"angles.formulas[{i}]"
        _check_keys(req, {"formula", "grid"}, path)
        name = req.get("formula")
        if name not in FORMULAS:
            _fail(f"{path}.formula", f"unknown formula {name!r}; known: {sorted(FORMULAS)}")
        params = FORMULAS[name][1]
        grid = req.get("grid", {})
        _check_keys(grid, params, f"{path}.grid")
        norm = {}
        for p in params:
            if p in grid:
                values = _list(grid[p], f"{path}.grid.{p}")
                norm[p] = [
                    _setting(v, f"{path}.grid.{p}[{j}]", p.startswith("theta")) for j, v in enumerate(values)
                ]
            elif p in OPTIONAL_PARAMS:
                norm[p] = [OPTIONAL_PARAMS[p]]
            else:
                _fail(f"{path}.grid", f"missing parameter {p!r}")
        formulas.append({"formula": name, "grid": norm})
    out["formulas"] = formulas
    return out


OPTIONAL_PARAMS = {"phi": 0.0, "v": 1.0}


def _run(raw):
    d = DEFAULTS["run"]
    _check_keys(raw, d, "run")
    return {
        "trials": _num(raw.get("trials", d["trials"]), "run.trials", 1, 2 ** 62, integer=True),
        "seed": _num(raw.get("seed", d["seed"]), "run.seed", 0, 2 ** 64 - 1, integer=True),
        "threads": _num(raw.get("threads", d["threads"]), "run.threads", 1, 1024, integer=True),
        "monte_carlo": _bool(raw.get("monte_carlo", d["monte_carlo"]), "run.monte_carlo"),
    }


def normalize(raw: dict) -> dict:
    _check_keys(raw, SECTIONS, "config")
    return {
        "experiment": _experiment(raw.get("experiment", {})),
        "phase": _phase(raw.get("phase", {})),
        "detectors": _detectors(raw.get("detectors", {})),
        "angles": _angles(raw.get("angles", {})),
        "run": _run(raw.get("run", {})),
    }


def parse_config_text(text: str, source: str = "<config>") -> dict:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return normalize(raw)


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return normalize({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    hashed = json.loads(canonical_json(cfg))
    hashed["run"].pop("threads", None)
    return hashlib.sha256(canonical_json(hashed).encode()).hexdigest()


# --- conversion to model objects --------------------------------------------


def _as_setting(value):
    return REMOVED if value == "removed" else Angle.degrees(value)


def central_bs(cfg: dict) -> BeamSplitterSpec:
    bs = cfg["experiment"]["central_bs"]
    try:
        if "ratio" in bs:
            return BeamSplitterSpec.from_ratio(bs["ratio"])
        return BeamSplitterSpec(**bs)
    except OpticsError as exc:
        raise ConfigError(f"experiment.central_bs: {exc}") from None


def phase_model(cfg: dict):
    p = dict(cfg["phase"])
    model = p.pop("model")
    try:
        if model == "fixed":
            return Fixed(math.radians(p["phi"]))
        if model == "transverse_fringe":
            return TransverseFringe(**p)
        return Beat(**p)
    except OpticsError as exc:
        raise ConfigError(f"phase: {exc}") from None


def detectors(cfg: dict):
    d = cfg["detectors"]
    base = DetectorSpec(d["efficiency"], d["dark_count_prob"])
    if not d["per_label"]:
        return base
    specs = {lab: base for lab in DETECTOR_LABELS}
    specs.update({lab: DetectorSpec(**spec) for lab, spec in d["per_label"].items()})
    return specs


def experiment_config(cfg: dict) -> ExperimentConfig:
    e, run = cfg["experiment"], cfg["run"]
    pre = e["preselection_analyzers"]
    return ExperimentConfig(
        source_model=e["source_model"],
        central_bs=central_bs(cfg),
        phase=phase_model(cfg),
        preselection_analyzers=None if pre is None else tuple(_as_setting(v) for v in pre),
        prime_analyzers=tuple(_as_setting(v) for v in cfg["angles"]["prime"]),
        detectors=detectors(cfg),
        trials=run["trials"],
        seed=run["seed"],
        pulse_period=e["pulse_period"],
        window=e["window"],
    )


def quadruple(cfg: dict) -> AngleQuadruple:
    return AngleQuadruple.degrees(*cfg["angles"]["quadruple"])


def visibility(cfg: dict) -> float:
    """Explicit visibility, else the one implied by the phase model."""
    if cfg["experiment"]["visibility"] is not None:
        return cfg["experiment"]["visibility"]
    model = phase_model(cfg)
    if isinstance(model, TransverseFringe):
        return float(visibility_from_geometry(model.dz, model.L))
    return 1.0


def predictor(cfg: dict):
    """Bell predictor for the configured splitter: singlet form at 50:50, unequal superposition otherwise."""
    spec = central_bs(cfg)
    if cfg["detectors"]["per_label"]:
        raise ConfigError("detectors.per_label: Bell predictors take one common efficiency")
    if abs(math.cos(phase_of(phase_model(cfg))) - 1.0) > 1e-12:
        raise ConfigError("phase: Bell predictors assume a zero mean phase")
    eta = cfg["detectors"]["efficiency"]
    v = visibility(cfg)
    if spec.is_fifty_fifty:
        return SingletPredictor(v, cfg["experiment"]["convention"], eta)
    if abs(spec.t_y - SQRT_HALF) > 1e-12:
        raise ConfigError("experiment.central_bs: Bell predictors need a 50:50 y axis")
    return EberhardPredictor(spec.ratio, v, eta)
