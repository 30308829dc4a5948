"""Curve files, run configs, JSON reports and the ``pointimpact`` command.

Curve bundles are CSV files whose header holds the grid times, optionally
followed by a column named ``y`` with the responses.  Empty cells and ``NA``
mark missing values.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

import jsonschema
import numpy as np
import yaml

from .detection import DetectionConfig, default_delta, detect, statistic_profile
from .errors import DataError, DataFormatError, InvalidSpecError, NumericalError, PointImpactError
from .evaluation import PipelineConfig, StudyConfig, fit_pipeline, loocv_mspe, run_simulation_study
from .fpca import center
from .gp_sim import FunctionalDataset, Grid, ProcessSpec, simulate
from .model_sim import DESIGN_SLOPE, ImpactModelSpec, QuadratureRule, SlopeFunction, generate_response

MISSING = ("", "NA")
DEFAULT_MAX_MISSING = 10


# ------------------------------------------------------------------ curve files


def _parse_cell(text: str, row: int, col: int) -> float:
    text = text.strip()
    if text in MISSING:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric cell {text!r} at row {row}, column {col}") from None


def repair_row(values: np.ndarray) -> np.ndarray:
    """Fill missing values in one curve.

    Interior gaps take the mean of the closest observed predecessor and
    successor; leading and trailing gaps copy the nearest observed value.
    """
    out = values.copy()
    obs = np.flatnonzero(~np.isnan(values))
    if obs.size == 0:
        raise DataFormatError("curve has no observed values")
    for j in np.flatnonzero(np.isnan(values)):
        pos = np.searchsorted(obs, j)
        if pos == 0:
            out[j] = values[obs[0]]
        elif pos == obs.size:
            out[j] = values[obs[-1]]
        else:
            out[j] = 0.5 * (values[obs[pos - 1]] + values[obs[pos]])
    return out


def load_curves(path, max_missing: int = DEFAULT_MAX_MISSING) -> FunctionalDataset:
    """Read a curve bundle, repairing or dropping cases with missing values.

    Cases with more than ``max_missing`` missing curve values, or a missing
    response, are dropped.  ``meta["repairs"]`` maps kept row numbers (1-based,
    data rows only) to the number of imputed values and ``meta["dropped"]``
    lists dropped row numbers.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    has_y = header[-1].lower() == "y"
    times_txt = header[:-1] if has_y else header
    try:
        times = np.array([float(c) for c in times_txt])
    except ValueError:
        raise DataFormatError(f"{path}: header must hold numeric grid times") from None
    try:
        grid = Grid.from_points(times)
    except (InvalidSpecError, DataError) as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    p = grid.p
    curves, ys, repairs, dropped = [], [], {}, []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        vals = np.array([_parse_cell(c, r, j + 1) for j, c in enumerate(row)])
        x = vals[:p]
        miss = int(np.isnan(x).sum())
        if miss > max_missing or (has_y and math.isnan(vals[-1])):
            dropped.append(r)
            continue
        if miss:
            x = repair_row(x)
            repairs[r] = miss
        curves.append(x)
        if has_y:
            ys.append(vals[-1])
    if not curves:
        raise DataFormatError(f"{path}: no usable cases")
    meta = {"source": str(path), "repairs": repairs, "dropped": dropped}
    return FunctionalDataset(grid, np.array(curves), np.array(ys) if has_y else None, meta=meta)


def write_curves(path, data: FunctionalDataset) -> None:
    """Write a curve bundle with shortest round-trip decimals."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = [repr(float(t)) for t in data.grid.points]
        if data.responses is not None:
            head.append("y")
        w.writerow(head)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.curves[i]]
            if data.responses is not None:
                row.append(repr(float(data.responses[i])))
            w.writerow(row)


# ------------------------------------------------------------ schemas and JSON


def load_schema(name: str) -> dict:
    return json.loads(resources.files("pointimpact").joinpath("schemas").joinpath(f"{name}.schema.json").read_text())


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_report(path, payload: dict, schema: str) -> dict:
    """Validate ``payload`` against a published schema and write it as JSON."""
    doc = _clean(payload)
    jsonschema.validate(doc, load_schema(schema))
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


# --------------------------------------------------------------------- configs


def load_config(path) -> dict:
    """Read a YAML (or JSON) run config and validate it."""
    try:
        cfg = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    try:
        jsonschema.validate(cfg, load_schema("config"))
    except jsonschema.ValidationError as exc:
        raise DataFormatError(f"{path}: invalid config: {exc.message}") from None
    return cfg


def process_from_dict(d: dict) -> ProcessSpec:
    kind = d.get("kind", "ou")
    if kind == "ou":
        return ProcessSpec.ou(d.get("theta", 5.0), d.get("sigma_u", 3.5))
    if kind == "fbm":
        return ProcessSpec.fbm(d["hurst"])
    return ProcessSpec.brownian()


def slope_from_value(v) -> SlopeFunction:
    """``"zero"``, ``"design"`` or polynomial coefficients (increasing powers)."""
    if v is None or v == "zero":
        return SlopeFunction.zero()
    if v == "design":
        return DESIGN_SLOPE
    if isinstance(v, dict):
        if v.get("kind") == "polynomial":
            return SlopeFunction.polynomial(v["coefficients"])
        if v.get("kind") == "sampled":
            return SlopeFunction.sampled(v["values"])
        return SlopeFunction.zero()
    if isinstance(v, str):
        v = _floats(v)
    return SlopeFunction.polynomial(v)


def model_from_dict(d: dict) -> ImpactModelSpec:
    return ImpactModelSpec(
        tuple(d.get("taus", ())), tuple(d.get("betas", ())), slope_from_value(d.get("slope")), d.get("noise_sd", 1.0)
    )


def _floats(text: str) -> List[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise DataError(f"expected comma-separated numbers, got {text!r}") from None


def parse_delta_grid(value) -> List[float]:
    """``"start:stop:num"`` (equidistant, inclusive), a comma list, or a list/dict."""
    if isinstance(value, dict):
        return np.linspace(value["start"], value["stop"], int(value["num"])).tolist()
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3:
            raise DataError(f"delta grid must be start:stop:num, got {value!r}")
        return np.linspace(float(parts[0]), float(parts[1]), int(parts[2])).tolist()
    return _floats(value)


# ------------------------------------------------------------------------- CLI


class UsageError(PointImpactError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(sp, data: bool = True):
    sp.add_argument("--config", help="YAML/JSON run config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory (or file for simulate)")
    if data:
        sp.add_argument("--data", required=True, help="curve bundle CSV")
        sp.add_argument("--max-missing", type=int, default=None)


def _detection_flags(sp):
    sp.add_argument("--delta", type=float)
    sp.add_argument("--delta-grid", help="start:stop:num or comma list")
    sp.add_argument("--cutoff-A", dest="cutoff_A", type=float)
    sp.add_argument("--exclusion", choices=["sqrt", "dlogd"])


def _regression_flags(sp):
    sp.add_argument("--k-max", dest="k_max", type=int)
    sp.add_argument("--max-vars", dest="max_vars", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pointimpact", description="Functional linear regression with points of impact.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("simulate", help="simulate curves and responses")
    _common(sp, data=False)
    sp.add_argument("--process", choices=["ou", "bm", "fbm"])
    sp.add_argument("--theta", type=float)
    sp.add_argument("--sigma-u", dest="sigma_u", type=float)
    sp.add_argument("--hurst", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--taus")
    sp.add_argument("--betas")
    sp.add_argument("--slope", help="zero, design, or polynomial coefficients c0,c1,...")
    sp.add_argument("--noise-sd", dest="noise_sd", type=float)

    sp = sub.add_parser("detect", help="candidate impact points for one window")
    _common(sp)
    _detection_flags(sp)

    sp = sub.add_parser("fit", help="select and fit the augmented model")
    _common(sp)
    _detection_flags(sp)
    _regression_flags(sp)
    sp.add_argument("--model", choices=["augmented", "impact", "flr"])

    sp = sub.add_parser("cv", help="leave-one-out prediction error of the three models")
    _common(sp)
    _detection_flags(sp)
    _regression_flags(sp)
    sp.add_argument("--models", default="augmented,impact,flr")
    sp.add_argument("--nested", action="store_true", help="repeat model selection inside each fold")

    sp = sub.add_parser("study", help="Monte Carlo simulation study")
    _common(sp, data=False)
    _detection_flags(sp)
    _regression_flags(sp)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--jobs", type=int, default=1)
    return ap


def _pick(args, cfg: dict, section: str, key: str, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    return cfg.get(section, {}).get(key, default)


def _outdir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, cfg) -> FunctionalDataset:
    max_missing = args.max_missing if args.max_missing is not None else cfg.get("data", {}).get("max_missing", DEFAULT_MAX_MISSING)
    return load_curves(args.data, max_missing)


def _require_y(data: FunctionalDataset):
    if data.responses is None:
        raise DataError("response column required")


def _pipeline_config(args, cfg, model: str) -> PipelineConfig:
    grid_val = args.delta_grid if args.delta_grid is not None else cfg.get("detection", {}).get("delta_grid")
    delta = _pick(args, cfg, "detection", "delta")
    if grid_val is not None:
        dgrid = tuple(parse_delta_grid(grid_val))
    elif delta is not None:
        dgrid = (float(delta),)
    else:
        dgrid = None
    return PipelineConfig(
        model=model,
        delta_grid=dgrid,
        delta_C=cfg.get("detection", {}).get("delta_C", 1.0),
        exclusion=_pick(args, cfg, "detection", "exclusion", "sqrt"),
        cutoff_A=_pick(args, cfg, "detection", "cutoff_A", 2.0),
        k_max=_pick(args, cfg, "regression", "k_max", 6),
        max_vars=_pick(args, cfg, "regression", "max_vars", 6),
        quadrature=cfg.get("quadrature", "trapezoid"),
        nested=bool(getattr(args, "nested", False)),
    )


def cmd_simulate(args, cfg) -> None:
    pc = dict(cfg.get("process", {}))
    for key in ("theta", "sigma_u", "hurst"):
        if getattr(args, key) is not None:
            pc[key] = getattr(args, key)
    if args.process:
        pc["kind"] = args.process
    spec = process_from_dict(pc)
    g = cfg.get("grid", {})
    grid = Grid(args.a if args.a is not None else g.get("a", 0.0), args.b if args.b is not None else g.get("b", 1.0),
                args.p if args.p is not None else g.get("p", 1001))
    n = args.n if args.n is not None else cfg.get("n", 100)
    md = dict(cfg.get("model", {}))
    if args.taus is not None:
        md["taus"] = _floats(args.taus)
    if args.betas is not None:
        md["betas"] = _floats(args.betas)
    if args.slope is not None:
        md["slope"] = args.slope
    if args.noise_sd is not None:
        md["noise_sd"] = args.noise_sd
    model = model_from_dict(md)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    X = simulate(n, grid, spec, seed)
    y = generate_response(X, model, QuadratureRule.for_grid(grid, cfg.get("quadrature", "trapezoid")), seed)
    out = Path(args.out or "curves.csv")
    if out.suffix.lower() != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "curves.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_curves(out, X.with_responses(y))


def cmd_detect(args, cfg) -> None:
    data = _load(args, cfg)
    _require_y(data)
    cdata, _, _ = center(data)
    delta = _pick(args, cfg, "detection", "delta")
    if delta is None:
        delta = default_delta(data.n, data.grid.length, cfg.get("detection", {}).get("delta_C", 1.0))
    dc = DetectionConfig(
        delta,
        _pick(args, cfg, "detection", "exclusion", "sqrt"),
        _pick(args, cfg, "detection", "cutoff_A", 2.0),
        cfg.get("detection", {}).get("max_candidates"),
    )
    res = detect(cdata, dc)
    out = _outdir(args)
    write_report(out / "detection.json", res.to_dict(), "detection")
    t, stat = statistic_profile(cdata, res.delta)
    with open(out / "profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "abs_mean_zy"])
        w.writerows([repr(float(a)), repr(float(b))] for a, b in zip(t, stat))


def cmd_fit(args, cfg) -> None:
    data = _load(args, cfg)
    _require_y(data)
    model = args.model or cfg.get("regression", {}).get("model", "augmented")
    pcfg = _pipeline_config(args, cfg, model)
    pf = fit_pipeline(data, pcfg)
    doc = {
        "model": model,
        "delta": pf.delta,
        "fit": pf.fit.to_dict(),
        "eigensystem": None if pf.eigsys is None else pf.eigsys.to_dict(),
        "curve_means": pf.curve_means,
        "response_mean": pf.y_mean,
        "grid": data.grid.points,
    }
    out = _outdir(args)
    write_report(out / "fit.json", doc, "fit")
    with open(out / "beta_hat.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "beta_hat"])
        w.writerows([repr(float(a)), repr(float(b))] for a, b in zip(data.grid.points, pf.fit.beta_hat_curve))


def format_cv_table(results) -> str:
    head = ["Model", "k^", "S^", "MSPE", "median((y-y^)^2)"]
    rows = [[r.model, str(r.k), str(r.S), f"{r.mspe:.3f}", f"{r.median_se:.3f}"] for r in results]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(head)]
    line = lambda cells: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([line(head), "  ".join("-" * w for w in widths)] + [line(r) for r in rows]) + "\n"


def run_cv(data: FunctionalDataset, pcfg: PipelineConfig, models: Sequence[str]):
    import dataclasses

    return [loocv_mspe(data, dataclasses.replace(pcfg, model=m)) for m in models]


def cmd_cv(args, cfg) -> None:
    data = _load(args, cfg)
    _require_y(data)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    results = run_cv(data, _pipeline_config(args, cfg, models[0]), models)
    out = _outdir(args)
    write_report(out / "cv.json", {"n": data.n, "p": data.grid.p, "models": [r.to_dict() for r in results]}, "cv")
    (out / "cv.txt").write_text(format_cv_table(results))


def study_config_from(args, cfg) -> StudyConfig:
    st = cfg.get("study", {})
    det = cfg.get("detection", {})
    reg = cfg.get("regression", {})
    return StudyConfig(
        replications=args.replications if args.replications is not None else st.get("replications", 100),
        sizes=tuple(tuple(s) for s in st.get("sizes", [[250, 1001]])),
        process=process_from_dict(cfg.get("process", {"kind": "ou", "theta": 5.0, "sigma_u": 3.5})),
        model=model_from_dict(cfg.get("model", {"taus": [0.25, 0.75], "betas": [2.0, 1.0], "noise_sd": 1.0})),
        delta_C=det.get("delta_C", 1.0),
        exclusion=args.exclusion or det.get("exclusion", "sqrt"),
        cutoff_A=args.cutoff_A if args.cutoff_A is not None else det.get("cutoff_A", 2.0),
        k_max=args.k_max if args.k_max is not None else reg.get("k_max", 6),
        max_vars=args.max_vars if args.max_vars is not None else reg.get("max_vars", 6),
        seed=args.seed if args.seed is not None else cfg.get("seed", 0),
        domain=tuple(cfg.get("domain", (0.0, 1.0))),
        quadrature=cfg.get("quadrature", "trapezoid"),
    )


def cmd_study(args, cfg) -> None:
    scfg = study_config_from(args, cfg)
    rep = run_simulation_study(scfg, n_jobs=max(1, args.jobs))
    out = _outdir(args)
    write_report(out / "study.json", rep.to_dict(), "study")
    (out / "study.txt").write_text(rep.to_text())


COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "fit": cmd_fit, "cv": cmd_cv, "study": cmd_study}


def _fail(code: int, exc: BaseException) -> int:
    msg = " ".join(str(exc).split())
    print(f"pointimpact: error code={code} type={type(exc).__name__} reason={msg}", file=sys.stderr)
    return code


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the exit status (0 ok, 1 usage, 2 data, 3 numerical)."""
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = load_config(args.config) if args.config else {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail(1, exc)
    except (DataError, OSError, jsonschema.ValidationError) as exc:
        return _fail(2, exc)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        return _fail(3, exc)
    return 0


def main() -> None:
    sys.exit(run_cli())
