"""Evaluation protocols: impact matching, error metrics, LOOCV and simulation studies."""

from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._seeding import child_seed
from .detection import DetectionConfig, default_delta, detect
from .errors import DataError, InsufficientDataError, PointImpactError, SingularDesignError
from .fpca import EigenSystem, center, empirical_kl, project_scores
from .gp_sim import FunctionalDataset, Grid, ProcessSpec, simulate
from .model_sim import ImpactModelSpec, QuadratureRule, generate_response, quadrature_inner
from .regression import (
    DEFAULT_K_MAX,
    DEFAULT_MAX_VARS,
    AugmentedFit,
    best_subset_bic,
    fit_augmented,
    predict,
    select_delta,
)


def match_impacts(true_taus: Sequence[float], estimated: Sequence[float], a: float = 0.0, b: float = 1.0) -> List[Optional[float]]:
    """Match estimates to true impact points.

    ``[a, b]`` is cut at the midpoints between consecutive true points; inside
    the interval of ``tau_r`` the closest estimate is matched to it.  An
    interval without estimates leaves ``tau_r`` unmatched (``None``).  A point
    on a midpoint belongs to the interval on its right.
    """
    true = np.asarray(true_taus, dtype=float)
    if np.any(np.diff(true) <= 0):
        raise DataError("true impact locations must be strictly increasing")
    est = np.asarray(estimated, dtype=float)
    cuts = np.concatenate([[-np.inf], (true[:-1] + true[1:]) / 2, [np.inf]])
    out: List[Optional[float]] = []
    for r, tau in enumerate(true):
        inside = est[(est >= cuts[r]) & (est < cuts[r + 1])]
        out.append(float(inside[np.argmin(np.abs(inside - tau))]) if inside.size else None)
    return out


def integrated_squared_error(beta_hat_curve, beta_true_curve, rule: QuadratureRule) -> float:
    diff = np.asarray(beta_hat_curve, dtype=float) - np.asarray(beta_true_curve, dtype=float)
    return float(quadrature_inner(diff, diff, rule))


# --------------------------------------------------------------------- pipeline

MODELS = ("augmented", "impact", "flr")


@dataclass(frozen=True)
class PipelineConfig:
    """How a model is selected on one dataset.

    ``model`` is ``"augmented"`` (scores and impacts), ``"impact"`` (``k = 0``)
    or ``"flr"`` (no impact points).  Without ``delta_grid`` the window is
    ``delta_C (b - a)/sqrt(n)``.
    """

    model: str = "augmented"
    delta_grid: Optional[Tuple[float, ...]] = None
    delta_C: float = 1.0
    exclusion: str = "sqrt"
    cutoff_A: float = 2.0
    k_max: int = DEFAULT_K_MAX
    max_vars: int = DEFAULT_MAX_VARS
    quadrature: str = "trapezoid"
    nested: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise DataError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.delta_grid is not None:
            object.__setattr__(self, "delta_grid", tuple(float(d) for d in self.delta_grid))


@dataclass(frozen=True, eq=False)
class PipelineFit:
    fit: AugmentedFit
    eigsys: Optional[EigenSystem]
    curve_means: np.ndarray
    y_mean: float
    delta: Optional[float]
    centered: FunctionalDataset

    def predict(self, curves) -> np.ndarray:
        return predict(self.fit, self.eigsys, curves, self.curve_means, self.y_mean)


def fit_pipeline(data: FunctionalDataset, cfg: PipelineConfig) -> PipelineFit:
    """Center, decompose, detect and select a model by BIC."""
    cdata, means, y_mean = center(data)
    rule = QuadratureRule.for_grid(data.grid, cfg.quadrature)
    k_max = 0 if cfg.model == "impact" else cfg.k_max
    eigsys = None
    if k_max:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            eigsys = empirical_kl(cdata, k_max, rule)
    if cfg.model == "flr":
        search = best_subset_bic(cdata, eigsys, [], k_max, cfg.max_vars)
        return PipelineFit(search.best_fit, eigsys, means, y_mean, None, cdata)
    grid = cfg.delta_grid or (default_delta(data.n, data.grid.length, cfg.delta_C),)
    sel = select_delta(cdata, eigsys, grid, DetectionConfig(grid[0], cfg.exclusion, cfg.cutoff_A), k_max, cfg.max_vars)
    return PipelineFit(sel.search.best_fit, eigsys, means, y_mean, sel.delta, cdata)


def _refit_fixed(stage1: PipelineFit, train: FunctionalDataset) -> PipelineFit:
    """Re-estimate coefficients on ``train`` with basis and impact locations held fixed."""
    ctrain, means, y_mean = center(train)
    fit = stage1.fit
    eig = stage1.eigsys
    if eig is not None:
        eig = dataclasses.replace(eig, scores=project_scores(ctrain.curves, eig))
    refit = fit_augmented(ctrain, eig, fit.selected_taus, fit.k)
    return PipelineFit(refit, eig, means, y_mean, stage1.delta, ctrain)


@dataclass(frozen=True, eq=False)
class LoocvResult:
    model: str
    mspe: float
    median_se: float
    errors: np.ndarray
    n_failed: int
    k: int
    S: int
    delta: Optional[float]
    taus: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "k_hat": self.k,
            "S_hat": self.S,
            "mspe": self.mspe,
            "median_squared_error": self.median_se,
            "n_failed_folds": self.n_failed,
            "delta": self.delta,
            "taus": list(self.taus),
            "squared_errors": [None if math.isnan(e) else e for e in self.errors.tolist()],
        }


def loocv_mspe(data: FunctionalDataset, cfg: PipelineConfig) -> LoocvResult:
    """Leave-one-out prediction error.

    The model (window, impact points, number of components) is selected once
    on the full data; every fold re-estimates only the coefficients.  With
    ``cfg.nested`` the whole selection is repeated inside each fold instead.
    Folds with a singular design are excluded and counted.
    """
    if data.responses is None:
        raise DataError("response column required")
    n = data.n
    if n < 3:
        raise InsufficientDataError(f"LOOCV needs n >= 3, got {n}")
    stage1 = fit_pipeline(data, cfg)
    errors = np.full(n, np.nan)
    for i in range(n):
        train = data.subset(np.delete(np.arange(n), i))
        try:
            model = fit_pipeline(train, cfg) if cfg.nested else _refit_fixed(stage1, train)
        except (SingularDesignError, InsufficientDataError):
            continue
        errors[i] = (data.responses[i] - model.predict(data.curves[i])[0]) ** 2
    ok = errors[~np.isnan(errors)]
    mspe = float(ok.mean()) if ok.size else math.nan
    med = float(np.median(np.sort(ok))) if ok.size else math.nan
    f = stage1.fit
    return LoocvResult(cfg.model, mspe, med, errors, int(n - ok.size), f.k, f.S, stage1.delta, tuple(f.selected_taus.tolist()))


# ------------------------------------------------------------ simulation study


@dataclass(frozen=True)
class StudyConfig:
    """Monte Carlo design; ``sizes`` lists ``(n, p)`` pairs."""

    replications: int
    sizes: Tuple[Tuple[int, int], ...]
    process: ProcessSpec
    model: ImpactModelSpec
    delta_C: float = 1.0
    exclusion: str = "sqrt"
    cutoff_A: float = 2.0
    k_max: int = DEFAULT_K_MAX
    max_vars: int = DEFAULT_MAX_VARS
    seed: int = 0
    domain: Tuple[float, float] = (0.0, 1.0)
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if self.replications < 1:
            raise DataError(f"replications must be >= 1, got {self.replications}")
        sizes = tuple((int(n), int(p)) for n, p in self.sizes)
        if not sizes:
            raise DataError("at least one (n, p) pair is required")
        for n, p in sizes:
            if n < 3 or p < 3:
                raise DataError(f"need n >= 3 and p >= 3, got n={n}, p={p}")
        object.__setattr__(self, "sizes", sizes)
        DetectionConfig(1.0, self.exclusion, self.cutoff_A)

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "sizes": [list(s) for s in self.sizes],
            "process": self.process.to_dict(),
            "model": self.model.to_dict(),
            "delta_C": self.delta_C,
            "exclusion": self.exclusion,
            "cutoff_A": self.cutoff_A,
            "k_max": self.k_max,
            "max_vars": self.max_vars,
            "seed": self.seed,
            "domain": list(self.domain),
            "quadrature": self.quadrature,
        }


def run_replication(cfg: StudyConfig, n: int, p: int, rep: int) -> dict:
    """One replication; returns a flat record (``failed`` set on error)."""
    S = cfg.model.S
    rec = {"n": n, "p": p, "replication": rep, "failed": None}
    try:
        grid = Grid(cfg.domain[0], cfg.domain[1], p)
        rule = QuadratureRule.for_grid(grid, cfg.quadrature)
        X = simulate(n, grid, cfg.process, child_seed(cfg.seed, f"curves/{n}/{p}", rep))
        y = generate_response(X, cfg.model, rule, child_seed(cfg.seed, f"noise/{n}/{p}", rep))
        data, _, _ = center(X.with_responses(y))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            eig = empirical_kl(data, cfg.k_max, rule) if cfg.k_max else None
        det = detect(data, DetectionConfig(default_delta(n, grid.length, cfg.delta_C), cfg.exclusion, cfg.cutoff_A))
        search = best_subset_bic(data, eig, det.candidates.locations, cfg.k_max, cfg.max_vars, det.delta)
    except PointImpactError as exc:
        rec["failed"] = f"{type(exc).__name__}: {exc}"
        return rec
    fit = search.best_fit
    order = np.argsort(fit.selected_taus)
    taus_hat = fit.selected_taus[order]
    betas_hat = fit.beta_hat_impacts[order]
    matched = match_impacts(cfg.model.taus, taus_hat, *cfg.domain)
    tau_err, beta_err, x_gap = [], [], []
    for r, m in enumerate(matched):
        if m is None:
            tau_err.append(math.nan)
            beta_err.append(math.nan)
            x_gap.append(math.nan)
            continue
        pos = int(np.flatnonzero(taus_hat == m)[0])
        tau_err.append(abs(m - cfg.model.taus[r]))
        beta_err.append(abs(betas_hat[pos] - cfg.model.betas[r]))
        jt, jh = grid.index_of(cfg.model.taus[r]), int(fit.tau_indices[order][pos])
        x_gap.append(float(np.mean((X.curves[:, jt] - X.curves[:, jh]) ** 2)))
    rec.update(
        tau_error=tau_err,
        beta_error=beta_err,
        x_gap=x_gap,
        S_bic=fit.S,
        S_cutoff=det.threshold.S_hat,
        k_hat=fit.k,
        ise=integrated_squared_error(fit.beta_hat_curve, cfg.model.slope.evaluate(grid), rule),
        mse=fit.rss / n,
        kappa_hat=math.nan if det.kappa_hat is None else det.kappa_hat,
        delta=det.delta,
        n_candidates=len(det.candidates),
        cutoff_taus=det.threshold.locations.tolist(),
        bic_taus=taus_hat.tolist(),
    )
    return rec


def _nanmean(values) -> Optional[float]:
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else None


def _nanmedian(values) -> Optional[float]:
    v = np.sort(np.asarray(values, dtype=float))
    v = v[~np.isnan(v)]
    return float(np.median(v)) if v.size else None


def summarize(records: List[dict], S: int) -> dict:
    """Aggregate replication records of one ``(n, p)`` cell."""
    ok = [r for r in records if r["failed"] is None]
    row = {"n": records[0]["n"], "p": records[0]["p"], "replications": len(records), "failures": len(records) - len(ok)}
    if not ok:
        return row
    te = np.array([r["tau_error"] for r in ok], dtype=float).reshape(len(ok), S)
    be = np.array([r["beta_error"] for r in ok], dtype=float).reshape(len(ok), S)
    xg = np.array([r["x_gap"] for r in ok], dtype=float).reshape(len(ok), S)
    row.update(
        mean_tau_error=[_nanmean(te[:, r]) for r in range(S)],
        median_tau_error=[_nanmedian(te[:, r]) for r in range(S)],
        mean_beta_error=[_nanmean(be[:, r]) for r in range(S)],
        median_x_gap=[_nanmedian(xg[:, r]) for r in range(S)],
        unmatched=[int(np.isnan(te[:, r]).sum()) for r in range(S)],
        mean_S_hat=_nanmean([r["S_bic"] for r in ok]),
        mean_S_hat_cutoff=_nanmean([r["S_cutoff"] for r in ok]),
        p_S_correct_bic=float(np.mean([r["S_bic"] == S for r in ok])),
        p_S_correct_cutoff=float(np.mean([r["S_cutoff"] == S for r in ok])),
        mean_k_hat=_nanmean([r["k_hat"] for r in ok]),
        mean_ise=_nanmean([r["ise"] for r in ok]),
        median_ise=_nanmedian([r["ise"] for r in ok]),
        mean_mse=_nanmean([r["mse"] for r in ok]),
        mean_kappa_hat=_nanmean([r["kappa_hat"] for r in ok]),
    )
    return row


@dataclass(frozen=True, eq=False)
class StudyReport:
    config: StudyConfig
    rows: List[dict]
    records: List[dict] = field(repr=False, default_factory=list)

    def row(self, n: int, p: Optional[int] = None) -> dict:
        for r in self.rows:
            if r["n"] == n and (p is None or r["p"] == p):
                return r
        raise KeyError((n, p))

    def to_dict(self, include_records: bool = False) -> dict:
        d = {"config": self.config.to_dict(), "rows": self.rows}
        if include_records:
            d["records"] = self.records
        return d

    def to_text(self) -> str:
        return format_study_table(self.rows, self.config.model.S)


def _fmt(x, spec: str) -> str:
    return "-" if x is None else format(x, spec)


def format_study_table(rows: List[dict], S: int) -> str:
    """Aligned plain-text table with one line per ``(n, p)`` cell."""
    head = ["p", "n"]
    head += [f"|tau{r + 1}-tau{r + 1}^|" for r in range(S)]
    head += [f"|beta{r + 1}-beta{r + 1}^|" for r in range(S)]
    head += ["S^", "P(S^=S) bic/cut", "k^", "int(b^-b)^2", "MSE", "kappa^", "fail"]
    lines = []
    for row in rows:
        if "mean_S_hat" not in row:
            cells = [str(row["p"]), str(row["n"])] + ["-"] * (len(head) - 3) + [str(row["failures"])]
        else:
            cells = [str(row["p"]), str(row["n"])]
            cells += [_fmt(v, ".4f") for v in row["mean_tau_error"]]
            cells += [_fmt(v, ".3f") for v in row["mean_beta_error"]]
            cells += [
                _fmt(row["mean_S_hat"], ".2f"),
                f"{row['p_S_correct_bic']:.2f}/{row['p_S_correct_cutoff']:.2f}",
                _fmt(row["mean_k_hat"], ".2f"),
                _fmt(row["mean_ise"], ".2f"),
                _fmt(row["mean_mse"], ".2f"),
                _fmt(row["mean_kappa_hat"], ".2f"),
                str(row["failures"]),
            ]
        lines.append(cells)
    widths = [max(len(h), *(len(c[i]) for c in lines)) if lines else len(h) for i, h in enumerate(head)]
    fmt_line = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    out = [fmt_line(head), "  ".join("-" * w for w in widths)]
    out += [fmt_line(c) for c in lines]
    return "\n".join(out) + "\n"


def _run_task(args):
    return run_replication(*args)


def run_simulation_study(cfg: StudyConfig, n_jobs: int = 1) -> StudyReport:
    """Run every replication of every ``(n, p)`` cell and aggregate.

    Each replication draws from streams derived from ``(cfg.seed, n, p, rep)``,
    so the report does not depend on ``n_jobs`` or scheduling order.
    """
    tasks = [(cfg, n, p, rep) for n, p in cfg.sizes for rep in range(cfg.replications)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))
    else:
        records = [_run_task(t) for t in tasks]
    records.sort(key=lambda r: (cfg.sizes.index((r["n"], r["p"])), r["replication"]))
    rows = []
    for n, p in cfg.sizes:
        rows.append(summarize([r for r in records if r["n"] == n and r["p"] == p], cfg.model.S))
    return StudyReport(cfg, rows, records)
