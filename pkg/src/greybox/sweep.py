"""Lambda sweeps, free-run scoring, and decision makers.

A sweep trains one model per lambda on the grid, scores each on free-run
metrics, and hands the resulting points to a decision maker: smallest
absolute correlation between free-run error and measured output, or
smallest free-run RMSE over the test record.  Ties break toward the
smaller lambda; diverged or failed points never win.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import DynDataset, SteadyDataset, write_table
from .errors import GreyboxError, SelectionError
from .estimation import (
    TrainConfig,
    fit_ga_legacy,
    fit_ols,
    fit_weighted_lm,
    fit_wls,
)
from .models import (
    EvalCounter,
    MlpModel,
    Model,
    PolynomialModel,
    free_run_on_dataset,
    model_from_json,
    model_to_json,
)
from .steady_state import FixedPointConfig, cost_jd, cost_js_hat

RMSE_CAP = 1e6


@dataclass(frozen=True)
class LambdaGrid:
    """Distinct weighting values in [0, 1], kept sorted."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(sorted({float(v) for v in self.values}))
        if not vals:
            raise ValueError("lambda grid must not be empty")
        if vals[0] < 0.0 or vals[-1] > 1.0:
            raise ValueError(f"lambda values must lie in [0, 1], got {vals}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def linspace(cls, start: float, stop: float, count: int) -> "LambdaGrid":
        if count < 1:
            raise ValueError("count must be positive")
        return cls(values=tuple(np.linspace(start, stop, count)))

    @classmethod
    def parse(cls, text: str) -> "LambdaGrid":
        """Comma-separated values, e.g. "0.1,0.2,0.5"."""
        parts = [p for p in (s.strip() for s in text.split(",")) if p]
        if not parts:
            raise ValueError("lambda grid must not be empty")
        return cls(values=tuple(float(p) for p in parts))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass
class ParetoPoint:
    """One trained model on the sweep with its scores.

    ``model`` is the serialized model document (None when training failed;
    the failure text lands in ``error``).  Correlation and RMSE fields stay
    None when their free-run diverged or was not computed.
    """

    lam: float
    model: dict | None = None
    j_d: float = math.nan
    j_s_hat: float = math.nan
    rmse_zt: float | None = None
    diverged_zt: bool = False
    rmse_zv: float | None = None
    diverged_zv: bool = False
    corr_dm: float | None = None
    diverged_zd: bool = False
    train_time_ms: int = 0
    eval_count: int = 0
    error: str | None = None

    def fitted_model(self) -> Model:
        if self.model is None:
            raise ValueError(f"no model at lambda {self.lam} ({self.error})")
        return model_from_json(self.model)


def rmse(predicted, actual, cap: float = RMSE_CAP) -> float:
    """Root mean squared error, clipped to ``cap`` and on non-finite input."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise ValueError(f"shape mismatch {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("rmse needs at least one sample")
    diff = predicted - actual
    if not np.all(np.isfinite(diff)):
        return cap
    return min(float(np.sqrt(np.mean(diff**2))), cap)


def abs_error_correlation(residual, reference) -> float:
    """Absolute Pearson correlation; degenerate (constant) inputs give 0."""
    residual = np.asarray(residual, dtype=float)
    reference = np.asarray(reference, dtype=float)
    r_std = np.std(residual)
    y_std = np.std(reference)
    if r_std == 0.0 or y_std == 0.0:
        return 0.0
    cov = float(np.mean((residual - residual.mean()) * (reference - reference.mean())))
    return abs(cov / (r_std * y_std))


def score_free_run(model: Model, data: DynDataset, cap: float = RMSE_CAP):
    """Free-run RMSE over the predicted region, the divergence flag, and
    the absolute error/output correlation (None when diverged)."""
    result = free_run_on_dataset(model, data, bound=cap)
    k0 = model.spec.max_lag
    measured = data.output[k0:]
    if result.diverged:
        return cap, True, None
    predicted = result.y[k0:]
    corr = abs_error_correlation(measured - predicted, measured)
    return rmse(predicted, measured, cap), False, corr


def _resolve_jobs(n_jobs: int | None) -> int:
    if n_jobs is not None:
        return max(1, int(n_jobs))
    env = os.environ.get("GREYBOX_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"GREYBOX_THREADS must be an integer, got {env!r}") from None
    return 1


def run_sweep(
    structure: Model,
    zd: DynDataset,
    zt: DynDataset | None,
    zs: SteadyDataset,
    grid: LambdaGrid,
    train: TrainConfig,
    zv: DynDataset | None = None,
    fp_config: FixedPointConfig | None = None,
    n_jobs: int | None = None,
) -> list[ParetoPoint]:
    """Train one model per lambda and score it; failures become points too.

    Lambdas are independent runs from identical seeded initial conditions
    (no warm starting), so the sweep parallelizes across a thread pool when
    ``n_jobs`` or the GREYBOX_THREADS environment variable asks for it.  A
    per-lambda SingularityError or DivergenceError is recorded on the point
    instead of aborting the sweep.  For the GA baseline the black-box seed
    model is trained once up front and shared.
    """
    jobs = _resolve_jobs(n_jobs)
    ga_seed_model = None
    if train.algorithm == "ga_legacy":
        if isinstance(structure, MlpModel):
            ga_seed_model, _ = fit_weighted_lm(
                structure, zd, None, 0.0, train.lm, init_seed=train.init_seed
            )
        else:
            ga_seed_model = fit_ols(structure, zd)
    # one independent GA stream per lambda, fixed ahead of any threading
    ga_seeds = {
        lam: int(np.random.SeedSequence((train.ga.seed, i)).generate_state(1, np.uint64)[0])
        for i, lam in enumerate(grid)
    }

    def fit_one(lam: float) -> ParetoPoint:
        counter = EvalCounter()
        start = time.perf_counter()
        try:
            if train.algorithm == "ols":
                if not isinstance(structure, PolynomialModel):
                    raise TypeError("ols needs a polynomial structure")
                fitted = fit_ols(structure, zd)
                counter.add(zd.sample_count - structure.spec.max_lag)
            elif train.algorithm == "wls":
                if not isinstance(structure, PolynomialModel):
                    raise TypeError("wls needs a polynomial structure")
                fitted = fit_wls(structure, zd, zs, lam)
                counter.add(zd.sample_count - structure.spec.max_lag + zs.n_pairs)
            elif train.algorithm == "weighted_lm":
                fitted, _ = fit_weighted_lm(
                    structure, zd, zs, lam, train.lm, init_seed=train.init_seed,
                    counter=counter,
                )
            else:
                ga_cfg = replace(train.ga, seed=ga_seeds[lam])
                fitted, _ = fit_ga_legacy(
                    ga_seed_model, zd, zs, lam, ga_cfg, fp_config, counter=counter
                )
        except (GreyboxError, TypeError) as exc:
            return ParetoPoint(
                lam=lam,
                error=f"{type(exc).__name__}: {exc}",
                train_time_ms=int(round((time.perf_counter() - start) * 1e3)),
                eval_count=counter.count,
            )
        elapsed_ms = int(round((time.perf_counter() - start) * 1e3))
        point = ParetoPoint(
            lam=lam,
            model=model_to_json(fitted),
            j_d=cost_jd(fitted, zd),
            j_s_hat=cost_js_hat(fitted, zs),
            train_time_ms=elapsed_ms,
            eval_count=counter.count,
        )
        _, point.diverged_zd, point.corr_dm = score_free_run(fitted, zd)
        if zt is not None:
            point.rmse_zt, point.diverged_zt, _ = score_free_run(fitted, zt)
        if zv is not None:
            point.rmse_zv, point.diverged_zv, _ = score_free_run(fitted, zv)
        return point

    lams = list(grid)
    if jobs > 1 and len(lams) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(fit_one, lams))
    else:
        points = [fit_one(lam) for lam in lams]
    return points


def _admissible(points: list[ParetoPoint]) -> list[ParetoPoint]:
    return [p for p in points if p.error is None and p.model is not None]


def decide_min_corr(points: list[ParetoPoint], zd: DynDataset | None = None) -> ParetoPoint:
    """Point whose free-run error correlates least with the measured output.

    Candidates whose free-run over the identification record diverged are
    excluded.  ``zd`` lets the statistic be recomputed when a point does not
    carry it.  Ties break toward the smaller lambda.
    """
    best = None
    for p in _admissible(points):
        corr = p.corr_dm
        if corr is None and not p.diverged_zd and zd is not None:
            _, diverged, corr = score_free_run(p.fitted_model(), zd)
            if diverged:
                corr = None
        if corr is None or p.diverged_zd or not math.isfinite(corr):
            continue
        key = (corr, p.lam)
        if best is None or key < best[0]:
            best = (key, p)
    if best is None:
        raise SelectionError("no candidate with a finite error correlation")
    return best[1]


def decide_min_rmse_zt(points: list[ParetoPoint], zt: DynDataset | None = None) -> ParetoPoint:
    """Point with the smallest free-run RMSE over the test record.

    Diverged candidates are excluded; ties break toward the smaller lambda.
    """
    best = None
    for p in _admissible(points):
        value = p.rmse_zt
        if value is None and zt is not None:
            value, diverged, _ = score_free_run(p.fitted_model(), zt)
            if diverged:
                value = None
        if value is None or p.diverged_zt or not math.isfinite(value):
            continue
        key = (value, p.lam)
        if best is None or key < best[0]:
            best = (key, p)
    if best is None:
        raise SelectionError("no candidate with a finite test RMSE")
    return best[1]


def pareto_front(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated points in the (j_d, j_s_hat) plane, sorted by lambda.

    Point q dominates p when q is no worse in both costs and strictly
    better in at least one.  Points with non-finite costs never enter.
    """
    valid = [
        p
        for p in _admissible(points)
        if math.isfinite(p.j_d) and math.isfinite(p.j_s_hat)
    ]
    front = []
    for p in valid:
        dominated = any(
            (q.j_d <= p.j_d and q.j_s_hat <= p.j_s_hat)
            and (q.j_d < p.j_d or q.j_s_hat < p.j_s_hat)
            for q in valid
        )
        if not dominated:
            front.append(p)
    return sorted(front, key=lambda p: p.lam)


def write_sweep_csv(path, points: list[ParetoPoint]) -> None:
    header = [
        "lambda",
        "j_d",
        "j_s_hat",
        "rmse_zt",
        "diverged_zt",
        "rmse_zv",
        "diverged_zv",
        "corr_dm",
        "diverged_zd",
        "train_time_ms",
        "eval_count",
        "error",
    ]

    def opt(value):
        return "" if value is None else repr(float(value))

    columns = [
        [p.lam for p in points],
        [p.j_d for p in points],
        [p.j_s_hat for p in points],
        [opt(p.rmse_zt) for p in points],
        ["true" if p.diverged_zt else "false" for p in points],
        [opt(p.rmse_zv) for p in points],
        ["true" if p.diverged_zv else "false" for p in points],
        [opt(p.corr_dm) for p in points],
        ["true" if p.diverged_zd else "false" for p in points],
        [str(p.train_time_ms) for p in points],
        [str(p.eval_count) for p in points],
        [p.error or "" for p in points],
    ]
    write_table(path, header, columns)
