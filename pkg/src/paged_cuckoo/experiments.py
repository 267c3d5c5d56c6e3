"""Load-threshold and insert-cost experiments, fit formulas and CSV output."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import TableParams, Variant
from .table import CuckooTable, key_stream

DESK_N = 120_960
FULL_N = 1_209_600
COST_WINDOW = 0.005

THRESHOLD_COLUMNS = ["variant", "d", "k", "t", "n", "trials", "mean_beta", "std_beta"]
COST_COLUMNS = ["variant", "d", "k", "t", "n", "load", "mean_lookups", "std_lookups", "trials"]
BOUND_COLUMNS = ["d", "k", "t", "beta_lower", "margin", "x_grid_step"]
FIT_COLUMNS = ["model", "t", "predicted_beta", "c", "a", "b"]


@dataclass
class TrialReport:
    variant: str
    n: int
    t: int
    k: int
    d: int
    seed: int
    final_beta: float
    decile_lookups: list[float]
    failure_insert_index: int


@dataclass
class ThresholdSummary:
    params: TableParams
    mean_beta: float
    std_beta: float
    reports: list[TrialReport] = field(default_factory=list)


@dataclass
class CostSummary:
    params: TableParams
    loads: list[float]
    mean_lookups: list[float]
    std_lookups: list[float]
    per_trial: list[list[float]]
    trials: int
    failed_trials: list[int] = field(default_factory=list)


def _stream_length(n: int) -> int:
    # n + 1 distinct keys always end a trial; the slack absorbs duplicates
    return n + 1024


def _decile_means(lookups: np.ndarray, live_before: np.ndarray, n: int) -> list[float]:
    bins = np.minimum((live_before * 10) // n, 9)
    out = []
    for b in range(10):
        sel = lookups[bins == b]
        out.append(float(sel.mean()) if len(sel) else math.nan)
    return out


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _mean_std(values) -> tuple[float, float]:
    values = list(values)
    if not values:
        return math.nan, math.nan
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return statistics.fmean(values), std


def run_trial(params: TableParams, seed: int) -> TrialReport:
    """Fill a fresh table with a fresh key stream until an insert fails."""
    table = CuckooTable(params, seed)
    res = table.fill(key_stream(seed, _stream_length(params.n)))
    return TrialReport(params.variant.value, params.n, params.t, params.k, params.d, seed,
                       res.live / params.n, _decile_means(res.lookups, res.live_before, params.n),
                       res.live)


def run_threshold(variant, d: int, k: int, t: int, n: int = DESK_N, trials: int = 20,
                  base_seed: int = 0, workers: int = 1, relaxed: bool = False) -> ThresholdSummary:
    """Mean and sample std of the failure load; trial ``i`` uses seed ``base_seed + i``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = TableParams(n, t, k, d, Variant(variant), relaxed=relaxed)
    reports = _map(lambda i: run_trial(params, base_seed + i), range(trials), workers)
    mean, std = _mean_std(r.final_beta for r in reports)
    return ThresholdSummary(params, mean, std, reports)


def _window_mean(lookups, live_before, n, load) -> float:
    frac = live_before / n
    sel = lookups[(frac >= load - COST_WINDOW) & (frac <= load)]
    return float(sel.mean()) if len(sel) else math.nan


def run_insert_cost(variant, d: int, k: int, t: int, n: int = DESK_N, target_load=0.92,
                    trials: int = 20, base_seed: int = 0, workers: int = 1,
                    relaxed: bool = False, unit: str = "bucket") -> CostSummary:
    """Mean lookups per insert over the load window ``[load - 0.005, load]``.

    ``target_load`` may be a single load or a sequence; each trial fills one
    table up to the largest load and reads every window off its trace.  A
    trial whose table fails before the largest load is reported in
    ``failed_trials`` and left out of the averages.  ``unit`` is ``"bucket"``
    (bucket examinations) or ``"cell"`` (``k`` cell reads per bucket).
    """
    if unit not in ("bucket", "cell"):
        raise ValueError(f"unknown lookup unit {unit!r}")
    loads = [float(target_load)] if np.isscalar(target_load) else [float(v) for v in target_load]
    params = TableParams(n, t, k, d, Variant(variant), relaxed=relaxed)
    top = max(loads)
    stop = int(math.floor(top * n))

    def one(i):
        table = CuckooTable(params, base_seed + i)
        res = table.fill(key_stream(base_seed + i, _stream_length(n)), max_items=stop)
        if res.failed:
            return None
        cost = res.lookups if unit == "bucket" else res.cell_reads
        return [_window_mean(cost, res.live_before, n, load) for load in loads]

    results = _map(one, range(trials), workers)
    failed = [i for i, r in enumerate(results) if r is None]
    good = [r for r in results if r is not None]
    means, stds = [], []
    for j in range(len(loads)):
        m, s = _mean_std(r[j] for r in good)
        means.append(m)
        stds.append(s)
    return CostSummary(params, loads, means, stds, good, trials, failed)


@dataclass(frozen=True)
class FitModel:
    """``beta(t) = c * (1 - (t / a) ** -b)``."""

    kind: str
    c: float
    a: float
    b: float

    def __call__(self, t):
        return eval_fit(self, t)


CHOOSE2 = FitModel("choose2", 0.977, 0.764, 2.604)
CHOOSE3 = FitModel("choose3", 0.997, 1.011, 2.998)
MODELS = {"choose2": CHOOSE2, "choose3": CHOOSE3}


def eval_fit(model: FitModel, t):
    if np.isscalar(t) and math.isinf(t):
        return model.c
    t = np.asarray(t, dtype=float)
    out = model.c * (1.0 - (t / model.a) ** (-model.b))
    return float(out) if out.ndim == 0 else out


def refit(kind: str, ts, betas) -> FitModel:
    """Least-squares refit of the three coefficients, starting from the published ones."""
    from scipy.optimize import curve_fit

    start = MODELS[kind]
    popt, _ = curve_fit(lambda t, c, a, b: c * (1.0 - (t / a) ** (-b)),
                        np.asarray(ts, float), np.asarray(betas, float),
                        p0=(start.c, start.a, start.b), maxfev=20000)
    return FitModel(kind, *(float(v) for v in popt))


# -- CSV -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.8g}"
    return str(v)


def to_csv(columns: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def threshold_rows(summaries) -> list[dict]:
    return [{"variant": s.params.variant.value, "d": s.params.d, "k": s.params.k, "t": s.params.t,
             "n": s.params.n, "trials": len(s.reports), "mean_beta": s.mean_beta,
             "std_beta": s.std_beta} for s in summaries]


def cost_rows(summaries) -> list[dict]:
    rows = []
    for s in summaries:
        p = s.params
        for load, m, sd in zip(s.loads, s.mean_lookups, s.std_lookups):
            rows.append({"variant": p.variant.value, "d": p.d, "k": p.k, "t": p.t, "n": p.n,
                         "load": load, "mean_lookups": m, "std_lookups": sd,
                         "trials": len(s.per_trial)})
    return rows


def bound_rows(results) -> list[dict]:
    return [{"d": r.d, "k": r.k, "t": r.t, "beta_lower": r.beta_lower, "margin": r.config.margin,
             "x_grid_step": r.config.x_grid_step} for r in results]


def fit_rows(model: FitModel, ts) -> list[dict]:
    return [{"model": model.kind, "t": t, "predicted_beta": eval_fit(model, t), "c": model.c,
             "a": model.a, "b": model.b} for t in ts]


def emit_csv(kind: str, records) -> str:
    """CSV text for ``threshold``, ``insert-cost``, ``bounds`` or ``fit`` records."""
    if kind == "threshold":
        return to_csv(THRESHOLD_COLUMNS, threshold_rows(records))
    if kind == "insert-cost":
        return to_csv(COST_COLUMNS, cost_rows(records))
    if kind == "bounds":
        return to_csv(BOUND_COLUMNS, bound_rows(records))
    raise ValueError(f"unknown record kind {kind!r}")
