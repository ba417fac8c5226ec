"""Fixed-weight sweeps over alpha and non-dominated front extraction."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .optim import AdamWConfig, LbfgsConfig, RunRecord, Schedule, run_schedule
from .pinnloss import Weighting

DEFAULT_ALPHAS = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99)


def pareto_front(points) -> np.ndarray:
    """Indices of the non-dominated rows of ``points`` (minimize every column).

    A point is dropped if another point is no worse in every coordinate and
    strictly better in at least one. Exact duplicates are all kept.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise ValueError("points must be a 2-D array")
    keep = []
    for i in range(P.shape[0]):
        le = np.all(P <= P[i], axis=1)
        lt = np.any(P < P[i], axis=1)
        if not np.any(le & lt):
            keep.append(i)
    return np.array(keep, dtype=int)


@dataclass
class SweepResult:
    tag: str
    alphas: tuple[float, ...]
    runs: list[RunRecord] = field(default_factory=list)
    lbpinn: RunRecord | None = None

    def final_points(self) -> np.ndarray:
        """(l_pde, l_d) of each fixed-alpha run's final iterate."""
        return np.array([[r.final["l_pde"], r.final["l_d"]] for r in self.runs])

    def front(self) -> np.ndarray:
        """Indices into ``alphas`` of the non-dominated final points."""
        return pareto_front(self.final_points())

    def rows(self):
        """Trajectory rows ``(alpha, iter, l_pde, l_d, is_final)``; the lbPINN run uses alpha "lbpinn"."""
        labelled = [(repr(a), r) for a, r in zip(self.alphas, self.runs)]
        if self.lbpinn is not None:
            labelled.append(("lbpinn", self.lbpinn))
        for label, rec in labelled:
            last = len(rec.trace) - 1
            for k, row in enumerate(rec.trace):
                yield label, row["iter"], row["l_pde"], row["l_d"], k == last


def pareto_sweep(dataset, alphas=DEFAULT_ALPHAS, schedule: Schedule | None = None, seed: int = 0,
                 layer_sizes=None, include_lbpinn: bool = True, adamw: AdamWConfig | None = None,
                 lbfgs: LbfgsConfig | None = None, log_base: str = "natural", workers: int = 1) -> SweepResult:
    """Run the full schedule once per alpha (and once with lbPINN) on one dataset.

    Runs are independent; ``workers > 1`` spreads them over a process pool
    without changing any result.
    """
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise ValueError("empty alpha list")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {a}")
    schedule = schedule or Schedule.preset("standard")
    weightings = [Weighting.fixed(a) for a in alphas]
    if include_lbpinn:
        weightings.append(Weighting.lbpinn())
    args = [(dataset, schedule, seed, w, layer_sizes, adamw, lbfgs, log_base) for w in weightings]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_schedule, *zip(*args)))
    else:
        records = [run_schedule(*a) for a in args]
    result = SweepResult(dataset.tag, alphas, records[:len(alphas)])
    if include_lbpinn:
        result.lbpinn = records[-1]
    return result
