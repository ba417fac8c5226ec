"""Consistency scenarios (C1, C2, C3, Analytical) and evaluation metrics.

Standard mode fixes nu = 1e-2 and feeds x only; parametric mode feeds
(x, scaled nu) with nu log-min-max scaled onto [-1, 1].
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .fdsolve import CANONICAL_NODES, FdSolution, Mesh, build_mesh, solve_steady, solve_steady_newton
from .fdsolve import rmse_vs_analytic as fd_rmse_vs_analytic
from .mms import NU_MAX, NU_MIN, eval_mms
from .pinnloss import LossTerms
from .tapenet import NetParams, forward

logger = logging.getLogger(__name__)

TAGS = ("C1", "C2", "C3", "Analytical")
MODES = ("standard", "parametric")

STANDARD_NU = 1e-2
STANDARD_TRAIN_X = (-0.55, -0.3, 0.3, 0.8)
STANDARD_TEST_X = (-0.75, -0.45, 0.0, 0.5, 0.9)
STANDARD_N_COLLOCATION = 1000
PARAMETRIC_TRAIN_NU = (1e-1, 1e-3, 1e-6)
PARAMETRIC_TEST_NU = (1e-2, 1e-4, 1e-5)
PARAMETRIC_N_COLLOCATION = 1500
PARAMETRIC_N_BC = 50
DECADE_NUS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


def normalize_tag(tag: str) -> str:
    for t in TAGS:
        if tag.lower() == t.lower():
            return t
    raise ValueError(f"unknown scenario tag {tag!r}; expected one of {TAGS}")


# -- viscosity scaling -----------------------------------------------------

def scale_viscosity(nu, nu_range=(NU_MIN, NU_MAX)):
    """Affine map of log(nu) from [log nu_min, log nu_max] onto [-1, 1]."""
    nu = np.asarray(nu, dtype=float)
    lo, hi = nu_range
    if np.any(nu < lo * (1 - 1e-12)) or np.any(nu > hi * (1 + 1e-12)):
        raise ValueError(f"viscosity outside [{lo:g}, {hi:g}]")
    llo, lhi = np.log(lo), np.log(hi)
    out = 2.0 * (np.log(nu) - llo) / (lhi - llo) - 1.0
    return float(out) if out.ndim == 0 else out


def unscale_viscosity(s, nu_range=(NU_MIN, NU_MAX)):
    s = np.asarray(s, dtype=float)
    llo, lhi = np.log(nu_range[0]), np.log(nu_range[1])
    out = np.exp(llo + (s + 1.0) * 0.5 * (lhi - llo))
    return float(out) if out.ndim == 0 else out


# -- point generation ------------------------------------------------------

def sobol_2d(n: int, skip_zero: bool = True) -> np.ndarray:
    """First ``n`` points of the unscrambled 2-D Sobol sequence in [0, 1)^2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = qmc.Sobol(d=2, scramble=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for non power-of-two n
        pts = sampler.random(n + 1 if skip_zero else n)
    return pts[1:] if skip_zero else pts


def nearest_node(target_x: float, mesh: Mesh) -> int:
    """Index of the node closest to ``target_x``; ties go to the lower index."""
    return int(np.argmin(np.abs(mesh.nodes - target_x)))


# -- FD provider -----------------------------------------------------------

class FdProvider:
    """Solves and caches FD solutions keyed by (n_nodes, nu).

    ``method`` is "rk3" or "euler" (pseudo-time) or "newton".
    """

    def __init__(self, method: str = "rk3", cfl: float = 0.4, tol: float = 1e-12,
                 max_iters: int = 50_000_000, log_base: str = "natural"):
        self.method = method
        self.cfl = cfl
        self.tol = tol
        self.max_iters = max_iters
        self.log_base = log_base
        self._cache: dict[tuple[int, float], FdSolution] = {}

    def solve(self, n_nodes: int, nu: float) -> FdSolution:
        key = (int(n_nodes), float(nu))
        if key not in self._cache:
            mesh = build_mesh(n_nodes)
            if self.method == "newton":
                sol = solve_steady_newton(mesh, nu, tol=self.tol, log_base=self.log_base)
            else:
                sol = solve_steady(mesh, nu, cfl=self.cfl, tol=self.tol, max_iters=self.max_iters,
                                   scheme=self.method, log_base=self.log_base)
            logger.info("FD n=%d nu=%g: %d iterations, residual %.2e", n_nodes, nu, sol.iterations, sol.final_residual)
            self._cache[key] = sol
        return self._cache[key]

    def add(self, solution: FdSolution) -> None:
        """Seed the cache with a solution computed elsewhere (e.g. loaded from disk)."""
        self._cache[(solution.mesh.n_nodes, float(solution.nu))] = solution

    def solutions(self) -> list[FdSolution]:
        return list(self._cache.values())


_default_provider: FdProvider | None = None


def default_provider() -> FdProvider:
    global _default_provider
    if _default_provider is None:
        _default_provider = FdProvider()
    return _default_provider


# -- datasets --------------------------------------------------------------

@dataclass
class LabeledPoints:
    x: np.ndarray
    nu: np.ndarray
    label: np.ndarray | None
    source_tag: str
    mode: str = "standard"

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def scaled_nu(self) -> np.ndarray:
        return scale_viscosity(self.nu) * np.ones_like(self.x)

    @property
    def inputs(self) -> np.ndarray:
        if self.mode == "standard":
            return self.x.reshape(-1, 1)
        return np.column_stack([self.x, self.scaled_nu])


@dataclass
class ScenarioDataset:
    mode: str
    tag: str
    collocation: LabeledPoints
    train: LabeledPoints
    test: LabeledPoints
    bc: LabeledPoints
    warmup_fake: LabeledPoints | None = None
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return 1 if self.mode == "standard" else 2

    def sizes(self) -> tuple[int, int, int, int]:
        return len(self.collocation), len(self.train), len(self.test), len(self.bc)

    def loss_terms(self, warmup: bool = False) -> LossTerms:
        data_pts, data_lab = self.train.inputs, self.train.label
        if warmup and self.warmup_fake is not None:
            data_pts = np.vstack([data_pts, self.warmup_fake.inputs])
            data_lab = np.concatenate([data_lab, self.warmup_fake.label])
        return LossTerms(
            col_points=self.collocation.inputs,
            col_nu=self.collocation.nu,
            data_points=data_pts,
            data_labels=data_lab,
            bc_points=self.bc.inputs,
            bc_labels=self.bc.label,
        )


def _labels(tag: str, x_targets: np.ndarray, nu: float, provider: FdProvider):
    """(x, labels) at the tag's mesh nodes nearest to ``x_targets``; Analytical keeps x as given."""
    if tag == "Analytical":
        return x_targets.copy(), np.asarray(eval_mms(x_targets, nu, provider.log_base), dtype=float)
    sol = provider.solve(CANONICAL_NODES[tag], nu)
    idx = np.array([nearest_node(t, sol.mesh) for t in x_targets])
    if np.max(np.abs(sol.mesh.nodes[idx] - x_targets)) > 0.5 * sol.mesh.dx + 1e-12:
        raise ValueError("label lookup fell off the mesh")
    return sol.mesh.nodes[idx].copy(), sol.values[idx].copy()


def _labeled(tag, xs, nus, provider, mode, source_tag=None) -> LabeledPoints:
    x_all, nu_all, lab_all = [], [], []
    for nu in nus:
        x, lab = _labels(tag, np.asarray(xs, dtype=float), nu, provider)
        x_all.append(x)
        nu_all.append(np.full(x.size, nu))
        lab_all.append(lab)
    return LabeledPoints(np.concatenate(x_all), np.concatenate(nu_all), np.concatenate(lab_all),
                         source_tag or tag, mode)


def build_scenario(mode: str, tag: str, seed: int = 0, provider: FdProvider | None = None) -> ScenarioDataset:
    """Assemble collocation, train, test and BC sets for one consistency scenario.

    Point layouts are fixed by construction; ``seed`` is recorded for
    provenance only. BC labels are always analytical.
    """
    tag = normalize_tag(tag)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    provider = provider or default_provider()
    lb = provider.log_base

    if mode == "standard":
        nu = STANDARD_NU
        xc = np.linspace(-1.0, 1.0, STANDARD_N_COLLOCATION)
        col = LabeledPoints(xc, np.full(xc.size, nu), None, "collocation", mode)
        train = _labeled(tag, STANDARD_TRAIN_X, [nu], provider, mode)
        test = _labeled(tag, STANDARD_TEST_X, [nu], provider, mode)
        bc = LabeledPoints(np.array([-1.0]), np.array([nu]), np.array([float(eval_mms(-1.0, nu, lb))]),
                           "Analytical", mode)
        return ScenarioDataset(mode, tag, col, train, test, bc, None, {"seed": seed})

    sob = sobol_2d(PARAMETRIC_N_COLLOCATION, skip_zero=True)
    col = LabeledPoints(2.0 * sob[:, 0] - 1.0, unscale_viscosity(2.0 * sob[:, 1] - 1.0), None, "collocation", mode)
    c1_nodes = build_mesh(CANONICAL_NODES["C1"]).nodes
    train = _labeled(tag, c1_nodes, PARAMETRIC_TRAIN_NU, provider, mode)
    test = _labeled(tag, c1_nodes, PARAMETRIC_TEST_NU, provider, mode)
    bc_nu = unscale_viscosity(np.linspace(-1.0, 1.0, PARAMETRIC_N_BC))
    bc = LabeledPoints(np.full(PARAMETRIC_N_BC, -1.0), bc_nu,
                       np.asarray(eval_mms(-1.0, bc_nu, lb), dtype=float), "Analytical", mode)
    # warm-up only: training labels re-attached to the held-out viscosities
    fake_nu = np.concatenate([np.full(c1_nodes.size, t) for t in PARAMETRIC_TEST_NU])
    fake = LabeledPoints(train.x.copy(), fake_nu, train.label.copy(), f"{tag}-fake", mode)
    return ScenarioDataset(mode, tag, col, train, test, bc, fake, {"seed": seed})


# -- metrics ---------------------------------------------------------------

def test_rmse(params: NetParams, dataset: ScenarioDataset) -> float:
    """RMSE between network predictions and the (possibly inconsistent) test labels."""
    if len(dataset.test) == 0:
        raise ValueError("empty test set")
    diff = dataset.test.label - forward(params, dataset.test.inputs)
    return float(np.sqrt(np.mean(diff * diff)))


test_rmse.__test__ = False  # not a pytest test


def evaluation_nodes(tag: str) -> np.ndarray:
    """Mesh nodes used for RMSE against the analytical field (C3 mesh for Analytical)."""
    tag = normalize_tag(tag)
    n = CANONICAL_NODES["C3" if tag == "Analytical" else tag]
    return build_mesh(n).nodes


def rmse_vs_analytic(params: NetParams, mode: str, nodes: np.ndarray, nu: float, log_base: str = "natural") -> float:
    if mode == "standard":
        inputs = nodes.reshape(-1, 1)
    else:
        inputs = np.column_stack([nodes, np.full(nodes.size, scale_viscosity(nu))])
    diff = forward(params, inputs) - eval_mms(nodes, nu, log_base)
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass
class EvalReport:
    tag: str
    mode: str
    test_rmse: float
    rmse_vs_analytic_at_nodes: dict[float, float]
    per_nu_curve: list[tuple[float, float]]
    numeric_vs_analytic_rmse: dict[float, float]

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "mode": self.mode,
            "test_rmse": self.test_rmse,
            "rmse_vs_analytic_at_nodes": {repr(k): v for k, v in self.rmse_vs_analytic_at_nodes.items()},
            "per_nu_curve": [[nu, r] for nu, r in self.per_nu_curve],
            "numeric_vs_analytic_rmse": {repr(k): v for k, v in self.numeric_vs_analytic_rmse.items()},
        }


def default_nu_grid(mode: str, n: int = 25) -> np.ndarray:
    if mode == "standard":
        return np.array([STANDARD_NU])
    return np.logspace(np.log10(NU_MIN), np.log10(NU_MAX), n)


def evaluate_vs_analytic(params: NetParams, dataset: ScenarioDataset, nu_grid=None, reference_nus=None,
                         provider: FdProvider | None = None) -> EvalReport:
    """Test RMSE plus RMSE against the analytical field over the tag's mesh nodes.

    The FD-vs-analytical companion column is computed at ``reference_nus``
    (default: nu = 1e-2 in standard mode, the six decades in parametric mode);
    it is empty for the Analytical tag.
    """
    provider = provider or default_provider()
    mode, tag = dataset.mode, dataset.tag
    nodes = evaluation_nodes(tag)
    grid = default_nu_grid(mode) if nu_grid is None else np.asarray(nu_grid, dtype=float)
    if reference_nus is None:
        reference_nus = (STANDARD_NU,) if mode == "standard" else DECADE_NUS
    curve = [(float(nu), rmse_vs_analytic(params, mode, nodes, nu, provider.log_base)) for nu in grid]
    at_nodes = {float(nu): rmse_vs_analytic(params, mode, nodes, nu, provider.log_base) for nu in reference_nus}
    numeric = {}
    if tag != "Analytical":
        for nu in reference_nus:
            numeric[float(nu)] = fd_rmse_vs_analytic(provider.solve(CANONICAL_NODES[tag], nu))
    return EvalReport(tag, mode, test_rmse(params, dataset), at_nodes, curve, numeric)
