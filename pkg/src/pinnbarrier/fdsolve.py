"""Finite-difference steady-state solver for the forced Burgers equation.

Convection uses second-order upwind differences (first-order at the node next
to the inflow), diffusion second-order central differences, with a one-sided
second-order diffusion stencil at the free outflow node. The discrete system
is driven to steady state by explicit pseudo-time stepping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mms import eval_mms, source_term

logger = logging.getLogger(__name__)

CANONICAL_NODES = {"C1": 81, "C2": 641, "C3": 7121}
SCHEMES = ("rk3", "euler")
INITS = ("mms", "inflow")

# Residual max-norm is floored at this multiple of the estimated round-off
# level; below it, the stopping test is decided by rounding noise.
NOISE_FLOOR_FACTOR = 10.0


class FdSolverError(RuntimeError):
    pass


class NonConvergence(FdSolverError):
    pass


class Divergence(FdSolverError):
    pass


@dataclass(frozen=True)
class Mesh:
    n_nodes: int
    nodes: np.ndarray
    dx: float


@dataclass
class FdSolution:
    mesh: Mesh
    nu: float
    values: np.ndarray
    iterations: int
    final_residual: float
    tol: float
    log_base: str = "natural"
    method: str = "rk3"


class LabelErrors(NamedTuple):
    locations: np.ndarray
    epsilon: np.ndarray


def build_mesh(n_nodes: int) -> Mesh:
    n_nodes = int(n_nodes)
    if n_nodes < 5:
        raise ValueError("mesh needs at least 5 nodes for the outflow closure")
    nodes = np.linspace(-1.0, 1.0, n_nodes)
    return Mesh(n_nodes=n_nodes, nodes=nodes, dx=2.0 / (n_nodes - 1))


def spatial_residual(values, mesh: Mesh, nu: float, source=None, log_base: str = "natural"):
    """Discrete steady residual R_i at every node (R_0 = 0 at the Dirichlet node).

    ``source`` defaults to the manufactured forcing at the mesh nodes; pass an
    array (e.g. zeros) to override it.
    """
    u = np.asarray(values, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ValueError(f"values has shape {u.shape}, mesh has {mesh.n_nodes} nodes")
    if source is None:
        source = source_term(mesh.nodes, nu, log_base)
    dx = mesh.dx
    R = np.zeros_like(u)
    conv = np.empty_like(u)
    diff = np.empty_like(u)
    conv[1] = (u[1] - u[0]) / dx
    conv[2:] = (3.0 * u[2:] - 4.0 * u[1:-1] + u[:-2]) / (2.0 * dx)
    diff[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    diff[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / dx**2
    R[1:] = u[1:] * conv[1:] - nu * diff[1:] - source[1:]
    return R


@numba.njit(cache=True)
def _residual_kernel(u, S, dx, nu, R):
    n = u.shape[0]
    inv2dx = 1.0 / (2.0 * dx)
    invdx2 = 1.0 / (dx * dx)
    R[0] = 0.0
    R[1] = u[1] * (u[1] - u[0]) / dx - nu * (u[2] - 2.0 * u[1] + u[0]) * invdx2 - S[1]
    for i in range(2, n - 1):
        R[i] = (
            u[i] * (3.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) * inv2dx
            - nu * (u[i + 1] - 2.0 * u[i] + u[i - 1]) * invdx2
            - S[i]
        )
    j = n - 1
    R[j] = (
        u[j] * (3.0 * u[j] - 4.0 * u[j - 1] + u[j - 2]) * inv2dx
        - nu * (2.0 * u[j] - 5.0 * u[j - 1] + 4.0 * u[j - 2] - u[j - 3]) * invdx2
        - S[j]
    )


@numba.njit(cache=True)
def _max_abs_interior(R):
    # returns -1 on a non-finite entry
    m = 0.0
    for i in range(1, R.shape[0]):
        a = abs(R[i])
        if not a < np.inf:
            return -1.0
        if a > m:
            m = a
    return m


@numba.njit(cache=True)
def _time_step(u, dx, nu, cfl):
    umax = 0.0
    for i in range(u.shape[0]):
        a = abs(u[i])
        if a > umax:
            umax = a
    return cfl * min(dx / umax, dx * dx / (2.0 * nu))


@numba.njit(cache=True)
def _pseudo_time_loop(u, S, dx, nu, cfl, tol, max_iters, rk3):
    """Iterate in place. Returns (iterations, residual); residual -1 means blow-up."""
    n = u.shape[0]
    R = np.zeros(n)
    u1 = u.copy()
    u2 = u.copy()
    rmax = np.inf
    for it in range(max_iters):
        _residual_kernel(u, S, dx, nu, R)
        rmax = _max_abs_interior(R)
        if rmax < 0.0:
            return it, -1.0
        if rmax < tol:
            return it, rmax
        dt = _time_step(u, dx, nu, cfl)
        if not rk3:
            for i in range(1, n):
                u[i] -= dt * R[i]
            continue
        for i in range(1, n):
            u1[i] = u[i] - dt * R[i]
        _residual_kernel(u1, S, dx, nu, R)
        for i in range(1, n):
            u2[i] = 0.75 * u[i] + 0.25 * (u1[i] - dt * R[i])
        _residual_kernel(u2, S, dx, nu, R)
        for i in range(1, n):
            u[i] = u[i] / 3.0 + (2.0 / 3.0) * (u2[i] - dt * R[i])
    _residual_kernel(u, S, dx, nu, R)
    return max_iters, _max_abs_interior(R)


def residual_noise_floor(mesh: Mesh, nu: float, values, source) -> float:
    """Round-off level of the max-norm residual for fields of this magnitude."""
    umax = float(np.max(np.abs(values)))
    smax = float(np.max(np.abs(source)))
    scale = 4.0 * umax**2 / mesh.dx + 4.0 * nu * umax / mesh.dx**2 + smax
    return np.finfo(float).eps * scale


def pseudo_time_step(solution: FdSolution, cfl: float = 0.4):
    """One explicit Euler sweep from a solution; returns (new_values, dt)."""
    mesh, nu = solution.mesh, solution.nu
    S = source_term(mesh.nodes, nu, solution.log_base)
    u = solution.values.copy()
    R = np.zeros_like(u)
    _residual_kernel(u, S, mesh.dx, nu, R)
    dt = _time_step(u, mesh.dx, nu, cfl)
    u[1:] -= dt * R[1:]
    return u, dt


def solve_steady(
    mesh: Mesh,
    nu: float,
    cfl: float = 0.4,
    tol: float = 1e-12,
    max_iters: int = 50_000_000,
    scheme: str = "rk3",
    init: str = "mms",
    log_base: str = "natural",
) -> FdSolution:
    """March the discrete equations in pseudo-time until max |R_i| < tol.

    The effective tolerance is ``max(tol, 10 * round-off floor)``: on fine
    meshes the residual cannot be driven below ~eps * u^2 / dx^2 scales.
    The inflow node stays pinned to the manufactured boundary value.
    """
    if not 0.0 < cfl < 1.0:
        raise ValueError("cfl must lie in (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if init not in INITS:
        raise ValueError(f"unknown init {init!r}")

    x = mesh.nodes
    S = source_term(x, nu, log_base)
    u_bc = float(eval_mms(-1.0, nu, log_base))
    if init == "mms":
        u = np.asarray(eval_mms(x, nu, log_base), dtype=float).copy()
    else:
        u = np.full(mesh.n_nodes, u_bc)
    u[0] = u_bc

    floor = residual_noise_floor(mesh, nu, eval_mms(x, nu, log_base), S)
    tol_eff = max(tol, NOISE_FLOOR_FACTOR * floor)
    iters, res = _pseudo_time_loop(u, S, mesh.dx, float(nu), float(cfl), tol_eff, int(max_iters), scheme == "rk3")
    if res < 0.0 or not np.all(np.isfinite(u)):
        raise Divergence(f"non-finite field after {iters} sweeps (n={mesh.n_nodes}, nu={nu:g}, {scheme})")
    if res >= tol_eff:
        raise NonConvergence(
            f"residual {res:.3e} above tol {tol_eff:.3e} after {iters} sweeps (n={mesh.n_nodes}, nu={nu:g})"
        )
    logger.debug("fd solve n=%d nu=%g: %d sweeps, residual %.3e", mesh.n_nodes, nu, iters, res)
    return FdSolution(mesh=mesh, nu=float(nu), values=u, iterations=int(iters), final_residual=float(res),
                      tol=tol_eff, log_base=log_base, method=scheme)


def residual_jacobian(values, mesh: Mesh, nu: float):
    """Sparse Jacobian dR/du of :func:`spatial_residual`; row 0 is the identity (Dirichlet)."""
    u = np.asarray(values, dtype=float)
    n, dx = mesh.n_nodes, mesh.dx
    rows, cols, vals = [0], [0], [1.0]

    def add(r, c, v):
        rows.extend(np.atleast_1d(r).tolist())
        cols.extend(np.atleast_1d(c).tolist())
        vals.extend(np.atleast_1d(v).tolist())

    d2 = nu / dx**2
    add(1, 0, -u[1] / dx - d2)
    add(1, 1, (2.0 * u[1] - u[0]) / dx + 2.0 * d2)
    add(1, 2, -d2)
    i = np.arange(2, n - 1)
    add(i, i - 2, u[i] / (2.0 * dx))
    add(i, i - 1, -2.0 * u[i] / dx - d2)
    add(i, i, (6.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / (2.0 * dx) + 2.0 * d2)
    add(i, i + 1, np.full(i.shape, -d2))
    j = n - 1
    add(j, j - 3, d2)
    add(j, j - 2, u[j] / (2.0 * dx) - 4.0 * d2)
    add(j, j - 1, -2.0 * u[j] / dx + 5.0 * d2)
    add(j, j, (6.0 * u[j] - 4.0 * u[j - 1] + u[j - 2]) / (2.0 * dx) - 2.0 * d2)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def solve_steady_newton(mesh: Mesh, nu: float, tol: float = 1e-12, max_iters: int = 50,
                        log_base: str = "natural") -> FdSolution:
    """Newton's method on the same discrete system; reaches the same fixed point."""
    x = mesh.nodes
    S = source_term(x, nu, log_base)
    u = np.asarray(eval_mms(x, nu, log_base), dtype=float).copy()
    u[0] = float(eval_mms(-1.0, nu, log_base))
    tol_eff = max(tol, NOISE_FLOOR_FACTOR * residual_noise_floor(mesh, nu, u, S))
    best = np.inf
    for it in range(max_iters + 1):
        R = spatial_residual(u, mesh, nu, S)
        res = float(np.max(np.abs(R[1:])))
        if not np.isfinite(res):
            raise Divergence(f"Newton iterate became non-finite (n={mesh.n_nodes}, nu={nu:g})")
        if res < tol_eff:
            return FdSolution(mesh=mesh, nu=float(nu), values=u, iterations=it, final_residual=res,
                              tol=tol_eff, log_base=log_base, method="newton")
        if it >= 3 and res >= best:
            break
        best = min(best, res)
        u = u - spla.spsolve(residual_jacobian(u, mesh, nu).tocsc(), R)
    raise NonConvergence(f"Newton stalled at residual {res:.3e} (tol {tol_eff:.3e})")


def label_errors(solution: FdSolution) -> LabelErrors:
    x = solution.mesh.nodes
    eps = solution.values - eval_mms(x, solution.nu, solution.log_base)
    return LabelErrors(locations=x, epsilon=eps)


def rmse_vs_analytic(solution: FdSolution) -> float:
    eps = label_errors(solution).epsilon
    return float(np.sqrt(np.mean(eps**2)))


def observed_order(err_coarse: float, err_fine: float, dx_coarse: float, dx_fine: float) -> float:
    return float(np.log(err_coarse / err_fine) / np.log(dx_coarse / dx_fine))
