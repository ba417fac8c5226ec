"""AdamW, L-BFGS and the warm-up -> AdamW -> L-BFGS training schedule."""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .pinnloss import N_SIGMA, LossTerms, Weighting, loss_and_grad
from .tapenet import NetParams, NumericFault, init_params, preset_layer_sizes

logger = logging.getLogger(__name__)


# -- AdamW -----------------------------------------------------------------

@dataclass
class AdamWState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


class AdamW:
    """Adam with decoupled weight decay.

    ``decay_mask`` selects the entries that receive weight decay (all by default).
    ``lr`` may be a scalar or a per-entry array.
    """

    def __init__(self, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4, decay_mask=None):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decay_mask = decay_mask
        self.state: AdamWState | None = None

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(grad)):
            bad = int(np.flatnonzero(~np.isfinite(grad))[0])
            raise NumericFault(f"non-finite gradient entry at parameter {bad}", index=bad)
        if self.state is None:
            self.state = AdamWState(m=np.zeros_like(theta), v=np.zeros_like(theta))
        st = self.state
        st.step += 1
        st.m = self.beta1 * st.m + (1.0 - self.beta1) * grad
        st.v = self.beta2 * st.v + (1.0 - self.beta2) * grad * grad
        m_hat = st.m / (1.0 - self.beta1**st.step)
        v_hat = st.v / (1.0 - self.beta2**st.step)
        if self.weight_decay:
            shrink = self.lr * self.weight_decay
            if self.decay_mask is None:
                theta = theta * (1.0 - shrink)
            else:
                theta = np.where(self.decay_mask, theta * (1.0 - shrink), theta)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adamw_step(state: AdamW, params: np.ndarray, grad: np.ndarray, lr=None, wd=None) -> np.ndarray:
    if lr is not None:
        state.lr = lr
    if wd is not None:
        state.weight_decay = wd
    return state.step(params, grad)


# -- L-BFGS ----------------------------------------------------------------

class LineSearchFailure(RuntimeError):
    pass


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga), (b, fb, gb); None if ill-posed."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0.0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0.0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def strong_wolfe(fun, x, f0, g0, d, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=20, alpha_max=1e10):
    """Bracketing/zoom search for a step satisfying the strong Wolfe conditions.

    ``fun(x) -> (f, g)``. Returns ``(alpha, f, g, n_evals)``; raises
    :class:`LineSearchFailure` when no acceptable step is found within ``max_evals``.
    """
    dg0 = float(g0 @ d)
    if not dg0 < 0.0:
        raise LineSearchFailure("not a descent direction")
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = fun(x + a * d)
        return f, g, float(g @ d)

    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = alpha0
    lo = hi = None
    while evals < max_evals:
        f, g, dg = phi(a)
        if not np.isfinite(f) or f > f0 + c1 * a * dg0 or (lo is None and a_prev > 0 and f >= f_prev):
            lo = (a_prev, f_prev, dg_prev)
            hi = (a, f, dg)
            break
        if abs(dg) <= -c2 * dg0:
            return a, f, g, evals
        if dg >= 0.0:
            lo = (a, f, dg)
            hi = (a_prev, f_prev, dg_prev)
            break
        a_prev, f_prev, dg_prev = a, f, dg
        a = min(2.0 * a, alpha_max)
    else:
        raise LineSearchFailure("bracketing phase exhausted")

    # zoom: lo always satisfies sufficient decrease with the lowest f seen
    while evals < max_evals:
        (al, fl, gl), (ah, fh, gh) = lo, hi
        if not np.isfinite(fh):
            a = 0.5 * (al + ah)
        else:
            a = _cubic_min(al, fl, gl, ah, fh, gh)
            lo_b, hi_b = min(al, ah), max(al, ah)
            width = hi_b - lo_b
            if a is None or not (lo_b + 0.1 * width <= a <= hi_b - 0.1 * width):
                a = 0.5 * (al + ah)
        if abs(ah - al) < 1e-16 * max(1.0, abs(al)):
            break
        f, g, dg = phi(a)
        if not np.isfinite(f) or f > f0 + c1 * a * dg0 or f >= fl:
            hi = (a, f, dg)
        else:
            if abs(dg) <= -c2 * dg0:
                return a, f, g, evals
            if dg * (ah - al) >= 0.0:
                hi = lo
            lo = (a, f, dg)
    raise LineSearchFailure("zoom phase exhausted")


@dataclass
class LbfgsInfo:
    f: float
    accepted: bool = True
    fallback: bool = False
    stored_pair: bool = False
    converged: bool = False
    evals: int = 0


class LBFGS:
    """Limited-memory BFGS with a strong-Wolfe line search."""

    def __init__(self, memory=10, c1=1e-4, c2=0.9, max_ls=20, curvature_eps=1e-10, max_failures=3):
        self.memory = memory
        self.c1, self.c2 = c1, c2
        self.max_ls = max_ls
        self.curvature_eps = curvature_eps
        self.max_failures = max_failures
        self.pairs: deque = deque(maxlen=memory)
        self.failures = 0
        self.n_iter = 0

    def reset(self):
        self.pairs.clear()

    def direction(self, g: np.ndarray) -> np.ndarray:
        """Two-loop recursion: returns -H g."""
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= float(s @ y) / float(y @ y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return -q

    def _store(self, s, y) -> bool:
        sy = float(s @ y)
        if sy > self.curvature_eps * np.linalg.norm(s) * np.linalg.norm(y):
            self.pairs.append((s, y, 1.0 / sy))
            return True
        return False

    def step(self, theta, f, g, fun: Callable):
        """One iteration from (theta, f, g). Returns (theta, f, g, LbfgsInfo).

        After ``max_failures`` consecutive line-search failures the caller should
        stop; :attr:`terminated` reports this.
        """
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            return theta, f, g, LbfgsInfo(f=f, accepted=False, converged=True)
        self.n_iter += 1
        fallback = False
        d = self.direction(g) if self.pairs else -g
        alpha0 = 1.0 if self.pairs else min(1.0, 1.0 / gnorm)
        try:
            if not float(g @ d) < 0.0:
                raise LineSearchFailure("not a descent direction")
            alpha, f_new, g_new, evals = strong_wolfe(fun, theta, f, g, d, alpha0, self.c1, self.c2, self.max_ls)
        except LineSearchFailure:
            self.reset()
            fallback = True
            d = -g
            alpha, f_new, g_new, evals = _backtrack(fun, theta, f, g, d, min(1.0, 1.0 / gnorm), self.c1, self.max_ls)
            if alpha is None:
                self.failures += 1
                return theta, f, g, LbfgsInfo(f=f, accepted=False, fallback=True, evals=evals)
        self.failures = 0
        s = alpha * d
        stored = self._store(s, g_new - g)
        return theta + s, f_new, g_new, LbfgsInfo(f=f_new, fallback=fallback, stored_pair=stored, evals=evals)

    @property
    def terminated(self) -> bool:
        return self.failures >= self.max_failures


def _backtrack(fun, x, f0, g0, d, alpha, c1, max_evals):
    dg0 = float(g0 @ d)
    for k in range(max_evals):
        f, g = fun(x + alpha * d)
        if np.isfinite(f) and f <= f0 + c1 * alpha * dg0:
            return alpha, f, g, k + 1
        alpha *= 0.5
    return None, f0, g0, max_evals


def lbfgs_step(state: LBFGS, params, loss_fn, f=None, g=None):
    if f is None or g is None:
        f, g = loss_fn(params)
    return state.step(params, f, g, loss_fn)


def minimize_lbfgs(fun, x0, max_iters=100, gtol=1e-12, **kw):
    """Run L-BFGS until the gradient norm drops below ``gtol``. Returns (x, f, g, n_iters)."""
    opt = LBFGS(**kw)
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    it = 0
    for it in range(1, max_iters + 1):
        if np.linalg.norm(g) < gtol:
            return x, f, g, it - 1
        x, f, g, info = opt.step(x, f, g, fun)
        if info.converged or opt.terminated:
            break
    return x, f, g, it


# -- training schedule -----------------------------------------------------

@dataclass
class Schedule:
    warmup_epochs: int
    adamw_epochs: int
    lbfgs_epochs: int
    batch_size: int
    record_stride: int

    @classmethod
    def preset(cls, name: str) -> "Schedule":
        presets = {
            "standard": cls(50, 2000, 3000, 500, 60),
            "parametric": cls(500, 20000, 160000, 120, 400),
        }
        return presets[name]


@dataclass
class AdamWConfig:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    sigma_lr: float | None = None  # learning rate of the log-sigma entries; None -> lr
    warmup_lr: float | None = None  # None -> lr


@dataclass
class LbfgsConfig:
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_ls: int = 20


TRACE_COLUMNS = ("iter", "phase", "l_pde", "l_bc", "l_d", "sigma_pde", "sigma_bc", "sigma_d", "test_rmse")


@dataclass
class RunRecord:
    layer_sizes: list[int]
    weighting: Weighting
    trace: list[dict] = field(default_factory=list)
    theta: np.ndarray | None = None
    termination: str = "completed"
    iterations: int = 0
    wall_time: float = 0.0

    @property
    def params(self) -> NetParams:
        return NetParams.from_flat(self.layer_sizes, self.theta[:-N_SIGMA])

    @property
    def log_sigmas(self) -> np.ndarray:
        return self.theta[-N_SIGMA:]

    @property
    def final(self) -> dict:
        return self.trace[-1]

    def summary(self) -> dict:
        last = self.final
        return {
            "weighting": self.weighting.label,
            "layer_sizes": list(self.layer_sizes),
            "iterations": self.iterations,
            "termination": self.termination,
            "final": {k: last[k] for k in TRACE_COLUMNS if k not in ("iter", "phase")},
        }


def batches_per_epoch(n_points: int, batch_size: int) -> int:
    return -(-n_points // batch_size)


def run_schedule(dataset, schedule: Schedule, seed: int, weighting: Weighting, layer_sizes=None,
                 adamw: AdamWConfig | None = None, lbfgs: LbfgsConfig | None = None,
                 log_base: str = "natural", on_record: Callable | None = None) -> RunRecord:
    """Warm-up (PDE masked) -> AdamW on the weighted loss -> full-batch L-BFGS.

    AdamW mini-batches partition the collocation set only; every step sees the
    full data and BC sets. One trace row (full-batch losses, sigmas, test RMSE)
    is recorded every ``schedule.record_stride`` iterations, at every phase
    boundary and at the end.
    """
    from .scenarios import test_rmse  # noqa: PLC0415  (scenarios imports nothing from here)

    adamw = adamw or AdamWConfig()
    lbfgs = lbfgs or LbfgsConfig()
    input_dim = dataset.input_dim
    if layer_sizes is None:
        layer_sizes = preset_layer_sizes("desk", input_dim)
    layer_sizes = [int(s) for s in layer_sizes]
    if layer_sizes[0] != input_dim:
        raise ValueError(f"network input_dim {layer_sizes[0]} does not match {dataset.mode} dataset ({input_dim})")

    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    net = init_params(layer_sizes, seed)
    n_net = net.n_params
    theta = np.concatenate([net.flat(), np.zeros(N_SIGMA)])
    record = RunRecord(layer_sizes=layer_sizes, weighting=weighting)

    full = dataset.loss_terms()
    warm = dataset.loss_terms(warmup=True)

    def full_eval(th, warmup=False):
        return loss_and_grad(th, layer_sizes, warm if warmup else full, weighting, warmup=warmup, log_base=log_base)

    def add_record(it, phase, th, warmup=False):
        _, _, br = loss_and_grad(th, layer_sizes, full, weighting, log_base=log_base)
        sig = (1.0, 1.0, 1.0) if (warmup or weighting.kind != "lbpinn") else tuple(np.exp(th[n_net:]))
        row = {
            "iter": it, "phase": phase, "l_pde": br.l_pde, "l_bc": br.l_bc, "l_d": br.l_d,
            "sigma_pde": float(sig[0]), "sigma_bc": float(sig[1]), "sigma_d": float(sig[2]),
            "test_rmse": test_rmse(NetParams.from_flat(layer_sizes, th[:n_net]), dataset),
        }
        record.trace.append(row)
        if on_record is not None:
            on_record(row)

    it = 0
    phase = "init"
    col = full.col_points
    n_col = col.shape[0]
    bs = schedule.batch_size

    # warm-up and AdamW share the mini-batch loop; sigma is frozen (zero grad) in warm-up
    decay_mask = np.zeros(theta.size, dtype=bool)
    decay_mask[:n_net] = True
    try:
        add_record(it, phase, theta, warmup=True)
        for phase, epochs in (("warmup", schedule.warmup_epochs), ("adamw", schedule.adamw_epochs)):
            is_warm = phase == "warmup"
            lr = np.full(theta.size, adamw.warmup_lr if (is_warm and adamw.warmup_lr is not None) else adamw.lr)
            if adamw.sigma_lr is not None:
                lr[n_net:] = adamw.sigma_lr
            opt = AdamW(lr, tuple(adamw.betas), adamw.eps, adamw.weight_decay, decay_mask)
            terms = warm if is_warm else full
            for _ in range(epochs):
                perm = rng.permutation(n_col)
                for start in range(0, n_col, bs):
                    idx = perm[start:start + bs]
                    batch = LossTerms(col[idx], terms.col_nu[idx], terms.data_points, terms.data_labels,
                                      terms.bc_points, terms.bc_labels)
                    _, g, _ = loss_and_grad(theta, layer_sizes, batch, weighting, warmup=is_warm, log_base=log_base)
                    theta = opt.step(theta, g)
                    it += 1
                    if it % schedule.record_stride == 0:
                        add_record(it, phase, theta, warmup=is_warm)
            if epochs and (not record.trace or record.trace[-1]["iter"] != it):
                add_record(it, phase, theta, warmup=is_warm)

        if schedule.lbfgs_epochs:
            phase = "lbfgs"
            opt_l = LBFGS(memory=lbfgs.memory, c1=lbfgs.c1, c2=lbfgs.c2, max_ls=lbfgs.max_ls)

            def fun(th):
                # an overflowing trial point is a rejected step, not a fault
                try:
                    with np.errstate(over="ignore", invalid="ignore"):
                        f, g, _ = full_eval(th)
                except NumericFault:
                    return math.inf, np.full(th.size, np.nan)
                return f, g

            f, g, _ = full_eval(theta)
            for _ in range(schedule.lbfgs_epochs):
                theta, f, g, info = opt_l.step(theta, f, g, fun)
                if info.converged:
                    record.termination = "lbfgs_converged"
                    break
                if opt_l.terminated:
                    record.termination = "lbfgs_line_search_failure"
                    logger.info("L-BFGS stopped after repeated line-search failures at iteration %d", it)
                    break
                it += 1
                if it % schedule.record_stride == 0:
                    add_record(it, "lbfgs", theta)
            if record.trace[-1]["iter"] != it or record.trace[-1]["phase"] != "lbfgs":
                add_record(it, "lbfgs", theta)
    except NumericFault as exc:
        exc.phase, exc.iteration = phase, it
        raise

    record.theta = theta
    record.iterations = it
    record.wall_time = time.perf_counter() - t_start
    return record


def schedule_dict(schedule: Schedule) -> dict:
    return asdict(schedule)
