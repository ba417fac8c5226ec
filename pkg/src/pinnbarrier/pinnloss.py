"""Loss terms, loss weightings and the effective-loss decomposition.

The trainable vector used by the optimizers is ``theta = [net params, log sigma_pde,
log sigma_bc, log sigma_d]``; the three log-sigma entries are only read by the
lbPINN weighting but are always present so every run shares one layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mms import residual_of_field
from .tapenet import NetParams, backward, check_finite, forward, forward_jet, forward_taped

N_SIGMA = 3  # (pde, bc, d)


@dataclass
class LossBreakdown:
    l_pde: float
    l_bc: float
    l_d: float
    total: float
    sigma: tuple[float, float, float] | None = None


@dataclass
class EffectiveLossParts:
    clean: float
    cross: float
    bias: float

    @property
    def effective(self) -> float:
        return self.clean + self.cross + self.bias


# -- individual terms ------------------------------------------------------

def pde_residual(params: NetParams, points, nu, log_base: str = "natural"):
    jet = forward_jet(params, points)
    x = jet.inputs[:, 0]
    return residual_of_field(jet.u, jet.u_x, jet.u_xx, x, nu, log_base), jet


def loss_pde(params: NetParams, collocation_points, nu_of_point, log_base: str = "natural") -> float:
    """Mean squared steady residual over the collocation points."""
    if len(collocation_points) == 0:
        raise ValueError("empty collocation set")
    r, _ = pde_residual(params, collocation_points, nu_of_point, log_base)
    return float(np.mean(r * r))


def loss_data(params: NetParams, points, labels) -> float:
    labels = np.asarray(labels, dtype=float)
    if labels.size == 0:
        raise ValueError("empty labeled set")
    diff = labels - forward(params, points)
    return float(np.mean(diff * diff))


def loss_bc(params: NetParams, bc_points, bc_labels) -> float:
    return loss_data(params, bc_points, bc_labels)


# -- scalarizations --------------------------------------------------------

def total_fixed(alpha: float, l_pde: float, l_bc: float, l_d: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * l_pde + (1.0 - alpha) * (l_d + l_bc)


def total_lbpinn(log_sigmas, l_pde: float, l_bc: float, l_d: float) -> float:
    s = np.asarray(log_sigmas, dtype=float)
    losses = np.array([l_pde, l_bc, l_d])
    return float(np.sum(0.5 * np.exp(-2.0 * s) * losses) + np.sum(s))


@dataclass(frozen=True)
class Weighting:
    """Loss weighting: ``kind`` is "fixed" (uses ``alpha``) or "lbpinn"."""

    kind: str
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in ("fixed", "lbpinn"):
            raise ValueError(f"unknown weighting {self.kind!r}")
        if self.kind == "fixed" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def fixed(cls, alpha: float) -> "Weighting":
        return cls("fixed", float(alpha))

    @classmethod
    def lbpinn(cls) -> "Weighting":
        return cls("lbpinn")

    @property
    def label(self) -> str:
        return "lbpinn" if self.kind == "lbpinn" else repr(self.alpha)


def combine(weighting: Weighting, log_sigmas, l_pde, l_bc, l_d, warmup: bool = False):
    """Total loss, per-term weights (w_pde, w_bc, w_d), and d total / d log_sigma.

    Warm-up masks the PDE term (1/sigma_pde^2 = 0) and freezes sigma_bc = sigma_d = 1,
    so the total is (l_bc + l_d) / 2 and the log-sigma gradient is zero.
    """
    if warmup:
        w = np.array([0.0, 0.5, 0.5])
        return 0.5 * (l_bc + l_d), w, np.zeros(N_SIGMA)
    if weighting.kind == "fixed":
        a = weighting.alpha
        w = np.array([a, 1.0 - a, 1.0 - a])
        return total_fixed(a, l_pde, l_bc, l_d), w, np.zeros(N_SIGMA)
    s = np.asarray(log_sigmas, dtype=float)
    w = 0.5 * np.exp(-2.0 * s)
    losses = np.array([l_pde, l_bc, l_d])
    return total_lbpinn(s, l_pde, l_bc, l_d), w, 1.0 - 2.0 * w * losses


# -- decomposition diagnostic ---------------------------------------------

def effective_decomposition(params: NetParams, points, true_labels, noisy_labels) -> EffectiveLossParts:
    """Split mean (noisy - u_theta)^2 into clean, cross and bias parts."""
    true_labels = np.asarray(true_labels, dtype=float)
    noisy_labels = np.asarray(noisy_labels, dtype=float)
    if true_labels.shape != noisy_labels.shape:
        raise ValueError("true and noisy label arrays differ in length")
    pred = forward(params, points)
    if pred.shape != true_labels.shape:
        raise ValueError("labels are not aligned with points")
    miss = true_labels - pred
    eps = noisy_labels - true_labels
    return EffectiveLossParts(
        clean=float(np.mean(miss * miss)),
        cross=float(np.mean(2.0 * eps * miss)),
        bias=float(np.mean(eps * eps)),
    )


# -- full objective with gradient -----------------------------------------

@dataclass
class LossTerms:
    """Point sets for one objective evaluation. ``col_nu`` is per collocation point."""

    col_points: np.ndarray
    col_nu: np.ndarray
    data_points: np.ndarray
    data_labels: np.ndarray
    bc_points: np.ndarray
    bc_labels: np.ndarray


def split_theta(theta: np.ndarray, n_net: int):
    return theta[:n_net], theta[n_net:n_net + N_SIGMA]


def loss_and_grad(theta, layer_sizes, terms: LossTerms, weighting: Weighting, warmup: bool = False,
                  log_base: str = "natural", want_parts: bool = False):
    """Weighted total and its gradient with respect to ``theta``.

    With ``want_parts`` the unweighted per-term gradients are also returned
    as ``(g_pde, g_bc, g_d)`` over the network parameters.
    """
    n_net = theta.size - N_SIGMA
    net_theta, log_sigmas = split_theta(theta, n_net)
    params = NetParams.from_flat(layer_sizes, net_theta)

    # PDE term (skipped entirely when masked, so no PDE path can leak into the gradient)
    skip_pde = warmup and not want_parts
    if skip_pde:
        l_pde, g_pde = float("nan"), np.zeros(n_net)
    else:
        r, jet = pde_residual(params, terms.col_points, terms.col_nu, log_base)
        m = r.size
        l_pde = float(np.mean(r * r))
        c = 2.0 * r / m
        g_pde = backward(params, jet, c * jet.u_x, c * jet.u, -c * terms.col_nu, check=False)

    l_bc, g_bc = _mse_and_grad(params, terms.bc_points, terms.bc_labels)
    l_d, g_d = _mse_and_grad(params, terms.data_points, terms.data_labels)

    total, w, g_sigma = combine(weighting, log_sigmas, 0.0 if skip_pde else l_pde, l_bc, l_d, warmup)
    g_net = w[1] * g_bc + w[2] * g_d
    if w[0] != 0.0:
        g_net = g_net + w[0] * g_pde
    grad = np.concatenate([g_net, g_sigma])
    check_finite(grad)
    sigma = tuple(float(v) for v in np.exp(log_sigmas)) if weighting.kind == "lbpinn" else None
    if warmup:
        sigma = (1.0, 1.0, 1.0) if weighting.kind == "lbpinn" else None
    breakdown = LossBreakdown(l_pde=l_pde, l_bc=l_bc, l_d=l_d, total=float(total), sigma=sigma)
    if want_parts:
        return float(total), grad, breakdown, (g_pde, g_bc, g_d)
    return float(total), grad, breakdown


def _mse_and_grad(params: NetParams, points, labels):
    tape = forward_taped(params, points)
    diff = tape.u - np.asarray(labels, dtype=float)
    g = backward(params, tape, 2.0 * diff / diff.size, check=False)
    return float(np.mean(diff * diff)), g
