"""Manufactured steady solution of the forced viscous Burgers equation.

The field

    u(x; nu) = sin(2 pi x) + 0.5 L sin(6 pi x) + L + 2,   L = log(1 / nu)

is an exact steady solution of ``u u_x = nu u_xx + S(x, nu)`` once the
forcing ``S = u u_x - nu u_xx`` is added. Every function here accepts
scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_BASES = ("natural", "base10")

NU_MIN = 1e-6
NU_MAX = 1e-1

_TWO_PI = 2.0 * np.pi
_SIX_PI = 6.0 * np.pi


def log_inv_nu(nu, log_base: str = "natural"):
    """Return log(1/nu) in the configured base."""
    if log_base == "natural":
        return -np.log(nu)
    if log_base == "base10":
        return -np.log10(nu)
    raise ValueError(f"unknown log base {log_base!r}; expected one of {LOG_BASES}")


def _check_nu(nu):
    if np.any(np.asarray(nu) <= 0):
        raise ValueError("viscosity must be positive")


@dataclass(frozen=True)
class MmsEval:
    u: np.ndarray | float
    du: np.ndarray | float
    d2u: np.ndarray | float
    source: np.ndarray | float


def eval_mms(x, nu, log_base: str = "natural"):
    """Manufactured field value at ``x`` for viscosity ``nu``."""
    _check_nu(nu)
    L = log_inv_nu(nu, log_base)
    return np.sin(_TWO_PI * x) + 0.5 * L * np.sin(_SIX_PI * x) + L + 2.0


def eval_mms_derivs(x, nu, log_base: str = "natural") -> MmsEval:
    """Field, first and second x-derivatives, and the forcing term.

    Derivatives are the closed-form ones; the forcing is defined from them so
    that the steady residual of the exact triple vanishes identically.
    """
    _check_nu(nu)
    L = log_inv_nu(nu, log_base)
    s2, c2 = np.sin(_TWO_PI * x), np.cos(_TWO_PI * x)
    s6, c6 = np.sin(_SIX_PI * x), np.cos(_SIX_PI * x)
    u = s2 + 0.5 * L * s6 + L + 2.0
    du = _TWO_PI * c2 + 3.0 * np.pi * L * c6
    d2u = -4.0 * np.pi**2 * s2 - 18.0 * np.pi**2 * L * s6
    source = u * du - nu * d2u
    return MmsEval(u=u, du=du, d2u=d2u, source=source)


def source_term(x, nu, log_base: str = "natural"):
    return eval_mms_derivs(x, nu, log_base).source


def residual_of_field(u, du, d2u, x, nu, log_base: str = "natural"):
    """Steady Burgers residual ``u du - nu d2u - S(x, nu)``."""
    return u * du - nu * d2u - source_term(x, nu, log_base)


def min_bound(nu, log_base: str = "natural"):
    """Lower bound ``0.5 L + 1`` of the field over [-1, 1] (each sine >= -1)."""
    return 0.5 * log_inv_nu(nu, log_base) + 1.0
