"""Normalized complex generalized Gaussian distribution (zero mean, unit variance).

Writing ``s = x + iy`` the density is

    p(s) = alpha*rho / (pi*Gamma(1/alpha)*sqrt(1-gamma^2))
           * exp(-[rho*(x^2/(1+gamma) + y^2/(1-gamma))]^alpha)

with ``rho = Gamma(2/alpha)/Gamma(1/alpha)``. ``alpha`` is the shape (1 is
Gaussian, < 1 super-Gaussian, > 1 sub-Gaussian) and ``gamma`` the
non-circularity, which equals the pseudo-variance ``E[s^2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParams, ScoreSingularity

#: Below this modulus the super-Gaussian score is treated as singular.
SCORE_SINGULAR_RADIUS = 1e-300


@dataclass(frozen=True)
class GgdParams:
    alpha: float
    gamma: float = 0.0

    def __post_init__(self):
        a, g = float(self.alpha), float(self.gamma)
        if not (math.isfinite(a) and a > 0):
            raise InvalidParams(f"alpha must be finite and positive, got {self.alpha}")
        if not (0.0 <= g < 1.0):
            raise InvalidParams(f"gamma must lie in [0, 1), got {self.gamma}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "gamma", g)

    @property
    def rho(self) -> float:
        return math.exp(gammaln(2.0 / self.alpha) - gammaln(1.0 / self.alpha))

    @property
    def is_circular_gaussian(self) -> bool:
        return self.alpha == 1.0 and self.gamma == 0.0


def _check(p) -> GgdParams:
    if not isinstance(p, GgdParams):
        raise InvalidParams(f"expected GgdParams, got {type(p).__name__}")
    return p


def _quad_form(s, p: GgdParams):
    """Return ``c`` and the non-negative exponent base ``c*(g s^2 + g s*^2 - 2|s|^2)``."""
    s = np.asarray(s, dtype=complex)
    c = 0.5 * p.rho / (p.gamma**2 - 1.0)
    base = p.gamma * 2.0 * (s * s).real - 2.0 * (s * s.conj()).real
    return s, c, np.maximum(c * base, 0.0)


def ggd_log_pdf(s, p: GgdParams):
    """Log-density at ``s`` (scalar or array)."""
    p = _check(p)
    s, _, cq = _quad_form(s, p)
    log_norm = (
        math.log(p.alpha * p.rho)
        - math.log(math.pi)
        - gammaln(1.0 / p.alpha)
        - 0.5 * math.log1p(-p.gamma**2)
    )
    out = log_norm - cq**p.alpha
    return float(out) if out.ndim == 0 else out


def ggd_score(s, p: GgdParams, floor: float | None = None):
    """Score ``phi(s) = -d log p / ds`` in the Wirtinger sense.

    The fractional power of the (non-positive) quadratic form is taken on
    its magnitude, with the sign carried by the ``(gamma^2 - 1)^alpha``
    prefactor, so that ``phi`` is the exact derivative of :func:`ggd_log_pdf`.

    Args:
        s: complex sample(s).
        p: distribution parameters.
        floor: if given, samples with modulus below ``floor`` are pushed out
            radially to ``floor`` before evaluation (origin maps to ``floor``).

    Raises:
        ScoreSingularity: for ``alpha < 1`` at ``|s| < 1e-300`` when no floor is set.
    """
    p = _check(p)
    s = np.asarray(s, dtype=complex)
    if floor is not None:
        mag = np.abs(s)
        small = mag < floor
        if np.any(small):
            phase = np.where(mag > 0, s / np.where(mag > 0, mag, 1.0), 1.0)
            s = np.where(small, floor * phase, s)
    elif p.alpha < 1.0 and np.any(np.abs(s) < SCORE_SINGULAR_RADIUS):
        raise ScoreSingularity("score of a super-Gaussian GGD is singular at s = 0")
    s, c, cq = _quad_form(s, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(cq > 0, cq ** (p.alpha - 1.0), 0.0 if p.alpha > 1 else 1.0)
    out = 2.0 * p.alpha * c * power * (p.gamma * s - s.conj())
    return complex(out) if out.ndim == 0 else out


def kappa_bar(p: GgdParams) -> float:
    """Normalized score power ``E|phi(s)|^2 * E|s|^2``; equals 1 only for the circular Gaussian."""
    p = _check(p)
    a = p.alpha
    return math.exp(
        2.0 * math.log(a) + gammaln(2.0 / a) - 2.0 * gammaln(1.0 / a) - math.log1p(-p.gamma**2)
    )


def sample_ggd(p: GgdParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. samples.

    In whitened coordinates ``(x/sqrt(1+gamma), y/sqrt(1-gamma))`` the density
    is radially symmetric and ``(rho*r^2)^alpha`` is Gamma(1/alpha, 1)
    distributed, so the radius comes from one gamma variate and the angle is
    uniform.
    """
    p = _check(p)
    count = int(count)
    if count < 1:
        raise InvalidParams(f"count must be >= 1, got {count}")
    u = rng.gamma(1.0 / p.alpha, 1.0, size=count)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    r = np.sqrt(u ** (1.0 / p.alpha) / p.rho)
    return np.sqrt(1.0 + p.gamma) * r * np.cos(theta) + 1j * np.sqrt(1.0 - p.gamma) * r * np.sin(theta)
