"""CvxCSV mixing and demixing objects.

The SOI mixing vector on block ``t`` is the convex blend
``a_t = lam_t * a_first + (1 - lam_t) * a_last`` while a single separating
vector ``w = (1; h)`` extracts it on every block. Vectors are split as
``a = (gamma; g)`` into the leading coefficient and the remaining ``d - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockOutOfRange,
    ConstraintViolated,
    DegenerateGamma,
    DimensionMismatch,
    GammaZero,
    InvalidBlockCount,
)

GAMMA_EPS = 1e-12


def _frozen(v, dtype=complex) -> np.ndarray:
    out = np.array(v, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class BlendingSchedule:
    """Blending weights ``lam_1..lam_T`` with ``lam_1 = 1`` and ``lam_T = 0``."""

    lam: np.ndarray

    def __post_init__(self):
        lam = _frozen(np.ravel(self.lam), dtype=float)
        if lam.size < 1:
            raise InvalidBlockCount("schedule needs at least one block")
        if np.any(~np.isfinite(lam)) or np.any(lam < 0) or np.any(lam > 1):
            raise ValueError("blending weights must lie in [0, 1]")
        if lam.size == 1 and lam[0] != 1.0:
            raise ValueError("a single-block schedule has the weight 1")
        if lam.size >= 2 and (lam[0] != 1.0 or lam[-1] != 0.0):
            raise ValueError("schedule must start at 1 and end at 0")
        object.__setattr__(self, "lam", lam)

    @property
    def T(self) -> int:
        return self.lam.size

    def reversed_roles(self) -> np.ndarray:
        """Weights of the second endpoint, ``1 - lam_t``."""
        return 1.0 - self.lam


def linear_schedule(T: int) -> BlendingSchedule:
    """Evenly spaced weights ``lam_t = (T - t) / (T - 1)``."""
    T = int(T)
    if T < 1:
        raise InvalidBlockCount(f"T must be >= 1, got {T}")
    if T == 1:
        return BlendingSchedule(np.ones(1))
    t = np.arange(1, T + 1)
    return BlendingSchedule((T - t) / (T - 1))


@dataclass(frozen=True)
class SeparatingVector:
    """``w = (beta; h)`` with ``beta`` fixed to 1."""

    h: np.ndarray

    def __post_init__(self):
        h = _frozen(np.ravel(self.h))
        if h.size < 1:
            raise DimensionMismatch("h must have length d - 1 >= 1")
        object.__setattr__(self, "h", h)

    @property
    def beta(self) -> complex:
        return 1.0 + 0.0j

    @property
    def d(self) -> int:
        return self.h.size + 1

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([[1.0 + 0.0j], self.h])


@dataclass(frozen=True)
class MixingPath:
    a_first: np.ndarray
    a_last: np.ndarray
    schedule: BlendingSchedule

    def __post_init__(self):
        a1 = _frozen(np.ravel(self.a_first))
        aT = _frozen(np.ravel(self.a_last))
        if a1.size < 2 or a1.shape != aT.shape:
            raise DimensionMismatch(f"endpoints must share a length d >= 2, got {a1.size}, {aT.size}")
        if abs(a1[0]) < GAMMA_EPS or abs(aT[0]) < GAMMA_EPS:
            raise GammaZero("endpoint mixing vectors need a nonzero first component")
        object.__setattr__(self, "a_first", a1)
        object.__setattr__(self, "a_last", aT)

    @property
    def d(self) -> int:
        return self.a_first.size

    @property
    def T(self) -> int:
        return self.schedule.T

    def all_vectors(self) -> np.ndarray:
        """``(T, d)`` array whose row ``t - 1`` is ``a_t``."""
        lam = self.schedule.lam[:, None]
        return lam * self.a_first + (1.0 - lam) * self.a_last


def mixing_at(path: MixingPath, t: int) -> np.ndarray:
    """Mixing vector of block ``t`` (1-based)."""
    if not 1 <= t <= path.T:
        raise BlockOutOfRange(f"block {t} outside 1..{path.T}")
    lam = path.schedule.lam[t - 1]
    if lam == 1.0:
        return path.a_first.copy()
    if lam == 0.0:
        return path.a_last.copy()
    return lam * path.a_first + (1.0 - lam) * path.a_last


def blocking_matrix(a_t) -> np.ndarray:
    """``B_t = (g_t, -gamma_t I)``, which annihilates ``a_t``."""
    a_t = np.asarray(a_t, dtype=complex).ravel()
    if a_t.size < 2:
        raise DimensionMismatch("mixing vector needs d >= 2")
    gamma, g = a_t[0], a_t[1:]
    return np.hstack([g[:, None], -gamma * np.eye(a_t.size - 1)])


@dataclass(frozen=True)
class DemixingPair:
    W: np.ndarray
    A: np.ndarray

    @property
    def Q(self) -> np.ndarray:
        return self.A[:, 1:]

    @property
    def B(self) -> np.ndarray:
        return self.W[1:, :]


def demixing_pair(w: SeparatingVector, a_t, tol: float = 1e-10) -> DemixingPair:
    """Demixing matrix ``W_t = (w^H; B_t)`` and its closed-form inverse ``(a_t, Q_t)``."""
    a_t = np.asarray(a_t, dtype=complex).ravel()
    if a_t.size != w.d:
        raise DimensionMismatch(f"w has d={w.d}, mixing vector has d={a_t.size}")
    gamma, g = a_t[0], a_t[1:]
    if abs(gamma) < GAMMA_EPS:
        raise GammaZero(f"|gamma_t| = {abs(gamma):.3e}")
    gain = np.vdot(w.w, a_t)
    if abs(gain - 1.0) > tol:
        raise ConstraintViolated(f"w^H a_t = {gain} != 1")
    h = w.h
    W = np.vstack([w.w.conj()[None, :], blocking_matrix(a_t)])
    Q = np.vstack([h.conj()[None, :], (np.outer(g, h.conj()) - np.eye(w.d - 1)) / gamma])
    A = np.hstack([a_t[:, None], Q])
    return DemixingPair(_frozen(W), _frozen(A))


def demixing_det(a_t) -> complex:
    """``det W_t = (-1)^(d-1) gamma_t^(d-2)``."""
    a_t = np.asarray(a_t, dtype=complex).ravel()
    d = a_t.size
    return (-1) ** (d - 1) * a_t[0] ** (d - 2)


def apply_distortionless(g1, gT, h):
    """Complete ``(g1, gT, h)`` to vectors with ``w^H a_1 = w^H a_T = 1``.

    Returns:
        ``(a_first, a_last, SeparatingVector)``; any blend of the two endpoints
        then also has unit gain through ``w``.
    """
    g1 = np.asarray(g1, dtype=complex).ravel()
    gT = np.asarray(gT, dtype=complex).ravel()
    h = np.asarray(h, dtype=complex).ravel()
    if not (g1.size == gT.size == h.size >= 1):
        raise DimensionMismatch(f"g1, gT, h lengths differ: {g1.size}, {gT.size}, {h.size}")
    gamma1 = 1.0 - np.vdot(h, g1)
    gammaT = 1.0 - np.vdot(h, gT)
    if abs(gamma1) < GAMMA_EPS or abs(gammaT) < GAMMA_EPS:
        raise DegenerateGamma(f"derived gammas {gamma1}, {gammaT} too close to 0")
    return (
        np.concatenate([[gamma1], g1]),
        np.concatenate([[gammaT], gT]),
        SeparatingVector(h),
    )


def block_index(N: int, T: int) -> np.ndarray:
    """1-based block of every sample, ``t = ceil(n T / N)`` for ``n = 1..N``."""
    n = np.arange(1, N + 1)
    return -((-n * T) // N)
