"""Fisher information and Cramer-Rao-induced ISR bounds.

The information about ``theta = (g-basis vectors, h)`` is evaluated at the
equivariant point ``w = a_t = e_1`` with a circular Gaussian background.
All three compared models share one builder: the block-``t`` mixing vector is
``sum_k mu[t, k] * a_k`` for ``K`` free basis vectors, so

* CvxCSV uses ``K = 2`` with rows ``(lam_t, 1 - lam_t)``,
* CSV uses ``K = T`` with the identity (one free vector per block),
* static ICE uses ``K = 1`` with a column of ones.

Per sample in block ``t`` the information blocks are::

    A[k, l] = mu[t, k] mu[t, l] R_t,   R_t = sigma_t^2 Cz_t^{-1}
    B[k]    = -mu[t, k] I
    D       = kappa_t Cz_t

and ``F = Nb * sum_t F_t``. The bound on ``h`` is ``(1/Nb) (D - C A^{-1} B)^{-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InvalidBlockCount, InvalidConfig, InvalidParams, InvalidTau, SingularBlock
from .ggd import GgdParams, kappa_bar
from .model import BlendingSchedule, linear_schedule

MODELS = ("CvxCSV", "CSV", "BICE")


def canonical_model(name: str) -> str:
    for m in MODELS:
        if m.lower() == str(name).lower():
            return m
    raise InvalidConfig("model", f"unknown model {name!r}; choose from {', '.join(MODELS)}")


def variance_profile(tau: float, T: int) -> np.ndarray:
    """Per-block SOI standard deviation ``tau + (1 - tau) sin(pi t / (2T))``."""
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise InvalidTau(f"tau must lie in [0, 1], got {tau}")
    if T < 1:
        raise InvalidBlockCount(f"T must be >= 1, got {T}")
    t = np.arange(1, T + 1)
    return tau + (1.0 - tau) * np.sin(np.pi * t / (2.0 * T))


@dataclass(frozen=True)
class SourceProfile:
    """Per-block SOI variance, score power and background covariance."""

    sigma2: np.ndarray
    kappa: np.ndarray
    Cz: np.ndarray

    def __post_init__(self):
        sigma2 = np.array(self.sigma2, dtype=float).ravel()
        kappa = np.array(self.kappa, dtype=float).ravel()
        Cz = np.array(self.Cz, dtype=complex)
        if Cz.ndim == 2:
            Cz = np.broadcast_to(Cz, (sigma2.size,) + Cz.shape).copy()
        if not (sigma2.size == kappa.size == Cz.shape[0] >= 1):
            raise InvalidParams("sigma2, kappa and Cz must describe the same number of blocks")
        if Cz.ndim != 3 or Cz.shape[1] != Cz.shape[2] or Cz.shape[1] < 1:
            raise InvalidParams(f"Cz must be a stack of square matrices, got {Cz.shape}")
        if np.any(sigma2 <= 0) or not np.all(np.isfinite(sigma2)):
            raise InvalidParams("block variances must be positive")
        if np.any(kappa * sigma2 < 1.0 - 1e-12):
            raise InvalidParams("score power must satisfy kappa * sigma^2 >= 1")
        for c in Cz:
            if not numerics.hermitian_check(c, 1e-10 * max(1.0, np.abs(c).max())):
                raise InvalidParams("background covariances must be Hermitian")
            if np.linalg.eigvalsh(numerics.hermitian_part(c))[0] <= 0:
                raise InvalidParams("background covariances must be positive definite")
        for name, arr in (("sigma2", sigma2), ("kappa", kappa), ("Cz", Cz)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.sigma2.size

    @property
    def dim(self) -> int:
        """Background dimension ``d - 1``."""
        return self.Cz.shape[1]

    @property
    def kbar(self) -> np.ndarray:
        return self.kappa * self.sigma2

    def R(self, t: int) -> np.ndarray:
        """``sigma_t^2 Cz_t^{-1}`` for 0-based block ``t``."""
        return self.sigma2[t] * numerics.solve(self.Cz[t], np.eye(self.dim, dtype=complex))

    def block(self, t: int) -> "SourceProfile":
        return SourceProfile(self.sigma2[t : t + 1], self.kappa[t : t + 1], self.Cz[t : t + 1])


def ggd_profile(ggd: GgdParams, tau: float, T: int, d: int, Cz=None) -> SourceProfile:
    """Profile of a GGD source with block-dependent scale and a fixed shape."""
    sigma2 = variance_profile(tau, T) ** 2
    kappa = kappa_bar(ggd) / sigma2
    if Cz is None:
        Cz = np.eye(d - 1, dtype=complex)
    return SourceProfile(sigma2, kappa, Cz)


@dataclass(frozen=True)
class BasisWeights:
    """``(T, K)`` real weights ``mu[t, k]`` of the free mixing-basis vectors."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 2 or mu.shape[0] < 1 or mu.shape[1] < 1:
            raise InvalidParams(f"weights must be a non-empty (T, K) matrix, got {mu.shape}")
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)

    @property
    def T(self) -> int:
        return self.mu.shape[0]

    @property
    def K(self) -> int:
        return self.mu.shape[1]


def cvxcsv_weights(schedule: BlendingSchedule) -> BasisWeights:
    # a single block has a_1 = a_T, i.e. only one free vector
    if schedule.T == 1:
        return ice_weights(1)
    return BasisWeights(np.column_stack([schedule.lam, 1.0 - schedule.lam]))


def csv_weights(T: int) -> BasisWeights:
    return BasisWeights(np.eye(T))


def ice_weights(T: int) -> BasisWeights:
    return BasisWeights(np.ones((T, 1)))


@dataclass(frozen=True)
class FimBlocks:
    """``F = Nb * [[A, B], [B^H, D]]``; ``A``, ``B``, ``D`` are stored without ``Nb``."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    Nb: int = 1

    @property
    def C(self) -> np.ndarray:
        return self.B.conj().T

    def partition(self) -> numerics.BlockPartition:
        return numerics.BlockPartition(self.A, self.B, self.C, self.D)

    def assemble(self) -> np.ndarray:
        return self.Nb * self.partition().assemble()


def fim_per_block(profile: SourceProfile, weights: BasisWeights, t: int) -> FimBlocks:
    """Single-sample information of 0-based block ``t``."""
    if weights.T != profile.T:
        raise InvalidParams(f"weights cover {weights.T} blocks, profile {profile.T}")
    mu = weights.mu[t]
    p = profile.dim
    eye = np.eye(p, dtype=complex)
    A = np.kron(np.outer(mu, mu), profile.R(t))
    B = np.kron(-mu[:, None], eye)
    D = profile.kappa[t] * profile.Cz[t]
    return FimBlocks(A, B, D, 1)


def assemble_fim(profile: SourceProfile, weights: BasisWeights, Nb: int) -> FimBlocks:
    if Nb < 1:
        raise InvalidParams(f"Nb must be >= 1, got {Nb}")
    parts = [fim_per_block(profile, weights, t) for t in range(profile.T)]
    return FimBlocks(
        sum(f.A for f in parts),
        sum(f.B for f in parts),
        sum(f.D for f in parts),
        int(Nb),
    )


@dataclass(frozen=True)
class Crlb:
    """CRLB on ``h``; ``matrix`` is ``None`` when the model is unidentifiable.

    ``rcond`` is the smallest eigenvalue of the Schur complement relative to
    the largest eigenvalue of ``D``, i.e. the fraction of the raw information
    about ``h`` that survives elimination of the mixing parameters.
    """

    matrix: np.ndarray | None
    rcond: float

    @property
    def identifiable(self) -> bool:
        return self.matrix is not None


def crlb_h(F: FimBlocks) -> Crlb:
    try:
        S = numerics.hermitian_part(numerics.schur_complement(F.partition()))
    except SingularBlock:
        return Crlb(None, 0.0)
    scale = np.linalg.eigvalsh(numerics.hermitian_part(F.D))[-1]
    rc = float(np.linalg.eigvalsh(S)[0] / scale)
    if not rc >= numerics.RCOND_THRESHOLD:
        return Crlb(None, max(rc, 0.0))
    L = numerics.solve(S, np.eye(S.shape[0], dtype=complex))
    return Crlb(numerics.hermitian_part(L) / F.Nb, rc)


@dataclass(frozen=True)
class CribResult:
    isr: float
    isr_db: float
    identifiable: bool
    rcond: float
    model: str

    @classmethod
    def from_isr(cls, isr: float, rcond: float, model: str) -> "CribResult":
        isr = float(isr)
        if math.isfinite(isr):
            return cls(isr, 10.0 * math.log10(isr) if isr > 0 else -math.inf, True, rcond, model)
        return cls(math.inf, math.inf, False, rcond, model)


def crib_isr(crlb, profile: SourceProfile, model: str = "CvxCSV") -> CribResult:
    """``tr[<Cz_t>_t CRLB(h)] / <sigma_t^2>_t``."""
    if isinstance(crlb, Crlb):
        if not crlb.identifiable:
            return CribResult.from_isr(math.inf, crlb.rcond, model)
        mat, rc = crlb.matrix, crlb.rcond
    else:
        mat, rc = np.asarray(crlb, dtype=complex), 1.0
    isr = float(np.trace(profile.Cz.mean(axis=0) @ mat).real / profile.sigma2.mean())
    return CribResult.from_isr(isr, rc, model)


def closed_form_isr(d: int, N: int, kbar) -> float:
    """``(d - 1) / (N (<kbar>_t - 1))``, valid for ``R_t`` constant in ``t``.

    Returns ``inf`` when the mean normalized score power does not exceed 1.
    """
    mean_kbar = float(np.mean(kbar))
    if mean_kbar <= 1.0 + 1e-12:
        return math.inf
    return (d - 1) / (N * (mean_kbar - 1.0))


def profile_crib(model: str, profile: SourceProfile, Nb: int, schedule: BlendingSchedule | None = None) -> CribResult:
    """CRIB of ``model`` for an arbitrary source profile."""
    model = canonical_model(model)
    if model == "BICE":
        num, rc = 0.0, math.inf
        for t in range(profile.T):
            sub = profile.block(t)
            c = crlb_h(assemble_fim(sub, ice_weights(1), Nb))
            rc = min(rc, c.rcond)
            if not c.identifiable:
                return CribResult.from_isr(math.inf, rc, model)
            num += float(np.trace(sub.Cz[0] @ c.matrix).real)
        return CribResult.from_isr(num / profile.T / profile.sigma2.mean(), rc, model)
    if model == "CSV":
        weights = csv_weights(profile.T)
    else:
        if schedule is None:
            schedule = linear_schedule(profile.T)
        if schedule.T != profile.T:
            raise InvalidParams(f"schedule has {schedule.T} blocks, profile {profile.T}")
        weights = cvxcsv_weights(schedule)
    return crib_isr(crlb_h(assemble_fim(profile, weights, Nb)), profile, model)


def crib_model(
    model: str,
    d: int,
    N: int,
    T: int,
    schedule: BlendingSchedule | None,
    ggd: GgdParams,
    tau: float,
    Cz=None,
) -> CribResult:
    """CRIB of one model for a GGD source with the sinusoidal variance profile."""
    if d < 2:
        raise InvalidConfig("d", f"need at least 2 sensors, got {d}")
    if T < 1:
        raise InvalidConfig("T", f"need at least one block, got {T}")
    if N < 1 or N % T:
        raise InvalidConfig("N", f"N={N} is not a positive multiple of T={T}")
    profile = ggd_profile(ggd, tau, T, d, Cz)
    return profile_crib(model, profile, N // T, schedule)
