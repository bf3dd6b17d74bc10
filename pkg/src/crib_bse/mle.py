"""Maximum-likelihood extraction under the CvxCSV model.

The free parameters are the lower parts ``g1, gT`` of the endpoint mixing
vectors and ``h`` of the separating vector; the leading entries follow from
the unit-gain constraints, ``gamma_t = 1 - h^H g_t``. With a known source
scale ``sigma_t`` and background covariance ``Cz_t`` the log-likelihood is

    sum_n  log p_t(w^H x) - z^H Cz_t^{-1} z + (d - 2) log|gamma_t|^2,
    z = B_t x = g_t x_1 - gamma_t x_rest.

Gradients are conjugate Wirtinger derivatives, so ``theta + mu * grad`` is an
ascent step for small ``mu``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import DegenerateGamma, DimensionMismatch
from .ggd import GgdParams, ggd_log_pdf, ggd_score
from .model import BlendingSchedule, SeparatingVector, linear_schedule
from .simulate import Dataset

log = logging.getLogger(__name__)

GAMMA_MIN = 1e-8
SCORE_FLOOR = 1e-12


@dataclass(frozen=True)
class ThetaCvx:
    g1: np.ndarray
    gT: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        parts = [np.array(np.ravel(getattr(self, k)), dtype=complex) for k in ("g1", "gT", "h")]
        if not parts[0].size == parts[1].size == parts[2].size >= 1:
            raise DimensionMismatch("g1, gT and h must all have length d - 1")
        for k, v in zip(("g1", "gT", "h"), parts):
            v.flags.writeable = False
            object.__setattr__(self, k, v)

    @property
    def d(self) -> int:
        return self.h.size + 1

    def vector(self) -> np.ndarray:
        return np.concatenate([self.g1, self.gT, self.h])

    @classmethod
    def from_vector(cls, v) -> "ThetaCvx":
        v = np.asarray(v, dtype=complex)
        p = v.size // 3
        return cls(v[:p], v[p : 2 * p], v[2 * p :])

    @classmethod
    def zeros(cls, d: int) -> "ThetaCvx":
        z = np.zeros(d - 1, dtype=complex)
        return cls(z, z, z)

    @property
    def separator(self) -> SeparatingVector:
        return SeparatingVector(self.h)


def _blocks(data: Dataset, T: int):
    N = data.N
    if N % T:
        raise DimensionMismatch(f"N={N} not divisible by T={T}")
    Nb = N // T
    return [slice(t * Nb, (t + 1) * Nb) for t in range(T)]


def _prepare(theta: ThetaCvx, data: Dataset, sigma, Cz, schedule):
    if theta.d != data.d:
        raise DimensionMismatch(f"theta has d={theta.d}, data has d={data.d}")
    sigma = np.asarray(sigma, dtype=float).ravel()
    T = sigma.size
    if schedule is None:
        schedule = linear_schedule(T)
    if schedule.T != T:
        raise DimensionMismatch(f"schedule has {schedule.T} blocks, sigma has {T}")
    Cz = np.asarray(Cz, dtype=complex)
    if Cz.ndim == 2:
        Cz = np.broadcast_to(Cz, (T,) + Cz.shape)
    return sigma, Cz, schedule


def _block_terms(theta, X, lam, sigma_t, Cz_t):
    """Shared intermediate quantities for one block."""
    g_t = lam * theta.g1 + (1.0 - lam) * theta.gT
    gamma_t = 1.0 - np.vdot(theta.h, g_t)
    if abs(gamma_t) < GAMMA_MIN:
        raise DegenerateGamma(f"|gamma_t| = {abs(gamma_t):.3e} below {GAMMA_MIN}")
    x1, xr = X[:, 0], X[:, 1:]
    s = x1 + xr @ theta.h.conj()
    z = x1[:, None] * g_t[None, :] - gamma_t * xr
    Ci = numerics.hermitian_part(numerics.solve(Cz_t, np.eye(Cz_t.shape[0], dtype=complex)))
    Ciz = z @ Ci.T
    return g_t, gamma_t, s, z, Ciz


def loglik(theta: ThetaCvx, data: Dataset, ggd: GgdParams, sigma, Cz, schedule: BlendingSchedule | None = None) -> float:
    """Log-likelihood of the whole observation (background ``log det`` constants dropped)."""
    sigma, Cz, schedule = _prepare(theta, data, sigma, Cz, schedule)
    d = data.d
    total = 0.0
    for t, sl in enumerate(_blocks(data, sigma.size)):
        X = data.x[sl]
        _, gamma_t, s, z, Ciz = _block_terms(theta, X, schedule.lam[t], sigma[t], Cz[t])
        total += float(np.sum(ggd_log_pdf(s / sigma[t], ggd))) - X.shape[0] * 2.0 * math.log(sigma[t])
        total -= float(np.sum((z.conj() * Ciz).real))
        total += X.shape[0] * (d - 2) * math.log(abs(gamma_t) ** 2)
    return total


def sample_gradients(
    theta: ThetaCvx, data: Dataset, ggd: GgdParams, sigma, Cz, schedule: BlendingSchedule | None = None
) -> np.ndarray:
    """Per-sample conjugate gradients, shape ``(N, 3 (d - 1))`` ordered ``(g1, gT, h)``."""
    sigma, Cz, schedule = _prepare(theta, data, sigma, Cz, schedule)
    d = data.d
    out = np.empty((data.N, 3 * (d - 1)), dtype=complex)
    p = d - 1
    for t, sl in enumerate(_blocks(data, sigma.size)):
        X = data.x[sl]
        lam = schedule.lam[t]
        g_t, gamma_t, s, z, Ciz = _block_terms(theta, X, lam, sigma[t], Cz[t])
        x1, xr = X[:, 0], X[:, 1:]
        phi = ggd_score(s / sigma[t], ggd, floor=SCORE_FLOOR) / sigma[t]
        xr_Ciz = np.sum(xr.conj() * Ciz, axis=1)
        grad_h = (
            -phi[:, None] * xr
            - xr_Ciz.conj()[:, None] * g_t[None, :]
            - (d - 2) * g_t[None, :] / gamma_t
        )
        grad_g = (
            -x1.conj()[:, None] * Ciz
            - xr_Ciz[:, None] * theta.h[None, :]
            - (d - 2) * theta.h[None, :] / np.conj(gamma_t)
        )
        out[sl, :p] = lam * grad_g
        out[sl, p : 2 * p] = (1.0 - lam) * grad_g
        out[sl, 2 * p :] = grad_h
    return out


def grad_loglik(
    theta: ThetaCvx, data: Dataset, ggd: GgdParams, sigma, Cz, schedule: BlendingSchedule | None = None
) -> ThetaCvx:
    """Gradient of :func:`loglik` with respect to ``(g1*, gT*, h*)``."""
    return ThetaCvx.from_vector(sample_gradients(theta, data, ggd, sigma, Cz, schedule).sum(axis=0))


def sample_background_cov(theta: ThetaCvx, data: Dataset, T: int, schedule: BlendingSchedule | None = None) -> np.ndarray:
    """Per-block sample covariance of ``B_t x`` under the blocking matrices implied by ``theta``."""
    if schedule is None:
        schedule = linear_schedule(T)
    out = []
    for t, sl in enumerate(_blocks(data, T)):
        X = data.x[sl]
        g_t = schedule.lam[t] * theta.g1 + (1.0 - schedule.lam[t]) * theta.gT
        gamma_t = 1.0 - np.vdot(theta.h, g_t)
        z = X[:, :1] * g_t[None, :] - gamma_t * X[:, 1:]
        out.append(numerics.hermitian_part(z.T @ z.conj() / X.shape[0]))
    return np.array(out)


@dataclass
class FitOptions:
    max_iters: int = 2000
    step: float = 1.0
    backtrack: float = 0.5
    grad_tol: float = 1e-7
    restarts: int = 1
    seed: int = 0
    init_scale: float = 1e-2
    armijo: float = 1e-4
    estimate_cz: bool = False
    cz_rounds: int = 3

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise ValueError("gradient tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class FitResult:
    theta: ThetaCvx
    loglik: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    Cz: np.ndarray | None = None
    #: "converged" (gradient tolerance met), "stalled" (no ascent step along
    #: the gradient, typical at the cusps of super-Gaussian likelihoods) or
    #: "max_iters"; "init" when ``max_iters`` is 0 and no step was taken
    status: str = "converged"


def _ascend(theta0, data, ggd, sigma, Cz, schedule, opts: FitOptions) -> FitResult:
    """Gradient ascent on the per-sample average log-likelihood with Armijo backtracking."""
    N = data.N

    def objective(v):
        try:
            return loglik(ThetaCvx.from_vector(v), data, ggd, sigma, Cz, schedule) / N
        except DegenerateGamma:
            return -math.inf

    v = theta0.vector()
    f = objective(v)
    if not math.isfinite(f):
        raise DegenerateGamma("initial point violates the gamma bound")
    history = [f * N]
    step = opts.step
    # max_iters = 0 only evaluates the starting point
    status = "max_iters" if opts.max_iters else "init"
    it = 0
    for it in range(1, opts.max_iters + 1):
        G = grad_loglik(ThetaCvx.from_vector(v), data, ggd, sigma, Cz, schedule).vector() / N
        gnorm2 = float(np.vdot(G, G).real)
        if math.sqrt(gnorm2) < opts.grad_tol:
            status = "converged"
            break
        while True:
            cand = v + step * G
            fc = objective(cand)
            if fc >= f + opts.armijo * step * gnorm2:
                break
            step *= opts.backtrack
            if step < 1e-14:
                break
        if step < 1e-14:
            status = "stalled"
            break
        v, f = cand, fc
        history.append(f * N)
        step /= opts.backtrack
    return FitResult(ThetaCvx.from_vector(v), f * N, it, status == "converged", history, status=status)


def fit(
    data: Dataset,
    ggd: GgdParams,
    sigma,
    Cz,
    opts: FitOptions | None = None,
    schedule: BlendingSchedule | None = None,
    init: ThetaCvx | None = None,
) -> FitResult:
    """Best of ``opts.restarts`` gradient-ascent runs started near ``theta = 0``.

    When ``init`` is given the first run starts exactly there. Non-convergence
    is logged and flagged in the result; the best iterate is still returned.
    With ``opts.estimate_cz`` the supplied ``Cz`` is only a starting value and
    is replaced by sample covariances of ``B_t x`` between rounds.
    """
    opts = opts or FitOptions()
    sigma = np.asarray(sigma, dtype=float).ravel()
    rng = np.random.default_rng(opts.seed)
    d = data.d
    best = None
    for r in range(opts.restarts):
        if r == 0 and init is not None:
            theta0 = init
        else:
            v = opts.init_scale * (rng.standard_normal(3 * (d - 1)) + 1j * rng.standard_normal(3 * (d - 1)))
            theta0 = ThetaCvx.from_vector(v / math.sqrt(2.0))
        cz = Cz
        res = _ascend(theta0, data, ggd, sigma, cz, schedule, opts)
        if opts.estimate_cz:
            for _ in range(opts.cz_rounds):
                cz = sample_background_cov(res.theta, data, sigma.size, schedule)
                res = _ascend(res.theta, data, ggd, sigma, cz, schedule, opts)
            res.Cz = cz
        if best is None or res.loglik > best.loglik:
            best = res
    if best.status == "max_iters":
        log.warning("fit hit max_iters=%d without meeting the gradient tolerance", opts.max_iters)
    elif best.status == "stalled":
        log.info("fit stalled after %d iterations at a non-smooth point", best.iterations)
    return best
