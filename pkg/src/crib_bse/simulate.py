"""Dynamic mixture generation and ISR measurement.

Block ``t`` of a mixture is ``x(n) = a_t s(n) + Q_t z(n)`` where ``s`` is a
scaled GGD source, ``z`` a circular Gaussian background and ``Q_t`` the
noise part of the inverse demixing matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstraintViolated, DimensionMismatch, InvalidConfig
from .fim import variance_profile
from .ggd import GgdParams, sample_ggd
from .model import (
    BlendingSchedule,
    MixingPath,
    SeparatingVector,
    apply_distortionless,
    block_index,
    blocking_matrix,
    demixing_pair,
    linear_schedule,
)

DATASET_FORMAT = "crib-bse-dataset"
DATASET_VERSION = 1


def trial_seed(seed: int, trial: int) -> int:
    """Seed of Monte Carlo trial ``trial``: ``seed XOR trial``."""
    return int(seed) ^ int(trial)


@dataclass(frozen=True)
class MixtureConfig:
    d: int
    N: int
    T: int
    ggd: GgdParams
    tau: float
    path: MixingPath
    w: SeparatingVector
    seed: int = 0
    Cz: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.d < 2:
            raise InvalidConfig("d", f"need at least 2 sensors, got {self.d}")
        if self.T < 1:
            raise InvalidConfig("T", f"need at least one block, got {self.T}")
        if self.N < 1 or self.N % self.T:
            raise InvalidConfig("N", f"N={self.N} is not a positive multiple of T={self.T}")
        if self.path.d != self.d or self.w.d != self.d:
            raise InvalidConfig("d", "mixing path and separating vector must have dimension d")
        if self.path.T != self.T:
            raise InvalidConfig("T", f"schedule has {self.path.T} blocks, expected {self.T}")
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidConfig("tau", f"tau must lie in [0, 1], got {self.tau}")
        for a in (self.path.a_first, self.path.a_last):
            if abs(np.vdot(self.w.w, a) - 1.0) > 1e-10:
                raise ConstraintViolated("w^H a must equal 1 at both endpoints")
        if self.Cz is not None:
            Cz = np.array(self.Cz, dtype=complex)
            if Cz.ndim == 2:
                Cz = np.broadcast_to(Cz, (self.T,) + Cz.shape).copy()
            if Cz.shape != (self.T, self.d - 1, self.d - 1):
                raise InvalidConfig("Cz", f"expected shape {(self.T, self.d - 1, self.d - 1)}")
            Cz.flags.writeable = False
            object.__setattr__(self, "Cz", Cz)

    @property
    def schedule(self) -> BlendingSchedule:
        return self.path.schedule

    @property
    def Nb(self) -> int:
        return self.N // self.T

    @property
    def sigma(self) -> np.ndarray:
        return variance_profile(self.tau, self.T)

    @property
    def background_cov(self) -> np.ndarray:
        """``(T, d-1, d-1)`` background covariances (identity unless overridden)."""
        if self.Cz is None:
            return np.broadcast_to(np.eye(self.d - 1, dtype=complex), (self.T, self.d - 1, self.d - 1))
        return self.Cz

    def with_seed(self, seed: int) -> "MixtureConfig":
        return MixtureConfig(self.d, self.N, self.T, self.ggd, self.tau, self.path, self.w, seed, self.Cz)


def equivariant_config(d, N, T, ggd, tau, seed=0, schedule=None, Cz=None) -> MixtureConfig:
    """Configuration with ``a_1 = a_T = w = e_1``."""
    if schedule is None:
        schedule = linear_schedule(T)
    zeros = np.zeros(d - 1)
    a1, aT, w = apply_distortionless(zeros, zeros, zeros)
    return MixtureConfig(d, N, T, ggd, tau, MixingPath(a1, aT, schedule), w, seed, Cz)


def random_endpoint(d: int, rng: np.random.Generator, min_lead: float = 0.3) -> np.ndarray:
    """Unit-norm complex vector whose first entry has modulus at least ``min_lead``."""
    while True:
        a = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        a /= np.linalg.norm(a)
        if abs(a[0]) >= min_lead:
            return a


def random_config(d, N, T, ggd, tau, seed=0, schedule=None, rng=None) -> MixtureConfig:
    """Configuration with random endpoints and a separator satisfying both constraints.

    ``h`` is the minimum-norm solution of ``w^H a_1 = w^H a_T = 1``. For
    ``d = 2`` that system is overdetermined, so ``a_T`` is rescaled instead.
    """
    if schedule is None:
        schedule = linear_schedule(T)
    rng = np.random.default_rng(seed) if rng is None else rng
    a1 = random_endpoint(d, rng)
    aT = random_endpoint(d, rng)
    if d == 2:
        h = np.array([(1.0 - a1[0]) / a1[1]]).conj()
        w = SeparatingVector(h)
        aT = aT / np.vdot(w.w, aT)
    else:
        G = np.vstack([a1[1:].conj(), aT[1:].conj()])
        rhs = np.array([1.0 - a1[0], 1.0 - aT[0]]).conj()
        h = np.linalg.lstsq(G, rhs, rcond=None)[0]
        w = SeparatingVector(h)
    return MixtureConfig(d, N, T, ggd, tau, MixingPath(a1, aT, schedule), w, seed)


@dataclass(frozen=True)
class Dataset:
    """Observations ``x`` (N, d), source ``s`` (N,), background ``z`` (N, d-1)."""

    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    block_index: np.ndarray

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def _circular_gaussian(rng, shape, cov: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(cov)
    n = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return n @ L.T


def generate(config: MixtureConfig) -> Dataset:
    """Draw a mixture; identical configs (including the seed) give identical data."""
    rng = np.random.default_rng(config.seed)
    N, d, T, Nb = config.N, config.d, config.T, config.Nb
    tidx = block_index(N, T)
    u = sample_ggd(config.ggd, N, rng)
    s = config.sigma[tidx - 1] * u
    Cz = config.background_cov
    z = np.empty((N, d - 1), dtype=complex)
    x = np.empty((N, d), dtype=complex)
    vectors = config.path.all_vectors()
    for t in range(T):
        sl = slice(t * Nb, (t + 1) * Nb)
        z[sl] = _circular_gaussian(rng, (Nb, d - 1), Cz[t])
        pair = demixing_pair(config.w, vectors[t])
        x[sl] = np.outer(s[sl], vectors[t]) + z[sl] @ pair.Q.T
    for arr in (x, s, z, tidx):
        arr.flags.writeable = False
    return Dataset(x, s, z, tidx)


def _separator(w_hat, d: int) -> np.ndarray:
    w = w_hat.w if isinstance(w_hat, SeparatingVector) else np.asarray(w_hat, dtype=complex).ravel()
    if w.size != d:
        raise DimensionMismatch(f"separator has length {w.size}, data has d={d}")
    return w


def _block_gains(w: np.ndarray, truth: MixtureConfig):
    vectors = truth.path.all_vectors()
    gains = np.empty(truth.T, dtype=complex)
    qs = np.empty((truth.T, truth.d - 1), dtype=complex)
    for t in range(truth.T):
        pair = demixing_pair(truth.w, vectors[t])
        gains[t] = np.vdot(w, vectors[t])
        qs[t] = pair.Q.conj().T @ w
    return gains, qs


def empirical_isr(data: Dataset, w_hat, truth: MixtureConfig) -> float:
    """Population ISR of a separator, using the true block moments.

    With ``w_hat^H A_t = (1 + eps_t, q_t^H)`` this is
    ``<q_t^H Cz_t q_t>_t / <|1 + eps_t|^2 sigma_t^2>_t``.
    """
    w = _separator(w_hat, data.d)
    if data.d != truth.d:
        raise DimensionMismatch("dataset and configuration disagree on d")
    gains, qs = _block_gains(w, truth)
    Cz = truth.background_cov
    leak = np.einsum("ti,tij,tj->t", qs.conj(), Cz, qs).real
    signal = np.abs(gains) ** 2 * truth.sigma**2
    return float(leak.mean() / signal.mean())


def sample_isr(data: Dataset, w_hat, truth: MixtureConfig) -> float:
    """ISR from sample powers of the signal and interference parts of ``w_hat^H x``."""
    w = _separator(w_hat, data.d)
    gains, _ = _block_gains(w, truth)
    vectors = truth.path.all_vectors()
    t = data.block_index - 1
    y = data.x - data.s[:, None] * vectors[t]
    interference = y @ w.conj()
    signal = gains[t] * data.s
    return float(np.sum(np.abs(interference) ** 2) / np.sum(np.abs(signal) ** 2))


# -- serialization ---------------------------------------------------------------


def _pairs(v) -> list:
    v = np.asarray(v, dtype=complex).ravel()
    return [[float(c.real), float(c.imag)] for c in v]


def _unpairs(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def dataset_header(config: MixtureConfig) -> dict:
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "d": config.d,
        "N": config.N,
        "T": config.T,
        "Nb": config.Nb,
        "seed": config.seed,
        "truth": {
            "alpha": config.ggd.alpha,
            "gamma": config.ggd.gamma,
            "tau": config.tau,
            "lambda": [float(v) for v in config.schedule.lam],
            "a_first": _pairs(config.path.a_first),
            "a_last": _pairs(config.path.a_last),
            "h": _pairs(config.w.h),
        },
        "payload": {"x": [config.N, config.d], "s": [config.N]},
    }
    if config.Cz is not None:
        header["truth"]["Cz"] = [[_pairs(row) for row in c] for c in config.Cz]
    return header


def config_from_header(header: dict) -> MixtureConfig:
    if header.get("format") != DATASET_FORMAT:
        raise ValueError("not a crib-bse dataset")
    truth = header["truth"]
    schedule = BlendingSchedule(np.asarray(truth["lambda"], dtype=float))
    path = MixingPath(_unpairs(truth["a_first"]), _unpairs(truth["a_last"]), schedule)
    Cz = None
    if "Cz" in truth:
        Cz = np.array([[_unpairs(row) for row in c] for c in truth["Cz"]])
    return MixtureConfig(
        int(header["d"]),
        int(header["N"]),
        int(header["T"]),
        GgdParams(truth["alpha"], truth["gamma"]),
        float(truth["tau"]),
        path,
        SeparatingVector(_unpairs(truth["h"])),
        int(header["seed"]),
        Cz,
    )


def _interleave(v: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(v).view(np.float64)


def save_dataset(data: Dataset, config: MixtureConfig, path, fmt: str = "bin") -> Path:
    """Write ``data`` as JSON, or as one JSON header line followed by raw little-endian doubles.

    The binary payload holds ``x`` (row-major samples x sensors, real and
    imaginary parts interleaved) followed by ``s`` in the same layout.
    """
    path = Path(path)
    header = dataset_header(config)
    if fmt == "json":
        doc = dict(header)
        doc["x"] = [[float(v) for v in _interleave(row)] for row in data.x]
        doc["s"] = _pairs(data.s)
        path.write_text(json.dumps(doc) + "\n")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(_interleave(data.x).astype("<f8").tobytes())
            fh.write(_interleave(data.s).astype("<f8").tobytes())
    else:
        raise InvalidConfig("format", f"unknown dataset format {fmt!r}")
    return path


def load_dataset(path):
    """Read a dataset file; returns ``(Dataset, MixtureConfig)``.

    The background ``z`` is recovered as ``B_t x`` from the recorded truth.
    """
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    N, d = int(header["N"]), int(header["d"])
    if "x" in header:
        x = np.asarray(header["x"], dtype=float).reshape(N, d, 2)
        x = x[..., 0] + 1j * x[..., 1]
        s = _unpairs(header["s"])
    else:
        body = np.frombuffer(raw[nl + 1 :], dtype="<f8")
        if body.size != 2 * N * (d + 1):
            raise ValueError(f"payload has {body.size} doubles, expected {2 * N * (d + 1)}")
        x = body[: 2 * N * d].astype(float).view(complex).reshape(N, d)
        s = body[2 * N * d :].astype(float).view(complex)
    config = config_from_header(header)
    tidx = block_index(N, config.T)
    vectors = config.path.all_vectors()
    z = np.empty((N, d - 1), dtype=complex)
    for t in range(config.T):
        sl = tidx == t + 1
        z[sl] = x[sl] @ blocking_matrix(vectors[t]).T
    return Dataset(x, s, z, tidx), config
