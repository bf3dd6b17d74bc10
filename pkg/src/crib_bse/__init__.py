"""Cramér-Rao bounds on the interference-to-signal ratio for blind extraction
of a moving source, with simulation and maximum-likelihood tooling.

The central entry point is :func:`crib_model`, which evaluates the bound for
the convex-blending (``CvxCSV``), constant-separating-vector (``CSV``) and
block-by-block ICE (``BICE``) mixing models.
"""

from __future__ import annotations

from .errors import CribError, InvalidConfig
from .fim import MODELS, CribResult, closed_form_isr, crib_model, ggd_profile, profile_crib
from .ggd import GgdParams, ggd_log_pdf, ggd_score, kappa_bar, sample_ggd
from .mle import FitOptions, FitResult, ThetaCvx, fit, grad_loglik, loglik
from .model import BlendingSchedule, MixingPath, SeparatingVector, linear_schedule
from .simulate import (
    Dataset,
    MixtureConfig,
    empirical_isr,
    equivariant_config,
    generate,
    load_dataset,
    random_config,
    save_dataset,
)
from .sweep import PRESETS, SweepSpec, run_sweep

__version__ = "0.1.0"

__all__ = [
    "MODELS",
    "PRESETS",
    "BlendingSchedule",
    "CribError",
    "CribResult",
    "Dataset",
    "FitOptions",
    "FitResult",
    "GgdParams",
    "InvalidConfig",
    "MixingPath",
    "MixtureConfig",
    "SeparatingVector",
    "SweepSpec",
    "ThetaCvx",
    "closed_form_isr",
    "crib_model",
    "empirical_isr",
    "equivariant_config",
    "fit",
    "generate",
    "ggd_log_pdf",
    "ggd_profile",
    "ggd_score",
    "grad_loglik",
    "kappa_bar",
    "linear_schedule",
    "load_dataset",
    "loglik",
    "profile_crib",
    "random_config",
    "run_sweep",
    "sample_ggd",
    "save_dataset",
]
