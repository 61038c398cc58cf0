"""Scaling-law fits, NDQPT scans and skin-effect diagnostics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DefectiveMatrixError, DegenerateFitError
from .model import ModelParams, SelfEnergyModel
from .transport import LeadConfig, current_nonmarkovian

__all__ = [
    "FitResult",
    "NdqptCurve",
    "fit_scaling",
    "fit_scaling_log",
    "ndqpt_scan",
    "crossover_location",
    "skin_measure",
    "worker_count",
]

MODELS = ("power_law", "exponential")


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit of ``log I``.

    ``parameter`` is the exponent ``p`` of ``C N^p`` or the rate ``a`` of
    ``C exp(-a N)``; ``prefactor`` is ``C`` (``inf`` if it overflows, in which
    case ``log_prefactor`` still holds it).
    """

    model: str
    parameter: float
    prefactor: float
    r_squared: float
    n_points: int
    log_prefactor: float = 0.0


@dataclass(frozen=True)
class NdqptCurve:
    mu_d_values: np.ndarray
    scaled_current: np.ndarray
    n_sites: int
    quadrature_error: np.ndarray | None = None


def worker_count(default: int | None = None) -> int:
    """Worker threads for sweeps; ``NONRECIP_THREADS`` caps the count."""
    env = os.environ.get("NONRECIP_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"NONRECIP_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return default if default is not None else max(1, min(8, os.cpu_count() or 1))


def fit_scaling_log(n_values, log_i_values, model: str) -> FitResult:
    """Fit from ``log I`` directly; used when ``I`` underflows a double."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(log_i_values, dtype=float)
    if n.shape != y.shape or n.ndim != 1:
        raise ValueError("n_values and log_i_values must be 1-D of equal length")
    if n.size < 4:
        raise DegenerateFitError(f"need at least 4 points, got {n.size}")
    if not np.all(np.isfinite(y)):
        raise DegenerateFitError("non-positive or non-finite current in fit data")
    if np.any(np.diff(n) <= 0):
        raise DegenerateFitError("n_values must be strictly increasing")
    x = np.log(n) if model == "power_law" else n
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    param = slope if model == "power_law" else -slope
    pref = math.exp(intercept) if intercept < 709.0 else math.inf
    return FitResult(model, float(param), pref, r2, int(n.size), float(intercept))


def fit_scaling(n_values, i_values, model: str) -> FitResult:
    """Fit ``I = C N^p`` (``model='power_law'``) or ``I = C e^{-a N}`` (``'exponential'``).

    Raises
    ------
    DegenerateFitError
        Fewer than four points or any ``I <= 0``.
    """
    i = np.asarray(i_values, dtype=float)
    if np.any(~(i > 0)):
        raise DegenerateFitError("all currents must be positive for a log fit")
    return fit_scaling_log(n_values, np.log(i), model)


def ndqpt_scan(
    p: ModelParams,
    s: SelfEnergyModel | None,
    lc: LeadConfig,
    mu_d_grid,
    n_sites: int | None = None,
    workers: int | None = None,
) -> NdqptCurve:
    """``sqrt(N) I_+(mu_d)`` on a grid of drive chemical potentials."""
    if n_sites is not None:
        p = p.with_(n_sites=n_sites)
    n = p.n_sites
    mu = np.asarray(mu_d_grid, dtype=float)

    def one(m):
        return current_nonmarkovian(p, s, lc, float(m), "+")

    workers = worker_count() if workers is None else workers
    if workers > 1 and mu.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            res = list(ex.map(one, mu))
    else:
        res = [one(m) for m in mu]
    scale = math.sqrt(n)
    vals = np.array([max(r.value, 0.0) * scale for r in res])
    errs = np.array([r.quadrature_error * scale for r in res])
    return NdqptCurve(mu, vals, n, errs)


def crossover_location(curve: NdqptCurve) -> float:
    """``mu_d`` at the maximum of the finite-difference slope of the scaled current."""
    mu, y = curve.mu_d_values, curve.scaled_current
    if mu.size < 3:
        raise ValueError("need at least three grid points")
    d = np.gradient(y, mu)
    return float(mu[int(np.argmax(d))])


def skin_measure(h_matrix, cond_max: float = 1e12) -> float:
    """Mean centre of mass of the right eigenvectors, in ``[1, N]``.

    A reciprocal chain gives ``(N + 1) / 2``; skin modes pile up at one edge.

    Raises
    ------
    DefectiveMatrixError
        If the eigenvector matrix has condition number above ``cond_max``.
    """
    h = np.asarray(h_matrix)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("h_matrix must be square")
    n = h.shape[0]
    _, v = np.linalg.eig(h)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > cond_max:
        raise DefectiveMatrixError(f"eigenvector condition number {cond:.3e} exceeds {cond_max:.1e}")
    w = np.abs(v) ** 2
    w /= w.sum(axis=0, keepdims=True)
    sites = np.arange(1, n + 1)
    return float(np.mean(sites @ w))
