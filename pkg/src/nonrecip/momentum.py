"""Thermodynamic-limit Green's function, spectral function and the dissipationless mode."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMatrixError
from .model import (
    ClosedFormSelfEnergy,
    ConstantSelfEnergy,
    FrozenGamma,
    ModelParams,
    SelfEnergyModel,
    default_self_energy,
    gamma_of_z,
)
from .quadrature import integrate

__all__ = [
    "DissipationlessMode",
    "SpectralGrid",
    "PoleError",
    "dispersion",
    "momentum_greens",
    "spectral_function",
    "spectral_heatmap",
    "dissipationless_mode",
    "spectral_weight",
    "quasiparticle_poles",
    "local_maxima",
    "fwhm",
]

POLE_TOL = 1e-12
POLE_ETA = 1e-6


class PoleError(SingularMatrixError):
    """Evaluation exactly on the undamped pole at ``(k*, omega*)``."""


@dataclass(frozen=True)
class DissipationlessMode:
    k_star: float
    omega_star: float


@dataclass(frozen=True)
class SpectralGrid:
    """``A(k, omega)`` sampled on a tensor grid; ``a_values[i, j]`` is at ``(k_i, omega_j)``."""

    k_values: np.ndarray
    omega_values: np.ndarray
    a_values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def rows(self):
        """Flattened ``(k, omega, A)`` triples, k-major."""
        kk, ww = np.meshgrid(self.k_values, self.omega_values, indexing="ij")
        return np.column_stack([kk.ravel(), ww.ravel(), self.a_values.ravel()])


def dispersion(p: ModelParams, s: SelfEnergyModel | None, k, z):
    """``eps(k, z) = delta_c - 2 g cos k - i Gamma(z) (1 + cos(k + phi))``."""
    k = np.asarray(k, dtype=float)
    return p.delta_c - 2.0 * p.g * np.cos(k) - 1j * gamma_of_z(p, s, z) * (1.0 + np.cos(k + p.phi))


def momentum_greens(p: ModelParams, s: SelfEnergyModel | None, k, omega, regularize: bool = False):
    """``G(k, omega) = 1 / (omega - eps(k, omega))`` on the real axis.

    The only real-axis pole is the undamped mode at ``(k*, omega*)``. It raises
    :class:`PoleError` unless ``regularize`` is set, in which case the
    offending points are evaluated at ``omega + i * 1e-6 g``.
    """
    z = np.asarray(p.retarded(omega))
    k = np.asarray(k, dtype=float)
    den = z - dispersion(p, s, k, z)
    hit = np.abs(den) < POLE_TOL * p.g
    if np.any(hit):
        if not regularize:
            raise PoleError("omega - eps(k, omega) vanishes; offset omega by eta")
        zb = np.broadcast_to(z, den.shape) + 1j * POLE_ETA * p.g
        kb = np.broadcast_to(k, den.shape)
        den = np.where(hit, zb - dispersion(p, s, kb, zb), den)
    return 1.0 / den


def spectral_function(p: ModelParams, s: SelfEnergyModel | None, k, omega):
    return -momentum_greens(p, s, k, omega, regularize=True).imag / math.pi


def spectral_heatmap(p: ModelParams, s: SelfEnergyModel | None, k_grid=None, omega_grid=None) -> SpectralGrid:
    """Tabulate ``A(k, omega) = -Im G(k, omega) / pi``.

    Defaults: 401 momenta on ``[-pi, pi]`` and 801 frequencies on
    ``[delta_c - 3g, delta_c + 3g]``.
    """
    if k_grid is None:
        k_grid = np.linspace(-math.pi, math.pi, 401)
    if omega_grid is None:
        omega_grid = np.linspace(p.delta_c - 3 * p.g, p.delta_c + 3 * p.g, 801)
    k_grid = np.asarray(k_grid, dtype=float)
    omega_grid = np.asarray(omega_grid, dtype=float)
    if np.any(np.diff(k_grid) <= 0) or np.any(np.diff(omega_grid) <= 0):
        raise ValueError("grids must be strictly increasing")
    a = spectral_function(p, s, k_grid[:, None], omega_grid[None, :])
    return SpectralGrid(k_grid, omega_grid, a)


def dissipationless_mode(p: ModelParams) -> DissipationlessMode:
    """Momentum ``k* = pi - phi`` (wrapped into (-pi, pi]) and ``omega* = delta_c - 2g cos k*``."""
    k = math.pi - p.phi
    k = math.remainder(k, 2 * math.pi)
    if k <= -math.pi:
        k += 2 * math.pi
    return DissipationlessMode(k, p.delta_c - 2.0 * p.g * math.cos(k))


def quasiparticle_poles(p: ModelParams, s: SelfEnergyModel | None, k: float):
    """Complex roots of ``omega - eps(k, omega) = 0`` when they are available in closed form.

    For a constant self-energy the condition is a quadratic in omega; for a
    frozen dissipation rate it is linear. Returns an empty array for a
    general closed-form self-energy.
    """
    if s is None:
        s = default_self_energy(p)
    e0 = p.delta_c - 2.0 * p.g * math.cos(k)
    c = 1.0 + math.cos(k + p.phi)
    if isinstance(s, FrozenGamma):
        return np.array([e0 - 1j * s.value * c])
    if isinstance(s, ConstantSelfEnergy):
        sig = s.value
        if p.g_b == 0:
            return np.array([complex(e0)])
        # (w - e0)(i(db - w) + sig) + 2 i gb^2 c = 0
        coeffs = [-1j, 1j * p.delta_b + sig + 1j * e0, -e0 * (1j * p.delta_b + sig) + 2j * p.g_b**2 * c]
        return np.roots(coeffs)
    return np.array([], dtype=complex)


def _pole_breakpoints(p, s, k, lo, hi):
    pts = [lo, hi]
    poles = quasiparticle_poles(p, s, k)
    centres = [pl.real for pl in poles]
    widths = [max(abs(pl.imag), POLE_ETA * p.g) for pl in poles]
    if not centres:
        centres = [p.delta_c - 2.0 * p.g * math.cos(k), p.delta_b]
        widths = [POLE_ETA * p.g, POLE_ETA * p.g]
    for c, w in zip(centres, widths):
        pts.append(c)
        step = w
        while step < hi - lo:
            pts.extend([c - step, c + step])
            step *= 10.0
    pts = np.array(pts)
    return np.unique(pts[(pts >= lo) & (pts <= hi)])


def spectral_weight(p: ModelParams, s: SelfEnergyModel | None, k: float, window=None, rtol=1e-10):
    """``int A(k, omega) d omega`` over ``window`` (default ``delta_c +/- 12 g``).

    Breakpoints cluster geometrically around the quasiparticle poles so that
    arbitrarily narrow peaks near ``k*`` are resolved. A pole narrower than
    ``1e-6 g`` (the undamped mode itself) is a delta function; it is
    integrated with that retarded broadening, which changes the weight only
    at order ``1e-6``.
    """
    if window is None:
        window = (p.delta_c - 12 * p.g, p.delta_c + 12 * p.g)
    lo, hi = window
    poles = quasiparticle_poles(p, s, k)
    if poles.size and np.min(np.abs(poles.imag)) < POLE_ETA * p.g:
        p = p.with_(eta=max(p.eta, POLE_ETA * p.g))
    pts = _pole_breakpoints(p, s, k, lo, hi)
    res = integrate(lambda w: spectral_function(p, s, k, w), pts, rtol=rtol, atol=1e-14)
    return res.value, res.error


def local_maxima(values) -> np.ndarray:
    """Indices of strict interior local maxima."""
    v = np.asarray(values, dtype=float)
    return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1


def fwhm(omega, values, peak_index: int) -> float:
    """Full width at half maximum around ``peak_index`` by linear interpolation."""
    w = np.asarray(omega, dtype=float)
    v = np.asarray(values, dtype=float)
    half = v[peak_index] / 2.0
    i = peak_index
    while i > 0 and v[i] > half:
        i -= 1
    j = peak_index
    while j < v.size - 1 and v[j] > half:
        j += 1
    if v[i] > half or v[j] > half:
        raise ValueError("peak does not fall to half maximum inside the grid")
    left = w[i] + (half - v[i]) * (w[i + 1] - w[i]) / (v[i + 1] - v[i])
    right = w[j - 1] + (half - v[j - 1]) * (w[j] - w[j - 1]) / (v[j] - v[j - 1])
    return right - left
