"""Physical parameters, bath self-energies and the frequency-dependent couplings.

Every quantity here is a pure function of immutable inputs and broadcasts over
arrays of complex frequency ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from .errors import SingularDenominatorError

__all__ = [
    "ModelParams",
    "ConstantSelfEnergy",
    "ClosedFormSelfEnergy",
    "FrozenGamma",
    "SelfEnergyModel",
    "default_self_energy",
    "gamma_of_z",
    "hoppings",
    "hoppings_from_gamma",
    "markovian_hoppings",
    "markovian_gamma",
    "onsite_energy",
    "lattice_hamiltonian",
    "flux_hamiltonians",
    "gauge_unitary",
]

# relative threshold on |i(delta_b - z) + sigma(z)|
SINGULAR_DENOMINATOR_TOL = 1e-14


@dataclass(frozen=True)
class ModelParams:
    """Couplings and size of the chain-plus-auxiliary-site setup.

    Energies are in units of the chain hopping ``g``. ``eta`` is an optional
    retarded shift added to real frequencies (``omega + i*eta``); it is zero by
    default because the engineered dissipation already regularizes the
    inverse.
    """

    g: float = 1.0
    g_b: float = 0.3
    phi: float = 2.0 * math.pi / 3.0
    delta_c: float = 0.0
    delta_b: float = -0.5
    kappa: float = 0.25
    gamma: float = 0.5
    n_sites: int = 64
    beta: float = math.inf
    eta: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        for name in ("g_b", "kappa", "gamma", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive (or inf), got {self.beta}")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def retarded(self, omega):
        """Map real frequencies onto the evaluation contour ``omega + i*eta``."""
        return np.asarray(omega, dtype=float) + 1j * self.eta


@dataclass(frozen=True)
class ConstantSelfEnergy:
    """Frequency-independent bath self-energy, ``Sigma(z) = value``."""

    value: float

    def __call__(self, z):
        return np.full(np.shape(z), complex(self.value))


@dataclass(frozen=True)
class ClosedFormSelfEnergy:
    """User-supplied analytic self-energy ``z -> Sigma(z)`` (upper half plane)."""

    evaluator: Callable = field(compare=False)
    name: str = "closed-form"

    def __call__(self, z):
        return np.asarray(self.evaluator(z), dtype=complex) * np.ones(np.shape(z))


@dataclass(frozen=True)
class FrozenGamma:
    """Markovian limit: the dissipation rate is pinned to a constant.

    Not a bath self-energy; it bypasses the auxiliary-site propagator so that
    every downstream routine runs the identical code path with ``Gamma(z)``
    replaced by ``value``.
    """

    value: float


SelfEnergyModel = Union[ConstantSelfEnergy, ClosedFormSelfEnergy, FrozenGamma]


def default_self_energy(p: ModelParams) -> ConstantSelfEnergy:
    return ConstantSelfEnergy(p.kappa / 2.0)


def markovian_gamma(p: ModelParams) -> float:
    """Markovian dissipation rate ``g_b**2 / g``."""
    return p.g_b**2 / p.g


def gamma_of_z(p: ModelParams, s: SelfEnergyModel | None, z):
    """Frequency-dependent dissipation rate ``2 g_b^2 / (i(delta_b - z) + Sigma(z))``.

    Parameters
    ----------
    p : ModelParams
    s : self-energy model, or None for the constant ``kappa/2`` bath
    z : complex scalar or array

    Raises
    ------
    SingularDenominatorError
        If the denominator vanishes (``kappa = 0`` evaluated at ``z = delta_b``).
    """
    z = np.asarray(z, dtype=complex)
    if isinstance(s, FrozenGamma):
        out = np.full(z.shape, complex(s.value))
        return out if out.ndim else out[()]
    if s is None:
        s = default_self_energy(p)
    if p.g_b == 0:
        out = np.zeros(z.shape, dtype=complex)
        return out if out.ndim else out[()]
    den = 1j * (p.delta_b - z) + s(z)
    if np.any(np.abs(den) < SINGULAR_DENOMINATOR_TOL * p.g):
        raise SingularDenominatorError(
            f"auxiliary propagator is singular at z={z[np.abs(den) < SINGULAR_DENOMINATOR_TOL * p.g].ravel()[0]}"
        )
    out = 2.0 * p.g_b**2 / den
    return out if out.ndim else out[()]


def hoppings_from_gamma(p: ModelParams, gamma):
    """``t_pm = -g - i exp(-/+ i phi) gamma / 2`` for a given dissipation rate."""
    gamma = np.asarray(gamma, dtype=complex)
    t_plus = -p.g - 1j * np.exp(-1j * p.phi) * gamma / 2.0
    t_minus = -p.g - 1j * np.exp(1j * p.phi) * gamma / 2.0
    if t_plus.ndim == 0:
        return t_plus[()], t_minus[()]
    return t_plus, t_minus


def hoppings(p: ModelParams, s: SelfEnergyModel | None, z):
    """Left-to-right and right-to-left hoppings ``(t_plus(z), t_minus(z))``."""
    return hoppings_from_gamma(p, gamma_of_z(p, s, z))


def markovian_hoppings(p: ModelParams, gamma_const: float | None = None):
    """Frequency-independent hoppings of the Markovian model.

    ``gamma_const`` defaults to ``g_b**2 / g``.
    """
    if gamma_const is None:
        gamma_const = markovian_gamma(p)
    if gamma_const < 0:
        raise ValueError("gamma_const must be non-negative")
    return hoppings_from_gamma(p, gamma_const)


def onsite_energy(p: ModelParams, s: SelfEnergyModel | None, z):
    """Uniform on-site term ``eps(z) = delta_c - i Gamma(z)``."""
    return p.delta_c - 1j * gamma_of_z(p, s, z)


def lattice_hamiltonian(p: ModelParams, theta: float | None = None, edge_aux: bool = False):
    """Hermitian single-particle matrix of the chain plus auxiliary sites.

    Basis order is ``c_1..c_N`` followed by the auxiliary sites. Without
    ``theta`` the gauge-fixed couplings are used (real chain bonds, phase
    ``phi`` on every ``b_j -> c_{j+1}`` bond). With ``theta`` every bond of each
    triangle carries the flux phase ``theta`` instead.

    ``edge_aux`` appends two extra auxiliary sites, one attached only to ``c_1``
    (through the phased bond) and one only to ``c_N``, so every chain site sees
    two auxiliary neighbours.
    """
    n = p.n_sites
    n_aux = n + 1 if edge_aux else n - 1
    dim = n + n_aux
    h = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(n)
    h[idx, idx] = p.delta_c
    h[n + np.arange(n_aux), n + np.arange(n_aux)] = p.delta_b

    if theta is None:
        chain, cb, bc = 1.0, 1.0, np.exp(1j * p.phi)
    else:
        chain, cb, bc = np.exp(-1j * theta), np.exp(1j * theta), np.exp(1j * theta)

    for j in range(n - 1):
        h[j, j + 1] = -p.g * chain
        h[j + 1, j] = np.conj(h[j, j + 1])

    # aux site a couples c_left (via c^dag b) and c_right (via b^dag c)
    first = -1 if edge_aux else 0
    for a in range(n_aux):
        left, right = a + first, a + first + 1
        b = n + a
        if 0 <= left < n:
            h[left, b] = p.g_b * cb
            h[b, left] = np.conj(h[left, b])
        if 0 <= right < n:
            h[b, right] = p.g_b * bc
            h[right, b] = np.conj(h[b, right])
    return h


def flux_hamiltonians(p: ModelParams, theta: float):
    """Flux-threaded lattice and its gauge-transformed counterpart.

    Returns ``(flux_form, transformed_form)``: the first carries phase
    ``theta`` on all three bonds of every triangle, the second has real chain
    bonds and a single phase ``3*theta`` on each auxiliary-to-next-site bond.
    The two are related by the diagonal unitary ``c_n -> e^{i n theta} c_n``,
    ``b_n -> e^{i (n-1) theta} b_n``.
    """
    flux_form = lattice_hamiltonian(p, theta=theta)
    transformed_form = lattice_hamiltonian(p.with_(phi=3.0 * theta))
    return flux_form, transformed_form


def gauge_unitary(p: ModelParams, theta: float):
    """Diagonal unitary ``U`` with ``flux_form = U transformed_form U^dag``."""
    n = p.n_sites
    phases = np.concatenate([np.arange(1, n + 1) * theta, np.arange(0, n - 1) * theta])
    return np.diag(np.exp(1j * phases))
