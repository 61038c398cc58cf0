"""Frozen-frequency tridiagonal matrix and retarded Green's functions.

Three routes to ``G(z) = M(z)^{-1}`` are provided:

* ``greens_dense`` - dense LU inverse, the reference path;
* ``greens_element`` / ``greens_tridiagonal`` - minor recursions in log form,
  O(N) per element and free of overflow;
* ``extended_greens_block`` - invert the full chain-plus-auxiliary lattice and
  keep the chain block, which checks that eliminating the auxiliary sites is
  exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import SingularMatrixError
from .model import (
    FrozenGamma,
    ModelParams,
    SelfEnergyModel,
    default_self_energy,
    gamma_of_z,
    hoppings_from_gamma,
    lattice_hamiltonian,
)

__all__ = [
    "EffectiveHamiltonian",
    "TransferMatrix",
    "ScalingFactors",
    "build_matrix",
    "greens_dense",
    "greens_element",
    "greens_tridiagonal",
    "corner_log_abs2",
    "extended_greens_block",
    "transfer_matrix",
    "scaling_factors",
    "dense_residual",
]

MAX_DENSE_SITES = 4096
MAX_RECURSION_SITES = 10**7
PIVOT_TOL = 1e-300


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Compact form of ``M(z) = z - H_eff(z) - Sigma_leads``.

    ``diag`` is the bulk diagonal ``z - eps(z)``; ``edge_corrections`` and
    ``lead_corrections`` are added to entries (1,1) and (N,N).
    """

    diag: complex
    off_upper: complex
    off_lower: complex
    n_sites: int
    lead_corrections: tuple = (0j, 0j)
    edge_corrections: tuple = (0j, 0j)

    @property
    def t_plus(self) -> complex:
        return -self.off_lower

    @property
    def t_minus(self) -> complex:
        return -self.off_upper

    def diagonal(self) -> np.ndarray:
        d = np.full(self.n_sites, self.diag, dtype=complex)
        d[0] += self.lead_corrections[0] + self.edge_corrections[0]
        d[-1] += self.lead_corrections[1] + self.edge_corrections[1]
        return d

    def to_dense(self) -> np.ndarray:
        n = self.n_sites
        m = np.diag(self.diagonal())
        idx = np.arange(n - 1)
        m[idx, idx + 1] = self.off_upper
        m[idx + 1, idx] = self.off_lower
        return m


def build_matrix(
    p: ModelParams,
    s: SelfEnergyModel | None,
    z: complex,
    leads: bool = True,
    uniform_edges: bool = True,
) -> EffectiveHamiltonian:
    """Assemble ``M(z)`` for a single complex frequency.

    With ``leads`` the wide-band lead self-energies ``-i gamma/2`` enter sites
    1 and N. ``uniform_edges=False`` gives the end sites only half the bulk
    dissipation, which is what eliminating N-1 auxiliary sites produces
    exactly (each end site touches a single auxiliary site).
    """
    z = complex(z)
    gam = complex(gamma_of_z(p, s, z))
    t_plus, t_minus = hoppings_from_gamma(p, gam)
    lead = 0.5j * p.gamma if leads else 0j
    edge = 0j if uniform_edges else -0.5j * gam
    return EffectiveHamiltonian(
        diag=z - p.delta_c + 1j * gam,
        off_upper=-complex(t_minus),
        off_lower=-complex(t_plus),
        n_sites=p.n_sites,
        lead_corrections=(lead, lead),
        edge_corrections=(edge, edge),
    )


def _as_dense(h) -> np.ndarray:
    if isinstance(h, EffectiveHamiltonian):
        return h.to_dense()
    return np.asarray(h, dtype=complex)


def greens_dense(h) -> np.ndarray:
    """Dense inverse of ``M`` by LU with partial pivoting.

    ``h`` is an :class:`EffectiveHamiltonian` or any square matrix.
    """
    m = _as_dense(h)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError("expected a square matrix")
    if isinstance(h, EffectiveHamiltonian) and n > MAX_DENSE_SITES:
        raise ValueError(f"dense inversion limited to N <= {MAX_DENSE_SITES}")
    with warnings.catch_warnings():
        # exact singularity is reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularMatrixError("zero pivot in LU factorization")
    return scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=complex))


def dense_residual(h, g) -> float:
    """``max |M G - I|``."""
    m = _as_dense(h)
    return float(np.max(np.abs(m @ g - np.eye(m.shape[0]))))


def _log_minors(h: EffectiveHamiltonian):
    """Log leading minors ``log theta_k`` (k=0..N) and trailing ``log phi_k`` (k=1..N+1)."""
    n = h.n_sites
    if n > MAX_RECURSION_SITES:
        raise ValueError(f"recursion limited to N <= {MAX_RECURSION_SITES}")
    d = h.diagonal()
    prod = np.full(n - 1, h.off_upper * h.off_lower, dtype=complex)
    fwd = _kernels.minor_ratios(d, prod)
    bwd = _kernels.minor_ratios(d[::-1].copy(), prod[::-1].copy())[::-1]
    if np.min(np.abs(fwd)) == 0 or np.min(np.abs(bwd)) == 0:
        raise SingularMatrixError("minor recursion hit an exactly singular leading block")
    log_theta = np.concatenate([[0j], np.cumsum(np.log(fwd))])
    # log_phi[k - 1] = log phi_k, with phi_{N+1} = 1
    log_phi = np.concatenate([np.cumsum(np.log(bwd)[::-1])[::-1], [0j]])
    return log_theta, log_phi


def _element_from_logs(h, log_theta, log_phi, row, col):
    # 1-based row/col; arrays broadcast
    n = h.n_sites
    row = np.asarray(row)
    col = np.asarray(col)
    lo = np.minimum(row, col)
    hi = np.maximum(row, col)
    with np.errstate(divide="ignore"):
        log_tp = np.log(complex(h.t_plus))
        log_tm = np.log(complex(h.t_minus))
    hop = np.where(row > col, (row - col) * log_tp, (col - row) * log_tm)
    hop = np.where(row == col, 0j, hop)
    log_g = hop + log_theta[lo - 1] + log_phi[hi] - log_theta[n]
    return np.exp(log_g)


def greens_element(
    p: ModelParams,
    s: SelfEnergyModel | None,
    z: complex,
    row: int,
    col: int,
    leads: bool = True,
    uniform_edges: bool = True,
) -> complex:
    """Single element ``[G(z)]_{row,col}`` (1-based) from the minor recursions."""
    n = p.n_sites
    if not (1 <= row <= n and 1 <= col <= n):
        raise IndexError(f"indices must lie in [1, {n}]")
    h = build_matrix(p, s, z, leads=leads, uniform_edges=uniform_edges)
    log_theta, log_phi = _log_minors(h)
    return complex(_element_from_logs(h, log_theta, log_phi, row, col))


def greens_tridiagonal(h: EffectiveHamiltonian) -> np.ndarray:
    """All N x N elements of ``M^{-1}`` from the minor recursions."""
    log_theta, log_phi = _log_minors(h)
    idx = np.arange(1, h.n_sites + 1)
    return _element_from_logs(h, log_theta, log_phi, idx[:, None], idx[None, :])


def corner_log_abs2(
    p: ModelParams,
    s: SelfEnergyModel | None,
    omega,
    direction: str = "+",
    leads: bool = True,
    use_numba: bool | None = None,
):
    """``log |G_{N1}(omega)|^2`` (``direction='+'``) or ``log |G_{1N}|^2`` ('-').

    Vectorized over real frequencies; the log form keeps exponentially small
    transmissions representable for any N.
    """
    z = p.retarded(omega)
    gam = np.asarray(gamma_of_z(p, s, z), dtype=complex)
    t_plus, t_minus = hoppings_from_gamma(p, gam)
    bulk = z - p.delta_c + 1j * gam
    end = bulk + (0.5j * p.gamma if leads else 0j)
    logdet, rmin = _kernels.corner_log_det(end, bulk, end, t_plus * t_minus, p.n_sites, use_numba=use_numba)
    if np.any(rmin == 0):
        raise SingularMatrixError("minor recursion hit an exactly singular leading block")
    t = t_plus if direction == "+" else t_minus
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")
    with np.errstate(divide="ignore"):
        return 2.0 * ((p.n_sites - 1) * np.log(np.abs(t)) - logdet.real)


def extended_greens_block(
    p: ModelParams,
    s: SelfEnergyModel | None,
    z: complex,
    edge_aux: bool = False,
) -> np.ndarray:
    """Chain block of the inverse of the full chain-plus-auxiliary lattice.

    The auxiliary diagonal is ``z - delta_b + i Sigma(z)``. No leads are
    attached. With ``edge_aux=False`` (N-1 auxiliary sites) the result equals
    the reduced Green's function with half dissipation on the end sites; with
    ``edge_aux=True`` (N+1 auxiliary sites) it equals the uniform one.
    """
    if isinstance(s, FrozenGamma):
        raise ValueError("the Markovian limit has no auxiliary-site representation")
    if s is None:
        s = default_self_energy(p)
    z = complex(z)
    h = lattice_hamiltonian(p, edge_aux=edge_aux)
    dim = h.shape[0]
    n = p.n_sites
    m = z * np.eye(dim, dtype=complex) - h
    aux = np.arange(n, dim)
    m[aux, aux] += 1j * complex(s(z))
    return greens_dense(m)[:n, :n]


@dataclass(frozen=True)
class TransferMatrix:
    """2x2 matrix generating the minor recursions: ``[[z - eps, -t+ t-], [1, 0]]``."""

    t11: complex
    t12: complex
    t21: complex = 1.0 + 0j
    t22: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([[self.t11, self.t12], [self.t21, self.t22]], dtype=complex)

    @property
    def det(self) -> complex:
        return self.t11 * self.t22 - self.t12 * self.t21

    @property
    def trace(self) -> complex:
        return self.t11 + self.t22

    def eigenvalues(self):
        """``(lambda_big, lambda_small)`` ordered by magnitude."""
        return _ordered_roots(self.t11, -self.t12)


def _ordered_roots(tr, det):
    # roots of lam^2 - tr*lam + det = 0, larger magnitude first
    tr = np.asarray(tr, dtype=complex)
    det = np.asarray(det, dtype=complex)
    disc = np.sqrt(tr * tr - 4.0 * det)
    l1 = (tr + disc) / 2.0
    l2 = (tr - disc) / 2.0
    big = np.where(np.abs(l1) >= np.abs(l2), l1, l2)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big != 0, det / big, 0j)
    return big, small


def transfer_matrix(p: ModelParams, s: SelfEnergyModel | None, z: complex) -> TransferMatrix:
    z = complex(z)
    gam = complex(gamma_of_z(p, s, z))
    t_plus, t_minus = hoppings_from_gamma(p, gam)
    return TransferMatrix(t11=z - p.delta_c + 1j * gam, t12=-complex(t_plus * t_minus))


@dataclass(frozen=True)
class ScalingFactors:
    """Spatial decay factors ``f_pm = |t_pm / lambda|`` per lattice step.

    Fields are scalars or arrays matching the input frequencies. ``degenerate``
    marks branch points where the two transfer-matrix eigenvalues have equal
    magnitude and no dominant one exists.
    """

    f_plus: np.ndarray
    f_minus: np.ndarray
    lambda_dominant: np.ndarray
    degenerate: np.ndarray


def scaling_factors(p: ModelParams, s: SelfEnergyModel | None, omega) -> ScalingFactors:
    z = p.retarded(omega)
    gam = gamma_of_z(p, s, z)
    t_plus, t_minus = hoppings_from_gamma(p, gam)
    big, small = _ordered_roots(z - p.delta_c + 1j * gam, t_plus * t_minus)
    mag = np.abs(big)
    degenerate = np.abs(mag - np.abs(small)) < 1e-10 * mag
    f_plus = np.abs(t_plus) / mag
    f_minus = np.abs(t_minus) / mag
    if np.ndim(f_plus) == 0:
        return ScalingFactors(float(f_plus), float(f_minus), complex(big), bool(degenerate))
    return ScalingFactors(f_plus, f_minus, big, degenerate)
