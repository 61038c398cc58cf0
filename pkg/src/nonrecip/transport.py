"""Bosonic transmission, fermionic steady-state currents and the Markovian Lyapunov solver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from .errors import DefectiveMatrixError
from .greens import corner_log_abs2, scaling_factors
from .model import (
    FrozenGamma,
    ModelParams,
    SelfEnergyModel,
    hoppings_from_gamma,
    markovian_gamma,
)
from .momentum import dissipationless_mode
from .quadrature import integrate_real_line

__all__ = [
    "LeadConfig",
    "CorrelationMatrix",
    "CurrentResult",
    "transmission",
    "fermi",
    "markovian_occupation",
    "current_nonmarkovian",
    "current_markovian_negf",
    "markovian_hamiltonian",
    "source_matrix",
    "lyapunov_steady_state",
    "lyapunov_vectorized",
    "current_markovian_lyapunov",
]

DIRECTIONS = {"+": "left_to_right", "-": "right_to_left"}
CURRENT_RTOL = 1e-8
MAX_VECTORIZED_SITES = 48


@dataclass(frozen=True)
class LeadConfig:
    """Boundary leads in the wide-band limit.

    ``mu_left``/``mu_right`` may be ``-inf`` (empty lead); ``beta`` may be ``inf``.
    """

    mu_left: float = -math.inf
    mu_right: float = -math.inf
    beta: float = math.inf
    gamma: float = 0.5

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @classmethod
    def from_params(cls, p: ModelParams, mu_left=-math.inf, mu_right=-math.inf):
        return cls(mu_left=mu_left, mu_right=mu_right, beta=p.beta, gamma=p.gamma)

    def driving(self, mu_d: float, direction: str) -> "LeadConfig":
        """Lead configuration with the source lead at ``mu_d`` and the drain empty."""
        if direction == "+":
            return LeadConfig(mu_d, -math.inf, self.beta, self.gamma)
        if direction == "-":
            return LeadConfig(-math.inf, mu_d, self.beta, self.gamma)
        raise ValueError("direction must be '+' or '-'")


@dataclass(frozen=True)
class CorrelationMatrix:
    """``c[l, m] = <c_l^dag c_m>`` in the steady state."""

    c: np.ndarray
    residual: float
    method: str


@dataclass(frozen=True)
class CurrentResult:
    """Steady-state particle current in units of ``g``.

    ``log_value`` is kept alongside ``value`` because exponentially suppressed
    currents underflow a double at large N.
    """

    value: float
    direction: str
    quadrature_error: float
    log_value: float = -math.inf
    n_evaluations: int = 0


def _check_direction(direction):
    if direction not in DIRECTIONS:
        raise ValueError("direction must be '+' (left to right) or '-' (right to left)")


def transmission(p: ModelParams, s: SelfEnergyModel | None, omega, direction: str = "+"):
    """``|G_{N1}(omega)|^2`` (direction '+') or ``|G_{1N}(omega)|^2`` ('-') with leads attached."""
    _check_direction(direction)
    return np.exp(corner_log_abs2(p, s, omega, direction, leads=True))


def fermi(omega, mu, beta):
    """Fermi function; ``beta = inf`` is a sharp step, ``mu = -inf`` gives zero."""
    omega = np.asarray(omega, dtype=float)
    if mu == -math.inf:
        return np.zeros_like(omega)
    if math.isinf(beta):
        return np.where(omega < mu, 1.0, np.where(omega == mu, 0.5, 0.0))
    return expit(-beta * (omega - mu))


def markovian_occupation(p: ModelParams, mu: float, beta: float) -> float:
    """Lead occupation seen by the local master equation, pinned at ``delta_c``."""
    return float(fermi(p.delta_c, mu, beta))


def _integrate_log(log_integrand, breakpoints, lower, upper, rtol):
    """Integrate ``exp(log_integrand)`` with a common scale pulled out.

    Returns ``(value, error, log_value, n_eval)``. The achieved error is
    below ``rtol * value``, stricter than any absolute floor.
    """
    probe = np.linspace(max(lower, breakpoints[0]), min(upper, breakpoints[-1]), 257)
    probe = np.unique(np.concatenate([probe, [b for b in breakpoints if lower <= b <= upper]]))
    shift = float(np.max(log_integrand(probe)))
    if not np.isfinite(shift):
        return 0.0, 0.0, -math.inf, probe.size
    # the scaled integrand peaks at 1, so a purely relative target keeps
    # log_value accurate even for currents that underflow a double
    res = integrate_real_line(
        lambda w: np.exp(log_integrand(w) - shift),
        breakpoints,
        lower=lower,
        upper=upper,
        rtol=rtol,
        atol=1e-300,
    )
    if res.value <= 0:
        return 0.0, 0.0, -math.inf, res.n_evaluations
    log_value = math.log(res.value) + shift
    scale = math.exp(shift) if shift < 700 else math.inf
    return res.value * scale, res.error * scale, log_value, res.n_evaluations


def _breakpoints(p, s, mu_hi=None):
    w = 10.0 * (p.kappa + p.gamma + p.g_b)
    mode = dissipationless_mode(p)
    pts = [
        p.delta_c - 2 * p.g - w,
        p.delta_c - 2 * p.g,
        p.delta_c + 2 * p.g,
        p.delta_c + 2 * p.g + w,
        mode.omega_star,
    ]
    if not isinstance(s, FrozenGamma):
        pts.append(p.delta_b)
    if mu_hi is not None:
        pts.append(mu_hi)
    return sorted(set(pts))


def current_nonmarkovian(
    p: ModelParams,
    s: SelfEnergyModel | None,
    lc: LeadConfig,
    mu_d: float,
    direction: str = "+",
    rtol: float = CURRENT_RTOL,
) -> CurrentResult:
    """``I = gamma^2 int d omega/2pi n_F(omega; mu_d) |G(omega)|^2`` through the chain.

    The source lead sits at ``mu_d`` and the drain is empty. Frequencies below
    the band plus a margin ``10 (kappa + gamma + g_b)`` are included up to
    ``-inf`` through a mapped tail; at ``beta = inf`` the upper limit is
    ``mu_d`` exactly.
    """
    _check_direction(direction)
    if lc.gamma == 0 or mu_d == -math.inf:
        return CurrentResult(0.0, DIRECTIONS[direction], 0.0)
    pl = p.with_(gamma=lc.gamma)
    beta = lc.beta

    def log_integrand(w):
        w = np.asarray(w, dtype=float)
        lg = corner_log_abs2(pl, s, w, direction)
        if math.isinf(beta):
            return lg
        return lg - np.logaddexp(0.0, beta * (w - mu_d))

    if math.isinf(beta):
        upper = mu_d
        pts = [x for x in _breakpoints(pl, s) if x < mu_d] + [mu_d]
    else:
        upper = math.inf
        pts = _breakpoints(pl, s, mu_d) + [mu_d + 40.0 / beta]
        pts = sorted(set(pts))
    value, err, log_value, n_eval = _integrate_log(log_integrand, pts, -math.inf, upper, rtol)
    pref = lc.gamma**2 / (2 * math.pi)
    return CurrentResult(
        value=value * pref,
        direction=DIRECTIONS[direction],
        quadrature_error=err * pref,
        log_value=log_value + math.log(pref) if np.isfinite(log_value) else -math.inf,
        n_evaluations=n_eval,
    )


def current_markovian_negf(
    p: ModelParams,
    lc: LeadConfig,
    mu_d: float,
    direction: str = "+",
    gamma_const: float | None = None,
    rtol: float = CURRENT_RTOL,
) -> CurrentResult:
    """``I^M = gamma^2 n(mu_d) int_{-inf}^{inf} d omega/2pi |G^M(omega)|^2``.

    ``n(mu_d)`` is the Fermi factor evaluated at ``delta_c``, matching the
    local master equation used for the Lyapunov route.
    """
    _check_direction(direction)
    if gamma_const is None:
        gamma_const = markovian_gamma(p)
    occ = markovian_occupation(p, mu_d, lc.beta)
    if lc.gamma == 0 or occ == 0:
        return CurrentResult(0.0, DIRECTIONS[direction], 0.0)
    pl = p.with_(gamma=lc.gamma)
    s = FrozenGamma(gamma_const)
    value, err, log_value, n_eval = _integrate_log(
        lambda w: corner_log_abs2(pl, s, w, direction), _breakpoints(pl, s), -math.inf, math.inf, rtol
    )
    pref = lc.gamma**2 * occ / (2 * math.pi)
    return CurrentResult(
        value=value * pref,
        direction=DIRECTIONS[direction],
        quadrature_error=err * pref,
        log_value=log_value + math.log(pref) if np.isfinite(log_value) else -math.inf,
        n_evaluations=n_eval,
    )


def markovian_hamiltonian(p: ModelParams, gamma_const: float | None = None, lead_gamma: float = 0.0) -> np.ndarray:
    """Dense Markovian ``H_eff = H_HN + (delta_c - i Gamma) I - i Y``.

    ``Y`` holds ``lead_gamma / 2`` on sites 1 and N, the damping produced by
    the local lead dissipators; the same ``-i gamma/2`` enters the NEGF route.
    ``t_plus`` sits on the sub-diagonal (hopping from site j to j+1).
    """
    if gamma_const is None:
        gamma_const = markovian_gamma(p)
    t_plus, t_minus = hoppings_from_gamma(p, gamma_const)
    n = p.n_sites
    h = np.diag(np.full(n, p.delta_c - 1j * gamma_const, dtype=complex))
    idx = np.arange(n - 1)
    h[idx, idx + 1] = t_minus
    h[idx + 1, idx] = t_plus
    h[0, 0] -= 0.5j * lead_gamma
    h[-1, -1] -= 0.5j * lead_gamma
    return h


def source_matrix(p: ModelParams, lc: LeadConfig) -> np.ndarray:
    """``Q`` with ``gamma n(mu_1)`` and ``gamma n(mu_N)`` on the end sites."""
    n = p.n_sites
    q = np.zeros((n, n), dtype=complex)
    q[0, 0] = lc.gamma * markovian_occupation(p, lc.mu_left, lc.beta)
    q[-1, -1] = lc.gamma * markovian_occupation(p, lc.mu_right, lc.beta)
    return q


def _lyapunov_residual(h, x, q):
    # x[m, l] = <c_l^dag c_m> obeys 0 = -i H x + i x H^dag + Q
    r = -1j * (h @ x) + 1j * (x @ h.conj().T) + q
    return float(np.max(np.abs(r)))


def lyapunov_vectorized(h: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Brute-force solve of ``H X - X H^dag = -i Q`` via the Kronecker form."""
    n = h.shape[0]
    if n > MAX_VECTORIZED_SITES:
        raise ValueError(f"vectorized solve limited to N <= {MAX_VECTORIZED_SITES}")
    eye = np.eye(n)
    big = np.kron(eye, h) - np.kron(h.conj(), eye)
    vec = np.linalg.solve(big, (-1j * q).reshape(-1, order="F"))
    return vec.reshape((n, n), order="F")


def _lyapunov_eig(h, q, cond_max=1e10):
    d, v = np.linalg.eig(h)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > cond_max:
        raise DefectiveMatrixError(f"eigenvector condition number {cond:.3e}")
    vinv = np.linalg.inv(v)
    qt = vinv @ q @ vinv.conj().T
    y = -1j * qt / (d[:, None] - d.conj()[None, :])
    return v @ y @ v.conj().T


def lyapunov_steady_state(
    p: ModelParams,
    lc: LeadConfig,
    gamma_const: float | None = None,
    method: str = "auto",
) -> CorrelationMatrix:
    """Steady-state correlations of the Markovian chain with local leads.

    Solves ``0 = -i H X + i X H^dag + Q`` for ``X[m, l] = <c_l^dag c_m>``
    and returns its transpose so that ``c[l, m] = <c_l^dag c_m>``.

    ``method``: ``'eig'`` diagonalizes ``H`` (raises on ill-conditioned
    eigenvectors), ``'schur'`` uses a Bartels-Stewart Sylvester solve,
    ``'vectorized'`` the Kronecker linear system, ``'auto'`` tries ``'eig'``
    and falls back to ``'schur'``.
    """
    h = markovian_hamiltonian(p, gamma_const, lead_gamma=lc.gamma)
    q = source_matrix(p, lc)
    if method == "auto":
        try:
            x, used = _lyapunov_eig(h, q), "eig"
        except DefectiveMatrixError:
            x, used = scipy.linalg.solve_sylvester(h, -h.conj().T, -1j * q), "schur"
    elif method == "eig":
        x, used = _lyapunov_eig(h, q), "eig"
    elif method == "schur":
        x, used = scipy.linalg.solve_sylvester(h, -h.conj().T, -1j * q), "schur"
    elif method == "vectorized":
        x, used = lyapunov_vectorized(h, q), "vectorized"
    else:
        raise ValueError(f"unknown method {method!r}")
    x = 0.5 * (x + x.conj().T)
    return CorrelationMatrix(c=x.T.copy(), residual=_lyapunov_residual(h, x, q), method=used)


def current_markovian_lyapunov(
    p: ModelParams,
    lc: LeadConfig,
    mu_d: float,
    direction: str = "+",
    gamma_const: float | None = None,
    method: str = "auto",
) -> CurrentResult:
    """``I = gamma <c_N^dag c_N>`` ('+') or ``gamma <c_1^dag c_1>`` ('-')."""
    _check_direction(direction)
    drive = lc.driving(mu_d, direction)
    if drive.gamma == 0:
        return CurrentResult(0.0, DIRECTIONS[direction], 0.0)
    corr = lyapunov_steady_state(p, drive, gamma_const, method=method)
    site = -1 if direction == "+" else 0
    occ = float(corr.c[site, site].real)
    value = drive.gamma * occ
    return CurrentResult(
        value=value,
        direction=DIRECTIONS[direction],
        quadrature_error=0.0,
        log_value=math.log(value) if value > 0 else -math.inf,
    )
