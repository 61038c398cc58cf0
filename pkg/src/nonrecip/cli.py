"""Command-line front end.

Usage: ``nonrecip <experiment> [--preset NAME] [--config FILE] [--key value ...]``

Exit codes: 0 success, 1 numerical failure (or a failed ``validate``),
2 bad configuration, 3 I/O failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .analysis import ndqpt_scan, worker_count
from .config import EXPERIMENTS, PRESETS, ConfigError, RunConfig, parse_config
from .errors import NonrecipError
from .greens import build_matrix, extended_greens_block, greens_dense, greens_tridiagonal, scaling_factors
from .model import FrozenGamma, flux_hamiltonians, gamma_of_z, markovian_gamma
from .momentum import dispersion, dissipationless_mode, spectral_heatmap
from .transport import (
    LeadConfig,
    current_markovian_lyapunov,
    current_markovian_negf,
    current_nonmarkovian,
    lyapunov_steady_state,
    lyapunov_vectorized,
    markovian_hamiltonian,
    source_matrix,
    transmission,
)

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
FLOAT_FMT = "%.12e"

USAGE = f"""usage: nonrecip <experiment> [--preset NAME] [--config FILE] [--key value ...]

experiments: {", ".join(EXPERIMENTS)}
presets:     {", ".join(PRESETS)}

common keys (energies in units of g):
  --g --g_b --phi --delta_c --delta_b --kappa --gamma --n --beta --eta
  --self_energy constant|markovian  --sigma  --mu_d
  --mu_min --mu_max --mu_points  --k_points --omega_points --omega_min --omega_max
  --n_values 128,256,...  --trials --seed  --output_dir DIR

Config files hold 'key = value' lines ('#' comments); flags override them.
NONRECIP_THREADS caps worker threads; NONRECIP_DISABLE_NUMBA=1 selects the numpy kernels.
"""


class Table:
    """Column-ordered table written as CSV with fixed float formatting."""

    def __init__(self, columns, rows):
        self.columns = list(columns)
        self.rows = rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    return str(v)


def _omega_grid(cfg: RunConfig, points: int, half_width: float):
    n = cfg.omega_points or points
    lo = cfg.delta_c - half_width * cfg.g if math.isnan(cfg.omega_min) else cfg.omega_min
    hi = cfg.delta_c + half_width * cfg.g if math.isnan(cfg.omega_max) else cfg.omega_max
    return np.linspace(lo, hi, n)


def _map(fn, items):
    n = worker_count()
    if n > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def run_spectral(cfg):
    p = cfg.params()
    k = np.linspace(-math.pi, math.pi, cfg.k_points)
    grid = spectral_heatmap(p, cfg.self_energy_model(), k, _omega_grid(cfg, 801, 3.0))
    return Table(["k", "omega", "A"], grid.rows()), {}


def run_scaling_factors(cfg):
    p = cfg.params()
    w = _omega_grid(cfg, 2000, 4.0)
    nm = scaling_factors(p, cfg.self_energy_model(), w)
    mk = scaling_factors(p, FrozenGamma(markovian_gamma(p)), w)
    cols = np.column_stack([w, nm.f_plus, nm.f_minus, mk.f_plus, mk.f_minus])
    return Table(["omega", "f_plus", "f_minus", "f_plus_M", "f_minus_M"], cols), {}


def run_transmission(cfg):
    p = cfg.params()
    s = cfg.self_energy_model()
    sm = FrozenGamma(markovian_gamma(p))
    w = _omega_grid(cfg, 2000, 4.0)
    recip = p.with_(g_b=0.0)
    cols = np.column_stack([
        w,
        transmission(p, s, w, "+"),
        transmission(p, s, w, "-"),
        transmission(p, sm, w, "+"),
        transmission(p, sm, w, "-"),
        transmission(recip, None, w, "+"),
    ])
    return Table(["omega", "tau_plus", "tau_minus", "tau_plus_M", "tau_minus_M", "tau_reciprocal"], cols), {}


def _currents(cfg, p, lc, mu_d, direction):
    if cfg.self_energy == "markovian":
        return current_markovian_negf(p, lc, mu_d, direction)
    return current_nonmarkovian(p, cfg.self_energy_model(), lc, mu_d, direction)


def run_current_scan(cfg):
    base = cfg.params()
    lc = cfg.lead()

    def one(n):
        p = base.with_(n_sites=n)
        a = _currents(cfg, p, lc, cfg.mu_d, "+")
        b = _currents(cfg, p, lc, cfg.mu_d, "-")
        return [n, a.value, b.value, max(a.quadrature_error, b.quadrature_error), a.log_value, b.log_value]

    rows = _map(one, list(cfg.n_values))
    return Table(["N", "I_plus", "I_minus", "quadrature_error", "log_I_plus", "log_I_minus"], rows), {}


def run_ndqpt(cfg):
    mu = np.linspace(cfg.mu_min, cfg.mu_max, cfg.mu_points)
    curve = ndqpt_scan(cfg.params(), cfg.self_energy_model(), cfg.lead(), mu, cfg.n)
    return Table(["mu_d", "sqrtN_I_plus"], np.column_stack([curve.mu_d_values, curve.scaled_current])), {}


def run_markovian_compare(cfg):
    base = cfg.params()
    lc = cfg.lead()
    gam = markovian_gamma(base)

    def one(n):
        p = base.with_(n_sites=n)
        row = [n]
        worst = 0.0
        for d in ("+", "-"):
            a = current_markovian_negf(p, lc, cfg.mu_d, d, gamma_const=gam).value
            b = current_markovian_lyapunov(p, lc, cfg.mu_d, d, gamma_const=gam).value
            row += [a, b]
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
        return row + [worst]

    rows = _map(one, list(cfg.n_values))
    cols = ["N", "I_plus_negf", "I_plus_lyapunov", "I_minus_negf", "I_minus_lyapunov", "max_rel_diff"]
    return Table(cols, rows), {}


# -- randomized oracle suite -------------------------------------------------

def _check_recursion(p, rng):
    z = complex(rng.uniform(-4, 4), rng.uniform(0, 1)) * p.g
    h = build_matrix(p, None, z)
    g_rec = greens_tridiagonal(h)
    g_den = greens_dense(h)
    return float(np.max(np.abs(g_rec - g_den)) / np.max(np.abs(g_den))), 1e-9


def _check_integrating_out(p, rng):
    q = p.with_(n_sites=min(p.n_sites, 64))
    z = complex(rng.uniform(-4, 4), rng.uniform(0.01, 1)) * q.g
    red = greens_dense(build_matrix(q, None, z, leads=False))
    ext = extended_greens_block(q, None, z, edge_aux=True)
    return float(np.max(np.abs(red - ext)) / np.max(np.abs(red))), 1e-9


def _check_dissipationless(p, rng):
    z = complex(rng.uniform(-4, 4), rng.uniform(0, 1)) * p.g
    mode = dissipationless_mode(p)
    gam = abs(complex(gamma_of_z(p, None, z)))
    eps = complex(dispersion(p, None, mode.k_star, z))
    # only the Gamma-dependent part may carry an imaginary part
    extra = eps - (p.delta_c - 2 * p.g * math.cos(mode.k_star))
    return abs(extra) / max(gam, 1e-300), 1e-12


def _check_gauge(p, rng):
    q = p.with_(n_sites=min(p.n_sites, 16))
    theta = rng.uniform(-math.pi, math.pi)
    flux, tr = flux_hamiltonians(q, theta)
    a = np.linalg.eigvalsh(flux)
    b = np.linalg.eigvalsh(tr)
    return float(np.max(np.abs(a - b))), 1e-10


def _check_lyapunov(p, rng):
    q = p.with_(n_sites=min(p.n_sites, 16))
    lc = LeadConfig(rng.uniform(-2, 2), rng.uniform(-2, 2), beta=10.0, gamma=q.gamma)
    corr = lyapunov_steady_state(q, lc)
    h = markovian_hamiltonian(q, lead_gamma=lc.gamma)
    x = lyapunov_vectorized(h, source_matrix(q, lc))
    return float(np.max(np.abs(corr.c - x.T)) / max(np.max(np.abs(x)), 1e-300)), 1e-10


VALIDATION_CHECKS = {
    "recursion_vs_dense": _check_recursion,
    "integrating_out": _check_integrating_out,
    "dissipationless_mode": _check_dissipationless,
    "gauge_spectrum": _check_gauge,
    "lyapunov_vs_vectorized": _check_lyapunov,
}


def run_validate(cfg):
    p = cfg.params()
    rng = np.random.default_rng(cfg.seed)
    rows = []
    summary = {}
    for name, check in VALIDATION_CHECKS.items():
        worst = 0.0
        ok = True
        for trial in range(cfg.trials):
            err, tol = check(p, rng)
            passed = bool(err <= tol)
            ok &= passed
            worst = max(worst, err)
            rows.append([name, trial, err, tol, passed])
        summary[name] = (ok, worst)
    return Table(["check", "trial", "error", "tolerance", "passed"], rows), {"summary": summary}


RUNNERS = {
    "spectral": run_spectral,
    "scaling-factors": run_scaling_factors,
    "transmission": run_transmission,
    "current-scan": run_current_scan,
    "ndqpt": run_ndqpt,
    "markovian-compare": run_markovian_compare,
    "validate": run_validate,
}


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def write_outputs(cfg: RunConfig, table: Table, wall: float) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.experiment}.csv"
    csv_path.write_text(table.to_csv(), encoding="utf-8")
    manifest = {
        "tool": "nonrecip",
        "version": __version__,
        "experiment": cfg.experiment,
        "preset": cfg.preset,
        "config": {k: _jsonable(v) for k, v in cfg.as_dict().items()},
        "argv": cfg.to_argv(),
        "numba": bool(_kernels.USE_NUMBA),
        "threads": worker_count(),
        "wall_time_s": wall,
        "outputs": [csv_path.name],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return csv_path


def run_experiment(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    t0 = time.perf_counter()
    try:
        table, info = RUNNERS[cfg.experiment](cfg)
    except (NonrecipError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"nonrecip: numerical error: {exc}", file=stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0
    try:
        path = write_outputs(cfg, table, wall)
    except OSError as exc:
        print(f"nonrecip: cannot write output: {exc}", file=stderr)
        return EXIT_IO
    status = EXIT_OK
    if "summary" in info:
        for name, (ok, worst) in info["summary"].items():
            print(f"{'PASS' if ok else 'FAIL'} {name} max_error={worst:.3e}", file=stdout)
            if not ok:
                status = EXIT_NUMERICAL
    print(f"wrote {path} ({len(table.rows)} rows, {wall:.2f} s)", file=stdout)
    return status


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help", "help"):
        print(USAGE, end="")
        return EXIT_OK
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"nonrecip: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
