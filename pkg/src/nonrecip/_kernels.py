"""Inner loops for tridiagonal principal-minor recursions.

The leading minors ``theta_k`` of a tridiagonal matrix grow like ``|lambda|^k``
and overflow a double long before N = 4096, so everything here works with the
ratios ``r_k = theta_k / theta_{k-1}`` and accumulates ``sum log r_k``.

Two interchangeable implementations are provided: numba-compiled loops and a
pure numpy path that loops over sites while vectorizing over frequencies. Set
``NONRECIP_DISABLE_NUMBA=1`` to force the numpy path (it is also used when
numba is not importable).
"""

import os

import numpy as np

__all__ = [
    "USE_NUMBA",
    "minor_ratios",
    "corner_log_det",
    "corner_log_det_numpy",
    "corner_log_det_numba",
]


def _numba_requested():
    flag = os.environ.get("NONRECIP_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by NONRECIP_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA

# |r_k| stays within a few orders of magnitude of |lambda|, so a running
# product of 16 ratios cannot overflow before it is folded into the log.
RENORM_EVERY = 16


def minor_ratios_numpy(diag, prod):
    """Ratios ``theta_k / theta_{k-1}`` of leading principal minors.

    ``diag`` has length N, ``prod[k]`` is ``upper[k] * lower[k]`` (length N-1).
    """
    n = diag.shape[0]
    r = np.empty(n, dtype=np.complex128)
    r[0] = diag[0]
    for k in range(1, n):
        r[k] = diag[k] - prod[k - 1] / r[k - 1]
    return r


def corner_log_det_numpy(a_first, a_bulk, a_last, prod, n):
    """``log det M`` for a batch of uniform tridiagonal matrices.

    All arguments except ``n`` are complex arrays of equal shape (one entry per
    frequency). Site 1 has diagonal ``a_first``, site N ``a_last``, every other
    site ``a_bulk``; every bond has ``upper * lower = prod``. Returns the
    complex log-determinant (imaginary part modulo 2 pi) and the smallest
    ``|r_k|`` seen, which flags a breakdown of the recursion.
    """
    r = a_first.astype(np.complex128, copy=True)
    acc = np.zeros(r.shape, dtype=np.complex128)
    run = r.copy()
    rmin = np.abs(r)
    for k in range(1, n):
        a = a_last if k == n - 1 else a_bulk
        r = a - prod / r
        run *= r
        np.minimum(rmin, np.abs(r), out=rmin)
        if k % RENORM_EVERY == 0:
            acc += np.log(run)
            run[...] = 1.0
    acc += np.log(run)
    return acc, rmin


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _minor_ratios_nb(diag, prod):
        n = diag.shape[0]
        r = np.empty(n, dtype=np.complex128)
        r[0] = diag[0]
        for k in range(1, n):
            r[k] = diag[k] - prod[k - 1] / r[k - 1]
        return r

    @njit(cache=True, nogil=True)
    def _corner_log_det_nb(a_first, a_bulk, a_last, prod, n):
        # sites outer, frequencies inner: the inner loop has no carried
        # dependency and vectorizes
        m = a_first.shape[0]
        r = a_first.copy()
        run = a_first.copy()
        acc = np.zeros(m, dtype=np.complex128)
        lo2 = np.empty(m, dtype=np.float64)
        for i in range(m):
            lo2[i] = r[i].real * r[i].real + r[i].imag * r[i].imag
        for k in range(1, n):
            a = a_last if k == n - 1 else a_bulk
            for i in range(m):
                ri = a[i] - prod[i] / r[i]
                r[i] = ri
                run[i] *= ri
                ar2 = ri.real * ri.real + ri.imag * ri.imag
                if ar2 < lo2[i]:
                    lo2[i] = ar2
            if k % RENORM_EVERY == 0:
                for i in range(m):
                    acc[i] += np.log(run[i])
                    run[i] = 1.0 + 0.0j
        for i in range(m):
            acc[i] += np.log(run[i])
        return acc, np.sqrt(lo2)

    def corner_log_det_numba(a_first, a_bulk, a_last, prod, n):
        args = [np.ascontiguousarray(np.ravel(x), dtype=np.complex128) for x in (a_first, a_bulk, a_last, prod)]
        shape = np.shape(a_first)
        logdet, rmin = _corner_log_det_nb(*args, int(n))
        return logdet.reshape(shape), rmin.reshape(shape)

    def _minor_ratios_numba(diag, prod):
        return _minor_ratios_nb(
            np.ascontiguousarray(diag, dtype=np.complex128),
            np.ascontiguousarray(prod, dtype=np.complex128),
        )

else:  # pragma: no cover - exercised only without numba
    corner_log_det_numba = None
    _minor_ratios_numba = None


def corner_log_det(a_first, a_bulk, a_last, prod, n, use_numba=None):
    """Dispatch to the numba or numpy implementation."""
    a_first, a_bulk, a_last, prod = np.broadcast_arrays(
        *(np.asarray(x, dtype=np.complex128) for x in (a_first, a_bulk, a_last, prod))
    )
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and HAVE_NUMBA:
        return corner_log_det_numba(a_first, a_bulk, a_last, prod, n)
    return corner_log_det_numpy(a_first, a_bulk, a_last, prod, n)


def minor_ratios(diag, prod, use_numba=None):
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _minor_ratios_numba(diag, prod)
    return minor_ratios_numpy(np.asarray(diag, dtype=np.complex128), np.asarray(prod, dtype=np.complex128))
