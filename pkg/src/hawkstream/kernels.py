"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Every function here exists in two implementations: a numba ``@njit`` version
compiled lazily on first use, and a vectorized numpy version. The active
backend is chosen once at import time. Set the environment variable
``HAWKSTREAM_NUMBA=0`` to force the numpy path (useful for debugging and for
the backend benchmark under ``benchmarks/``); if numba is not importable the
numpy path is selected automatically.

All array arguments are expected as contiguous float64 (int64 for slot
labels). Shapes follow the conventions of the inference engine:

* ``cands``  -- candidate weight matrices, shape ``(S, n_slots, L)``
* ``delta``/``kappa`` -- per-source kernel aggregates, shape ``(n_slots, L)``
* ``acc``    -- per-candidate running log-likelihoods, shape ``(S,)``
"""

import math
import os

import numpy as np

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _numba_requested() -> bool:
    flag = os.environ.get("HAWKSTREAM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _kernel_values_np(dts, means, sigmas, horizon):
    """Truncated Gaussian basis densities at each lag.

    Rows are lags, columns basis components. Lags outside [0, horizon] give
    exactly zero.
    """
    dts = np.asarray(dts, dtype=np.float64)
    z = (dts[:, None] - means[None, :]) / sigmas[None, :]
    vals = np.exp(-0.5 * z * z) / (_SQRT2PI * sigmas[None, :])
    ok = (dts >= 0.0) & (dts <= horizon)
    vals[~ok, :] = 0.0
    return vals


def _kernel_cdf_np(xs, means, sigmas, horizon):
    """Per-component mass of the basis over (-inf, x], saturating at horizon.

    For x >= horizon the full unit mass is reported; the density truncated
    past the horizon is accounted for as if delivered at the horizon, which
    keeps compensator increments of long-elapsed triggers exact.
    """
    xs = np.asarray(xs, dtype=np.float64)
    from scipy.special import erf

    z = (xs[:, None] - means[None, :]) / (sigmas[None, :] * _SQRT2)
    out = 0.5 * (1.0 + erf(z))
    out[xs >= horizon, :] = 1.0
    return out


def _label_sums_np(vals, slots, n_slots):
    """Sum rows of ``vals`` grouped by slot index."""
    out = np.zeros((n_slots, vals.shape[1]), dtype=np.float64)
    np.add.at(out, slots, vals)
    return out


def _bank_compensator_np(cands, acc, delta):
    """acc[s] -= sum_{src,l} cands[s,src,l] * delta[src,l], in place."""
    S = cands.shape[0]
    acc -= cands.reshape(S, -1) @ delta.ravel()
    return acc


def _bank_event_term_np(cands, acc, kappa, floor):
    """Add log event intensity under each candidate, floored below."""
    S = cands.shape[0]
    lam = cands.reshape(S, -1) @ kappa.ravel()
    acc += np.log(np.maximum(lam, floor))
    return acc


def _candidate_intensities_np(cands, kappa):
    """Event intensity at the current time under each candidate matrix."""
    S = cands.shape[0]
    return cands.reshape(S, -1) @ kappa.ravel()


def _posterior_weights_np(acc, logprior):
    """Normalized posterior weights exp(acc + logprior), log-sum-exp guarded.

    Returns ``(weights, degenerate)``; degenerate is True when every score is
    non-finite, in which case uniform weights are returned.
    """
    score = acc + logprior
    m = np.max(score)
    if not np.isfinite(m):
        n = score.shape[0]
        return np.full(n, 1.0 / n), True
    w = np.exp(score - m)
    w /= w.sum()
    return w, False


def _weighted_rows_np(cands, w):
    """Posterior-mean candidate matrix: sum_s w[s] * cands[s]."""
    return np.tensordot(w, cands, axes=1)


def _power_radius_np(mat, tol, max_iter):
    """Spectral radius of a non-negative matrix by shifted power iteration.

    Returns ``(radius, converged)``. The identity shift keeps the iteration
    aperiodic; for non-negative matrices the dominant eigenvalue shifts by
    exactly one.
    """
    k = mat.shape[0]
    if k == 1:
        return abs(mat[0, 0]), True
    v = np.full(k, 1.0 / math.sqrt(k))
    est = 0.0
    for _ in range(max_iter):
        u = mat @ v + v
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            return 0.0, True
        u /= nrm
        new_est = float(u @ (mat @ u + u))
        if abs(new_est - est) < tol * max(1.0, abs(new_est)):
            return max(new_est - 1.0, 0.0), True
        est = new_est
        v = u
    return max(est - 1.0, 0.0), False


_NUMPY_IMPLS = {
    "kernel_values": _kernel_values_np,
    "kernel_cdf": _kernel_cdf_np,
    "label_sums": _label_sums_np,
    "bank_compensator": _bank_compensator_np,
    "bank_event_term": _bank_event_term_np,
    "candidate_intensities": _candidate_intensities_np,
    "posterior_weights": _posterior_weights_np,
    "weighted_rows": _weighted_rows_np,
    "power_radius": _power_radius_np,
}


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def kernel_values(dts, means, sigmas, horizon):
        n = dts.shape[0]
        L = means.shape[0]
        out = np.zeros((n, L))
        for i in range(n):
            dt = dts[i]
            if dt < 0.0 or dt > horizon:
                continue
            for l in range(L):
                z = (dt - means[l]) / sigmas[l]
                out[i, l] = math.exp(-0.5 * z * z) / (_SQRT2PI * sigmas[l])
        return out

    @njit(cache=True)
    def kernel_cdf(xs, means, sigmas, horizon):
        n = xs.shape[0]
        L = means.shape[0]
        out = np.empty((n, L))
        for i in range(n):
            x = xs[i]
            if x >= horizon:
                for l in range(L):
                    out[i, l] = 1.0
            else:
                for l in range(L):
                    z = (x - means[l]) / (sigmas[l] * _SQRT2)
                    out[i, l] = 0.5 * (1.0 + math.erf(z))
        return out

    @njit(cache=True)
    def label_sums(vals, slots, n_slots):
        L = vals.shape[1]
        out = np.zeros((n_slots, L))
        for i in range(slots.shape[0]):
            s = slots[i]
            for l in range(L):
                out[s, l] += vals[i, l]
        return out

    @njit(cache=True)
    def bank_compensator(cands, acc, delta):
        # contiguous reshape + dot dispatches to BLAS inside numba
        S = cands.shape[0]
        flat = cands.reshape(S, cands.shape[1] * cands.shape[2])
        acc -= np.dot(flat, delta.ravel())
        return acc

    @njit(cache=True)
    def bank_event_term(cands, acc, kappa, floor):
        S = cands.shape[0]
        flat = cands.reshape(S, cands.shape[1] * cands.shape[2])
        lam = np.dot(flat, kappa.ravel())
        for s in range(S):
            v = lam[s]
            if v < floor:
                v = floor
            acc[s] += math.log(v)
        return acc

    @njit(cache=True)
    def candidate_intensities(cands, kappa):
        S = cands.shape[0]
        flat = cands.reshape(S, cands.shape[1] * cands.shape[2])
        return np.dot(flat, kappa.ravel())

    @njit(cache=True)
    def posterior_weights(acc, logprior):
        n = acc.shape[0]
        score = acc + logprior
        m = np.max(score)
        if not np.isfinite(m):
            return np.full(n, 1.0 / n), True
        w = np.exp(score - m)
        w /= np.sum(w)
        return w, False

    @njit(cache=True)
    def weighted_rows(cands, w):
        S, n_slots, L = cands.shape
        flat = cands.reshape(S, n_slots * L)
        return np.dot(w, flat).reshape(n_slots, L).copy()

    @njit(cache=True)
    def power_radius(mat, tol, max_iter):
        k = mat.shape[0]
        if k == 1:
            return abs(mat[0, 0]), True
        v = np.full(k, 1.0 / math.sqrt(k))
        est = 0.0
        u = np.empty(k)
        for _ in range(max_iter):
            for i in range(k):
                acc = v[i]
                for j in range(k):
                    acc += mat[i, j] * v[j]
                u[i] = acc
            nrm = 0.0
            for i in range(k):
                nrm += u[i] * u[i]
            nrm = math.sqrt(nrm)
            if nrm == 0.0:
                return 0.0, True
            for i in range(k):
                u[i] /= nrm
            new_est = 0.0
            for i in range(k):
                acc = u[i]
                for j in range(k):
                    acc += mat[i, j] * u[j]
                new_est += u[i] * acc
            if abs(new_est - est) < tol * max(1.0, abs(new_est)):
                r = new_est - 1.0
                return (r if r > 0.0 else 0.0), True
            est = new_est
            for i in range(k):
                v[i] = u[i]
        r = est - 1.0
        return (r if r > 0.0 else 0.0), False

    return {
        "kernel_values": kernel_values,
        "kernel_cdf": kernel_cdf,
        "label_sums": label_sums,
        "bank_compensator": bank_compensator,
        "bank_event_term": bank_event_term,
        "candidate_intensities": candidate_intensities,
        "posterior_weights": posterior_weights,
        "weighted_rows": weighted_rows,
        "power_radius": power_radius,
    }


_NUMBA_IMPLS = None
if _numba_requested():
    try:
        _NUMBA_IMPLS = _build_numba_impls()
    except ImportError:
        _NUMBA_IMPLS = None

_ACTIVE = _NUMBA_IMPLS if _NUMBA_IMPLS is not None else _NUMPY_IMPLS

BACKEND = "numba" if _NUMBA_IMPLS is not None else "numpy"

kernel_values = _ACTIVE["kernel_values"]
kernel_cdf = _ACTIVE["kernel_cdf"]
label_sums = _ACTIVE["label_sums"]
bank_compensator = _ACTIVE["bank_compensator"]
bank_event_term = _ACTIVE["bank_event_term"]
candidate_intensities = _ACTIVE["candidate_intensities"]
posterior_weights = _ACTIVE["posterior_weights"]
weighted_rows = _ACTIVE["weighted_rows"]
power_radius = _ACTIVE["power_radius"]


def numpy_impls():
    """The numpy implementation set (always available)."""
    return dict(_NUMPY_IMPLS)


def numba_impls():
    """The numba implementation set, or None when numba is unavailable."""
    return dict(_NUMBA_IMPLS) if _NUMBA_IMPLS is not None else None
