"""Hot sparse kernels, each in a numba and a pure-numpy flavour.

The backend is picked once from ``SPARSE_CODE_BACKEND`` (``numba`` or
``numpy``; default ``numba`` when importable) and can be switched at run time
with :func:`set_backend`.  Both flavours run the same algorithm in the same
order, so integer-valued inputs give bit-identical results on either path.
Object-dtype values (exact Python ints / Fractions) always take the numpy path.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_ENV_FLAG = "SPARSE_CODE_BACKEND"
_BACKENDS = ("numba", "numpy")


def _initial_backend():
    name = os.environ.get(_ENV_FLAG, "numba").strip().lower()
    if name not in _BACKENDS:
        raise ValueError(f"{_ENV_FLAG} must be one of {_BACKENDS}, got {name!r}")
    if name == "numba" and numba is None:
        return "numpy"
    return name


_backend = _initial_backend()


def get_backend():
    return _backend


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels; returns the previous name."""
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    previous, _backend = _backend, name
    return previous


def _jit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def _use_numba(*arrays):
    return _backend == "numba" and all(a.dtype != object for a in arrays)


# ---------------------------------------------------------------- coalesce

def _coalesce_numpy(keys, vals):
    if keys.size == 0:
        return keys.copy(), vals.copy()
    order = np.argsort(keys, kind="stable")
    k = keys[order]
    v = vals[order]
    starts = np.concatenate(([0], np.flatnonzero(k[1:] != k[:-1]) + 1))
    sums = np.add.reduceat(v, starts)
    uk = k[starts]
    keep = sums != 0
    if vals.dtype == object:
        keep = keep.astype(bool)
    return uk[keep], sums[keep]


@_jit
def _coalesce_numba(keys, vals):
    n = keys.size
    out_k = np.empty(n, dtype=np.int64)
    out_v = np.empty(n, dtype=np.float64)
    if n == 0:
        return out_k, out_v
    order = np.argsort(keys, kind="mergesort")
    m = 0
    cur = keys[order[0]]
    acc = vals[order[0]]
    for t in range(1, n):
        idx = order[t]
        key = keys[idx]
        if key == cur:
            acc += vals[idx]
        else:
            if acc != 0.0:
                out_k[m] = cur
                out_v[m] = acc
                m += 1
            cur = key
            acc = vals[idx]
    if acc != 0.0:
        out_k[m] = cur
        out_v[m] = acc
        m += 1
    return out_k[:m], out_v[:m]


def coalesce(keys, vals):
    """Sort flat keys, sum duplicates, drop exact zeros."""
    keys = np.asarray(keys, dtype=np.int64)
    if _use_numba(vals):
        return _coalesce_numba(keys, np.asarray(vals, dtype=np.float64))
    return _coalesce_numpy(keys, vals)


# ------------------------------------------------------ transpose product

def _tprod_numpy(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, width):
    len_a = np.diff(a_ptr)
    len_b = np.diff(b_ptr)
    row_of_a = np.repeat(np.arange(len_a.size), len_a)
    reps = len_b[row_of_a]
    total = int(reps.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, a_val.dtype), 0
    a_pos = np.repeat(np.arange(a_idx.size), reps)
    group_start = np.repeat(np.cumsum(reps) - reps, reps)
    offset = np.arange(total) - group_start
    b_pos = b_ptr[row_of_a[a_pos]] + offset
    keys = a_idx[a_pos].astype(np.int64) * width + b_idx[b_pos]
    vals = a_val[a_pos] * b_val[b_pos]
    return keys, vals, total


@_jit
def _tprod_numba(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, width):
    nrows = a_ptr.size - 1
    total = 0
    for k in range(nrows):
        total += (a_ptr[k + 1] - a_ptr[k]) * (b_ptr[k + 1] - b_ptr[k])
    keys = np.empty(total, dtype=np.int64)
    vals = np.empty(total, dtype=np.float64)
    t = 0
    for k in range(nrows):
        for p in range(a_ptr[k], a_ptr[k + 1]):
            base = a_idx[p] * width
            av = a_val[p]
            for q in range(b_ptr[k], b_ptr[k + 1]):
                keys[t] = base + b_idx[q]
                vals[t] = av * b_val[q]
                t += 1
    return keys, vals, total


def transpose_product_pairs(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, width):
    """Outer-product contributions of A^T B, row by row of the shared dimension.

    Returns ``(keys, values, flops)`` with ``key = i * width + j``; one entry
    per scalar multiply-add, not yet coalesced.
    """
    if _use_numba(a_val, b_val):
        return _tprod_numba(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, np.int64(width))
    return _tprod_numpy(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, width)


# ------------------------------------------------------- scaled merge

@_jit
def _merge_numba(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, coeff):
    nrows = a_ptr.size - 1
    cap = a_idx.size + b_idx.size
    ptr = np.zeros(nrows + 1, dtype=np.int64)
    idx = np.empty(cap, dtype=np.int64)
    val = np.empty(cap, dtype=np.float64)
    t = 0
    for r in range(nrows):
        p = a_ptr[r]
        pe = a_ptr[r + 1]
        q = b_ptr[r]
        qe = b_ptr[r + 1]
        while p < pe or q < qe:
            if q >= qe or (p < pe and a_idx[p] < b_idx[q]):
                c = a_idx[p]
                v = a_val[p]
                p += 1
            elif p >= pe or b_idx[q] < a_idx[p]:
                c = b_idx[q]
                v = coeff * b_val[q]
                q += 1
            else:
                c = a_idx[p]
                v = a_val[p] + coeff * b_val[q]
                p += 1
                q += 1
            if v != 0.0:
                idx[t] = c
                val[t] = v
                t += 1
        ptr[r + 1] = t
    return ptr, idx[:t], val[:t]


def _merge_numpy(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, coeff, width):
    a_rows = np.repeat(np.arange(a_ptr.size - 1), np.diff(a_ptr))
    b_rows = np.repeat(np.arange(b_ptr.size - 1), np.diff(b_ptr))
    keys = np.concatenate((a_rows * width + a_idx, b_rows * width + b_idx))
    vals = np.concatenate((a_val, coeff * b_val))
    uk, uv = _coalesce_numpy(keys.astype(np.int64), vals)
    rows = uk // width
    ptr = np.zeros(a_ptr.size, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=a_ptr.size - 1), out=ptr[1:])
    return ptr, uk % width, uv


def merge_scaled(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, coeff, width):
    """CSR arrays of ``A + coeff * B`` for same-shape canonical inputs."""
    if _use_numba(a_val, b_val):
        return _merge_numba(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, float(coeff))
    return _merge_numpy(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, coeff, width)
