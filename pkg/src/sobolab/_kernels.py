"""Compiled per-cube kernels: sliding sorted windows and mean oscillations.

A side-``k`` cube in ``dim`` dimensions is handled as a *slab*: the
``k**(dim-1)`` rows of the grid it spans, each of full length ``N`` along the
last axis.  Sliding the cube one node along the last axis drops one column of
the slab and adds another, so a sorted copy of the cube can be maintained by
merging instead of re-sorting.
"""
from __future__ import annotations

import itertools

import numpy as np
from numba import njit


@njit(cache=True)
def window_lorentz(slab, k, centers, weights, power, use_max, out):
    """Rearrangement functional of ``|v - centers[a]|`` over each window ``a``.

    With ``d_1 >= d_2 >= ...`` the sorted deviations, the result is
    ``(sum_j weights[j] d_j**power)**(1/power)``, or ``max_j weights[j] d_j``
    when ``use_max``.
    """
    r, n = slab.shape
    m = r * k
    na = n - k + 1
    S = np.empty(m)
    T = np.empty(m)
    idx = 0
    for i in range(r):
        for t in range(k):
            S[idx] = slab[i, t]
            idx += 1
    S.sort()
    gone = np.empty(r)
    new = np.empty(r)
    for a in range(na):
        if a > 0:
            for i in range(r):
                gone[i] = slab[i, a - 1]
                new[i] = slab[i, a + k - 1]
            gone.sort()
            new.sort()
            i = 0
            j = 0
            o = 0
            w = 0
            while i < m:
                if o < r and S[i] == gone[o]:
                    o += 1
                    i += 1
                    continue
                while j < r and new[j] <= S[i]:
                    T[w] = new[j]
                    w += 1
                    j += 1
                T[w] = S[i]
                w += 1
                i += 1
            while j < r:
                T[w] = new[j]
                w += 1
                j += 1
            S, T = T, S
        c = centers[a]
        lo = 0
        hi = m - 1
        acc = 0.0
        for rank in range(m):
            dl = abs(S[lo] - c)
            dh = abs(S[hi] - c)
            if dh >= dl:
                d = dh
                hi -= 1
            else:
                d = dl
                lo += 1
            if use_max:
                v = d * weights[rank]
                if v > acc:
                    acc = v
            elif power == 1.0:
                acc += weights[rank] * d
            else:
                acc += weights[rank] * d**power
        if use_max or power == 1.0:
            out[a] = acc
        else:
            out[a] = acc ** (1.0 / power)


@njit(cache=True)
def window_oscillation(slab, k, centers, out):
    r, n = slab.shape
    m = r * k
    for a in range(n - k + 1):
        c = centers[a]
        acc = 0.0
        for i in range(r):
            for t in range(a, a + k):
                acc += abs(slab[i, t] - c)
        out[a] = acc / m


@njit(cache=True)
def block_sums(flat, starts, offsets, out):
    """Compensated sum of ``flat[starts[i] + offsets]`` for each ``i``.

    Each addition is made error-free with ``two_sum`` and the errors are
    accumulated separately, so the result is accurate relative to the block's
    own mass rather than to the whole array's.
    """
    for i in range(starts.size):
        s = 0.0
        c = 0.0
        base = starts[i]
        for o in offsets:
            x = flat[base + o]
            t = s + x
            bp = t - s
            c += (s - (t - bp)) + (x - bp)
            s = t
        out[i] = s + c


def iter_slabs(values: np.ndarray, k: int):
    """Yield ``(leading_anchor, slab)`` for every anchor of the leading axes."""
    dim = values.ndim
    N = values.shape[-1]
    if dim == 1:
        yield (), np.ascontiguousarray(values[None, :], dtype=float)
        return
    for lead in itertools.product(range(N - k + 1), repeat=dim - 1):
        block = values[tuple(slice(a, a + k) for a in lead)]
        yield lead, np.ascontiguousarray(block.reshape(-1, N), dtype=float)


def lorentz_weights(m: int, s: float, q: float) -> np.ndarray:
    """Per-rank weights of the normalised ``L^{s,q}`` norm on ``m`` equal masses."""
    j = np.arange(m + 1, dtype=float) / m
    if np.isinf(q):
        return j[1:] ** (1.0 / s)
    e = q / s
    return (s / q) * (j[1:] ** e - j[:-1] ** e)


def cube_lorentz(values: np.ndarray, k: int, s: float, q: float, centers: np.ndarray | None = None) -> np.ndarray:
    """Normalised local Lorentz norm of ``v - centre`` for every side-``k`` cube (by anchor)."""
    dim = values.ndim
    N = values.shape[-1]
    na = N - k + 1
    out = np.empty((na,) * dim)
    weights = lorentz_weights(k**dim, s, q)
    use_max = bool(np.isinf(q))
    power = 1.0 if use_max else float(q)
    zeros = np.zeros(na)
    for lead, slab in iter_slabs(values, k):
        c = zeros if centers is None else np.ascontiguousarray(centers[lead], dtype=float)
        row = np.empty(na)
        window_lorentz(slab, k, c, weights, power, use_max, row)
        out[lead] = row
    return out


def cube_oscillation(values: np.ndarray, k: int, centers: np.ndarray) -> np.ndarray:
    dim = values.ndim
    na = values.shape[-1] - k + 1
    out = np.empty((na,) * dim)
    for lead, slab in iter_slabs(values, k):
        row = np.empty(na)
        window_oscillation(slab, k, np.ascontiguousarray(centers[lead], dtype=float), row)
        out[lead] = row
    return out
