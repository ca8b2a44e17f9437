"""Slow reference implementations: explicit loops, fsum, adaptive quadrature.

None of these touch the prefix-sum, sliding-window, FFT or compiled paths.
"""
import itertools
import math

import mpmath
import numpy as np


def dyadic_sides(N):
    return [2**j for j in range(int(math.log2(N)) + 1)]


def all_cubes(N, dim, sides=None):
    for k in sides or dyadic_sides(N):
        for anchor in itertools.product(range(N - k + 1), repeat=dim):
            yield anchor, k


def block(a, anchor, k):
    return a[tuple(slice(i, i + k) for i in anchor)]


def mean(a):
    return math.fsum(np.ravel(a)) / np.size(a)


def maximal(values, sides=None):
    a = np.abs(values)
    N, dim = a.shape[0], a.ndim
    out = np.zeros_like(a)
    for anchor, k in all_cubes(N, dim, sides):
        avg = mean(block(a, anchor, k))
        for node in itertools.product(*[range(i, i + k) for i in anchor]):
            out[node] = max(out[node], avg)
    return out


def ap(w, p):
    pp = p / (p - 1)
    best = None
    for anchor, k in all_cubes(w.shape[0], w.ndim):
        b = block(w, anchor, k)
        v = mean(b) * mean(b ** (1 - pp)) ** (p - 1)
        if best is None or v > best[0]:
            best = (v, anchor, k)
    return best


def apq(w, p, q):
    pp = p / (p - 1)
    best = None
    for anchor, k in all_cubes(w.shape[0], w.ndim):
        b = block(w, anchor, k)
        v = mean(b**q) * mean(b ** (-pp)) ** (q / pp)
        if best is None or v > best[0]:
            best = (v, anchor, k)
    return best


def a1q(w, q):
    best = None
    for anchor, k in all_cubes(w.shape[0], w.ndim):
        b = block(w, anchor, k) ** q
        v = mean(b) / b.min()
        if best is None or v > best[0]:
            best = (v, anchor, k)
    return best


def ainfty(w):
    best = None
    N, dim = w.shape[0], w.ndim
    for anchor, k in all_cubes(N, dim):
        b = block(w, anchor, k)
        m = maximal(b, dyadic_sides(k))
        v = math.fsum(m.ravel()) / math.fsum(b.ravel())
        if best is None or v > best[0]:
            best = (v, anchor, k)
    return best


def bmo(b):
    best = 0.0
    for anchor, k in all_cubes(b.shape[0], b.ndim):
        blk = block(b, anchor, k)
        c = mean(blk)
        best = max(best, mean(np.abs(blk - c)))
    return best


def loop_gradient(b, h):
    """Central differences inside, one-sided at the ends, one axis at a time."""
    N, dim = b.shape[0], b.ndim
    out = np.zeros(b.shape + (dim,))
    for node in itertools.product(range(N), repeat=dim):
        for j in range(dim):
            lo, hi = list(node), list(node)
            lo[j] = max(node[j] - 1, 0)
            hi[j] = min(node[j] + 1, N - 1)
            out[node + (j,)] = (b[tuple(hi)] - b[tuple(lo)]) / ((hi[j] - lo[j]) * h)
    return out


def ball_moment(omega, g, m, dim):
    """``int_S (g . u)^m Omega(u) du`` by tanh-sinh quadrature (dim 1 and 2)."""
    if dim == 1:
        return sum((g[0] * s) ** m * float(omega(np.array([[s]]))[0]) for s in (-1.0, 1.0))

    def integrand(t):
        u = np.array([math.cos(float(t)), math.sin(float(t))])
        return float(g @ u) ** m * float(omega(u[None, :])[0])

    return float(mpmath.quad(integrand, mpmath.linspace(0, 2 * mpmath.pi, 9)))


def singular(values, omega, m=0, b=None, h=None):
    """``sum_{y != x} Omega(d/|d|) / |d|^n (b(x)-b(y))^m f(y)`` with ``d = x - y`` in cells.

    With ``m >= 1`` and a spacing ``h`` the centre-cell term
    ``f(x) rho^m / m * int_S (grad b . u)^m Omega`` over the equal-volume ball is added.
    """
    N, dim = values.shape[0], values.ndim
    nodes = list(itertools.product(range(N), repeat=dim))
    out = np.zeros(values.shape)
    for x in nodes:
        terms = []
        for y in nodes:
            if x == y:
                continue
            d = np.array(x, dtype=float) - np.array(y, dtype=float)
            r = math.sqrt(float(d @ d))
            k = float(omega(d / r)) / r**dim
            if m:
                k *= (b[x] - b[y]) ** m
            terms.append(k * values[y])
        out[x] = math.fsum(terms)
    if m and h is not None:
        grad = loop_gradient(b, h)
        area = 2.0 if dim == 1 else 2 * math.pi
        rho = (dim * h**dim / area) ** (1 / dim)
        for x in nodes:
            out[x] += values[x] * rho**m / m * ball_moment(omega, grad[x], m, dim)
    return out


def step_lorentz(values, masses, s, q):
    """Lorentz norm by integrating ``s t^(q-1) lambda(t)^(q/s)`` over each step at 30 digits."""
    a = np.abs(np.ravel(values))
    m = np.ravel(masses)
    levels = sorted(set(a[a > 0].tolist()), reverse=True) + [0.0]
    total = mpmath.mpf(0)
    with mpmath.workdps(30):
        for hi, lo in zip(levels[:-1], levels[1:]):
            lam = mpmath.mpf(math.fsum(m[a >= hi]))
            total += mpmath.quad(lambda t: s * t ** (q - 1) * lam ** (mpmath.mpf(q) / s), [lo, hi])
        return float(total ** (mpmath.mpf(1) / q))


def step_weak(values, masses, s):
    a = np.abs(np.ravel(values))
    m = np.ravel(masses)
    best = 0.0
    for v in set(a[a > 0].tolist()):
        best = max(best, v * math.fsum(m[a >= v]) ** (1 / s))
    return best
