"""Maximal operators, Riesz potentials, rough singular integrals and commutators.

Convolution operators act on grid data extended by zero outside the box.
Small problems are summed directly over offset pairs ``(+y, -y)`` so odd
kernels cancel to rounding on symmetric data; larger ones go through an FFT
of the same discrete kernel.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma

from . import _kernels
from .grid import CubeLadder, Grid, GridFunction, _check_ladder, _max_averages_array, node_max_over_anchors
from .norms import LorentzIndex, weak_norm_samples

__all__ = [
    "SphereKernel",
    "ConvolutionCZ",
    "hl_maximal",
    "iterated_maximal",
    "power_maximal",
    "lorentz_maximal",
    "riesz_potential",
    "rough_singular",
    "commutator",
    "nonlinear_commutator",
    "nonlinear_split",
    "centre_cell_term",
    "BUILTIN_KERNELS",
]

# grids above these sizes make the O(N^(2 dim)) operators impractical
CONVOLUTION_CAPS = {1: 2048, 2: 512, 3: 64}
_DIRECT_PAIR_LIMIT = 2**27


# --------------------------------------------------------------------------
# kernels on the sphere
# --------------------------------------------------------------------------


def _unit_sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / gamma(n / 2)


class SphereKernel:
    """Samples of a zero-mean function on ``S^{n-1}``.

    For ``n = 1`` the two values at ``-1`` and ``+1``; for ``n = 2`` a uniform
    angle grid; for ``n = 3`` a latitude-longitude grid.  The mean (under the
    sample quadrature) is projected out at construction.  When built from a
    closure the closure is kept for evaluation, otherwise values between
    samples are interpolated.
    """

    def __init__(
        self,
        dim: int,
        samples,
        func: Callable[[np.ndarray], np.ndarray] | None = None,
        label: str = "custom",
    ):
        if dim not in (1, 2, 3):
            raise ValueError(f"sphere kernels exist for dim 1, 2, 3, got {dim}")
        s = np.asarray(samples, dtype=float)
        if not np.all(np.isfinite(s)):
            raise ValueError("sphere kernel samples must be finite")
        if dim == 1:
            s = s.reshape(2)
            weights = np.ones(2)
        elif dim == 2:
            s = s.ravel()
            if s.size < 256:
                raise ValueError(f"need at least 256 angle samples in 2D, got {s.size}")
            weights = np.full(s.size, 2 * math.pi / s.size)
        else:
            if s.ndim != 2:
                raise ValueError("3D kernels need a (n_theta, n_phi) latitude-longitude array")
            nt, nph = s.shape
            theta = (np.arange(nt) + 0.5) * math.pi / nt
            weights = np.outer(np.sin(theta) * (math.pi / nt), np.full(nph, 2 * math.pi / nph))
        self.mean = float(np.sum(weights * s) / np.sum(weights))
        self.dim = dim
        self.samples = s - self.mean
        self.weights = weights
        self.points = _sphere_points(dim, s.shape)
        self.label = label
        self._func = func
        self.sup = float(np.max(np.abs(self.samples)))
        self.weak_norm = weak_norm_samples(self.samples, weights, float(dim))

    def __repr__(self):
        return f"SphereKernel({self.label!r}, dim={self.dim})"

    @classmethod
    def from_function(cls, dim: int, func, label: str = "custom", resolution: int = 512) -> "SphereKernel":
        shape = {1: (2,), 2: (resolution,), 3: (resolution // 2, resolution)}[dim]
        return cls(dim, func(_sphere_points(dim, shape)), func, label)

    def moment(self, g: np.ndarray, m: int) -> np.ndarray:
        """``int_S (g . u)^m Omega(u) du`` for each row vector of ``g`` (shape ``(..., dim)``)."""
        u = self.points.reshape(-1, self.dim)
        wo = (self.weights * self.samples).ravel()
        flat = g.reshape(-1, self.dim)
        out = np.empty(flat.shape[0])
        step = max(1, (1 << 22) // u.shape[0])
        for a in range(0, flat.shape[0], step):
            out[a : a + step] = ((flat[a : a + step] @ u.T) ** m) @ wo
        return out.reshape(g.shape[:-1])

    @classmethod
    def builtin(cls, name: str, dim: int) -> "SphereKernel":
        try:
            table = BUILTIN_KERNELS[name]
        except KeyError:
            raise ValueError(f"unknown kernel {name!r}; choose from {sorted(BUILTIN_KERNELS)}") from None
        if dim not in table:
            raise ValueError(f"kernel {name!r} is not defined in dimension {dim}")
        return cls.from_function(dim, table[dim], label=name)

    @classmethod
    def from_csv(cls, path, label: str | None = None) -> "SphereKernel":
        """Rows ``(direction, value)`` in 1D, ``(angle, value)`` in 2D, ``(theta, phi, value)`` in 3D."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    continue  # header line
        arr = np.array(rows)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError(f"{path}: no numeric kernel rows found")
        label = label or Path(path).stem
        if arr.shape[1] == 2 and arr.shape[0] == 2 and set(np.sign(arr[:, 0])) == {-1.0, 1.0}:
            order = np.argsort(arr[:, 0])
            return cls(1, arr[order, 1], label=label)
        if arr.shape[1] == 2:
            order = np.argsort(np.mod(arr[:, 0], 2 * math.pi))
            return cls(2, arr[order, 1], label=label)
        if arr.shape[1] == 3:
            th = np.unique(arr[:, 0])
            ph = np.unique(arr[:, 1])
            grid = np.full((th.size, ph.size), np.nan)
            grid[np.searchsorted(th, arr[:, 0]), np.searchsorted(ph, arr[:, 1])] = arr[:, 2]
            if np.isnan(grid).any():
                raise ValueError(f"{path}: latitude-longitude grid is incomplete")
            return cls(3, grid, label=label)
        raise ValueError(f"{path}: expected 2 or 3 columns, found {arr.shape[1]}")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Evaluate at unit vectors ``u`` of shape ``(..., dim)``."""
        u = np.asarray(u, dtype=float)
        if self._func is not None:
            return np.asarray(self._func(u), dtype=float) - self.mean
        if self.dim == 1:
            return np.where(u[..., 0] < 0, self.samples[0], self.samples[1])
        if self.dim == 2:
            m = self.samples.size
            t = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2 * math.pi) * m / (2 * math.pi)
            i0 = np.floor(t).astype(int) % m
            frac = t - np.floor(t)
            return (1 - frac) * self.samples[i0] + frac * self.samples[(i0 + 1) % m]
        nt, nph = self.samples.shape
        th = np.arccos(np.clip(u[..., 2], -1, 1)) * nt / math.pi - 0.5
        ph = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2 * math.pi) * nph / (2 * math.pi)
        t0 = np.clip(np.floor(th).astype(int), 0, nt - 1)
        t1 = np.clip(t0 + 1, 0, nt - 1)
        ft = np.clip(th - np.floor(th), 0, 1)
        ft = np.where(th < 0, 0.0, ft)
        p0 = np.floor(ph).astype(int) % nph
        p1 = (p0 + 1) % nph
        fp = ph - np.floor(ph)
        s = self.samples
        return (1 - ft) * ((1 - fp) * s[t0, p0] + fp * s[t0, p1]) + ft * ((1 - fp) * s[t1, p0] + fp * s[t1, p1])


def _sphere_points(dim: int, shape: tuple[int, ...]) -> np.ndarray:
    """Directions of the sample layout, shape ``shape + (dim,)``."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        th = 2 * math.pi * np.arange(shape[0]) / shape[0]
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    nt, nph = shape
    th = (np.arange(nt) + 0.5) * math.pi / nt
    ph = 2 * math.pi * np.arange(nph) / nph
    T, P = np.meshgrid(th, ph, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)


def _riesz(j):
    return lambda u: u[..., j]


BUILTIN_KERNELS: dict[str, dict[int, Callable]] = {
    "hilbert": {1: lambda u: u[..., 0] / math.pi},
    "riesz-1": {2: _riesz(0), 3: _riesz(0)},
    "riesz-2": {2: _riesz(1), 3: _riesz(1)},
    "riesz-3": {3: _riesz(2)},
    "even-2": {2: lambda u: u[..., 0] ** 2 - u[..., 1] ** 2, 3: lambda u: 1.5 * u[..., 2] ** 2 - 0.5},
    "odd-3": {2: lambda u: 4 * u[..., 0] ** 3 - 3 * u[..., 0], 3: lambda u: 2.5 * u[..., 2] ** 3 - 1.5 * u[..., 2]},
    "zero": {1: lambda u: 0 * u[..., 0], 2: lambda u: 0 * u[..., 0], 3: lambda u: 0 * u[..., 0]},
}
BUILTIN_KERNELS["legendre-even"] = BUILTIN_KERNELS["even-2"]
BUILTIN_KERNELS["legendre-odd"] = BUILTIN_KERNELS["odd-3"]


@dataclass(frozen=True)
class ConvolutionCZ:
    """Convolution kernel ``Omega(y') / |y|^n``; ``size_bound`` is ``sup |Omega|``."""

    kernel: SphereKernel
    label: str = ""
    size_bound: float = field(init=False)

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.kernel.label)
        object.__setattr__(self, "size_bound", self.kernel.sup)

    @classmethod
    def builtin(cls, name: str, dim: int) -> "ConvolutionCZ":
        return cls(SphereKernel.builtin(name, dim))

    @property
    def dim(self) -> int:
        return self.kernel.dim


# --------------------------------------------------------------------------
# maximal operators
# --------------------------------------------------------------------------


def _ladder_for(f: GridFunction, ladder: CubeLadder | None) -> CubeLadder:
    ladder = ladder or CubeLadder(f.grid)
    _check_ladder(f.grid, ladder)
    return ladder


def hl_maximal(f: GridFunction, ladder: CubeLadder | None = None) -> GridFunction:
    ladder = _ladder_for(f, ladder)
    return GridFunction(f.grid, _max_averages_array(np.abs(f.values), ladder.sides, f.grid.dim))


def iterated_maximal(f: GridFunction, m: int, ladder: CubeLadder | None = None) -> GridFunction:
    if m < 1:
        raise ValueError(f"iteration count must be >= 1, got {m}")
    out = f
    for _ in range(m):
        out = hl_maximal(out, ladder)
    return out


def power_maximal(f: GridFunction, r: float, ladder: CubeLadder | None = None) -> GridFunction:
    """``M_r f = M(|f|^r)^(1/r)``."""
    if not r > 0:
        raise ValueError(f"power r must be positive, got {r}")
    ladder = _ladder_for(f, ladder)
    powered = np.abs(f.values) ** r
    m = _max_averages_array(powered, ladder.sides, f.grid.dim)
    return GridFunction(f.grid, m ** (1.0 / r))


def lorentz_maximal(f: GridFunction, idx: LorentzIndex, ladder: CubeLadder | None = None) -> GridFunction:
    """Largest normalised local ``L^{s,q}`` norm over ladder cubes containing each node.

    Sorting cost grows like ``N^dim * k^dim`` per side, so this is the slow path.
    """
    if math.isinf(idx.s):
        raise ValueError("Lorentz maximal operator needs finite s")
    ladder = _ladder_for(f, ladder)
    dim = f.grid.dim
    out = np.zeros(f.grid.shape)
    for k in ladder.sides:
        local = _kernels.cube_lorentz(f.values, k, idx.s, idx.q)
        np.maximum(out, node_max_over_anchors(local, k, dim), out=out)
    return GridFunction(f.grid, out)


# --------------------------------------------------------------------------
# convolution operators
# --------------------------------------------------------------------------


def _check_cap(grid: Grid) -> None:
    cap = CONVOLUTION_CAPS[grid.dim]
    if grid.N > cap:
        raise ValueError(f"direct-sum operators are capped at N <= {cap} in dim {grid.dim}, got N={grid.N}")


def _offsets(grid: Grid) -> np.ndarray:
    """Integer offsets ``-(N-1)..(N-1)`` per axis, shape ``(2N-1,)*dim + (dim,)``."""
    r = np.arange(-(grid.N - 1), grid.N)
    return np.stack(np.meshgrid(*([r] * grid.dim), indexing="ij"), axis=-1).astype(float)


def riesz_kernel(grid: Grid, alpha: float) -> np.ndarray:
    """Cell weights of ``|z|^(alpha-n)``; the centre cell uses the equal-volume ball."""
    n, h = grid.dim, grid.h
    j = _offsets(grid)
    r = np.sqrt(np.sum(j**2, axis=-1)) * h
    centre = (grid.N - 1,) * n
    r[centre] = 1.0
    K = r ** (alpha - n) * h**n
    area = _unit_sphere_area(n)
    rho = (n * h**n / area) ** (1.0 / n)
    K[centre] = area * rho**alpha / alpha
    return K


def singular_kernel(grid: Grid, T: ConvolutionCZ) -> np.ndarray:
    """``Omega(y') / |y|^n * h^n`` on offsets; the centre cell is omitted (principal value)."""
    if T.dim != grid.dim:
        raise ValueError(f"kernel is {T.dim}-dimensional, grid is {grid.dim}-dimensional")
    j = _offsets(grid)
    r = np.sqrt(np.sum(j**2, axis=-1))
    centre = (grid.N - 1,) * grid.dim
    r[centre] = 1.0
    K = T.kernel(j / r[..., None]) / r**grid.dim
    K[centre] = 0.0
    return K


def _use_direct(grid: Grid, method: str) -> bool:
    if method not in ("auto", "direct", "fft"):
        raise ValueError(f"method must be auto, direct or fft, got {method!r}")
    if method == "auto":
        return grid.N**grid.dim * (2 * grid.N - 1) ** grid.dim <= _DIRECT_PAIR_LIMIT
    return method == "direct"


def _shift_slices(j, N):
    """Slices (dst, src) with dst[x] <- src[x - j]."""
    dst, src = [], []
    for o in j:
        o = int(o)
        if o >= 0:
            dst.append(slice(o, N))
            src.append(slice(0, N - o))
        else:
            dst.append(slice(0, N + o))
            src.append(slice(-o, N))
    return tuple(dst), tuple(src)


def _half_offsets(grid: Grid):
    """Offsets ``j > 0`` in lexicographic order (one of each ``+-j`` pair)."""
    r = range(-(grid.N - 1), grid.N)
    import itertools

    for j in itertools.product(r, repeat=grid.dim):
        if j > (0,) * grid.dim:
            yield j


def _paired_sum(values: np.ndarray, K: np.ndarray, grid: Grid, b: np.ndarray | None = None, m: int = 0) -> np.ndarray:
    """``sum_y K(x-y) (b(x)-b(y))^m f(y)`` accumulated in ``(+j, -j)`` pairs."""
    N = grid.N
    c = N - 1
    acc = np.zeros(grid.shape)
    centre = K[(c,) * grid.dim]
    if centre != 0.0 and m == 0:
        acc += centre * values
    for j in _half_offsets(grid):
        kp = K[tuple(c + o for o in j)]
        km = K[tuple(c - o for o in j)]
        if kp == 0.0 and km == 0.0:
            continue
        d1, s1 = _shift_slices(j, N)  # f(x - j)
        d2, s2 = _shift_slices(tuple(-o for o in j), N)  # f(x + j)
        t1 = np.zeros(grid.shape)
        t2 = np.zeros(grid.shape)
        if m == 0:
            t1[d1] = kp * values[s1]
            t2[d2] = km * values[s2]
        else:
            t1[d1] = kp * (b[d1] - b[s1]) ** m * values[s1]
            t2[d2] = km * (b[d2] - b[s2]) ** m * values[s2]
        acc += t1 + t2
    return acc


def _fft_apply(values: np.ndarray, K: np.ndarray, grid: Grid) -> np.ndarray:
    N = grid.N
    full = fftconvolve(values, K, mode="full")
    return full[(slice(N - 1, 2 * N - 1),) * grid.dim]


def _convolve(values: np.ndarray, K: np.ndarray, grid: Grid, method: str) -> np.ndarray:
    if _use_direct(grid, method):
        return _paired_sum(values, K, grid)
    return _fft_apply(values, K, grid)


def riesz_potential(f: GridFunction, alpha: float, method: str = "auto") -> GridFunction:
    """``I_alpha f(x) = int f(y) |x-y|^(alpha-n) dy`` by the midpoint rule."""
    n = f.grid.dim
    if not (0 < alpha < n):
        raise ValueError(f"alpha must lie in (0, {n}), got {alpha}")
    _check_cap(f.grid)
    K = riesz_kernel(f.grid, alpha)
    return GridFunction(f.grid, _convolve(f.values, K, f.grid, method))


def rough_singular(f: GridFunction, T: ConvolutionCZ, method: str = "auto") -> GridFunction:
    """Principal-value ``T_Omega f``: the centre cell is dropped, offsets summed in pairs."""
    _check_cap(f.grid)
    K = singular_kernel(f.grid, T)
    return GridFunction(f.grid, _convolve(f.values, K, f.grid, method))


def _equal_volume_radius(grid: Grid) -> float:
    n = grid.dim
    return (n * grid.h**n / _unit_sphere_area(n)) ** (1.0 / n)


def centre_cell_term(f: GridFunction, b: GridFunction, T: ConvolutionCZ, m: int) -> np.ndarray:
    """Contribution of the omitted centre cell to ``T_b^m f`` for ``m >= 1``.

    With ``b(x) - b(y) ~ grad b(x) . (x - y)`` the integrand over the centre
    cell is ``(grad b . z)^m Omega(z') / |z|^n f(x)``, which is integrable;
    over the ball of the cell's volume it equals
    ``f(x) rho^m / m * int_S (grad b . u)^m Omega(u) du``.  ``grad b`` uses
    the same central differences as :func:`sobolab.grid.gradient`.
    """
    grid = f.grid
    parts = np.gradient(b.values, grid.h, edge_order=1)
    g = np.stack(parts if grid.dim > 1 else [parts], axis=-1)
    rho = _equal_volume_radius(grid)
    return f.values * (rho**m / m) * T.kernel.moment(g, m)


def commutator(
    f: GridFunction, b: GridFunction, T: ConvolutionCZ, m: int, method: str = "auto", centre_term: bool = True
) -> GridFunction:
    """``T_b^m f(x) = int (b(x) - b(y))^m K(x, y) f(y) dy``; ``m = 0`` is ``T f``.

    For ``m >= 1`` the integrand is bounded near the diagonal, so the centre
    cell is not a principal value: its first-order Taylor contribution is
    added unless ``centre_term=False``, which gives the bare off-diagonal sum
    ``b T f - T(b f)`` (for ``m = 1``).
    """
    if m < 0:
        raise ValueError(f"commutator order must be >= 0, got {m}")
    if b.grid != f.grid:
        raise ValueError("f and b live on different grids")
    if m == 0:
        return rough_singular(f, T, method)
    _check_cap(f.grid)
    grid = f.grid
    K = singular_kernel(grid, T)
    if _use_direct(grid, method):
        out = _paired_sum(f.values, K, grid, b.values, m)
    else:
        # binomial expansion: sum_i C(m,i) b^(m-i) (-1)^i T(b^i f)
        bv = b.values
        out = np.zeros(grid.shape)
        for i in range(m + 1):
            out += comb(m, i) * (-1) ** i * bv ** (m - i) * _fft_apply(bv**i * f.values, K, grid)
    if centre_term:
        out = out + centre_cell_term(f, b, T, m)
    return GridFunction(grid, out)


def _xlogabs(t: np.ndarray) -> np.ndarray:
    """``t log|t|`` with the value 0 at ``t = 0``."""
    out = np.zeros_like(t)
    nz = t != 0
    out[nz] = t[nz] * np.log(np.abs(t[nz]))
    return out


def nonlinear_commutator(f: GridFunction, T: ConvolutionCZ, method: str = "auto") -> GridFunction:
    """``N f = T(f log|f|) - T f log|T f|``."""
    K = _prepare(f, T)
    tf = _convolve(f.values, K, f.grid, method)
    tflog = _convolve(_xlogabs(f.values), K, f.grid, method)
    return GridFunction(f.grid, tflog - _xlogabs(tf))


def _prepare(f: GridFunction, T: ConvolutionCZ) -> np.ndarray:
    _check_cap(f.grid)
    return singular_kernel(f.grid, T)


def nonlinear_split(
    f: GridFunction, T: ConvolutionCZ, ladder: CubeLadder | None = None, method: str = "auto"
) -> tuple[GridFunction, GridFunction, GridFunction]:
    """Pieces ``N1 = T(f log(|f|/Mf))``, ``N2 = T(f log Mf) - log Mf * T f``, ``N3 = -Tf log(|Tf|/Mf)``.

    ``N2`` is minus the first-order commutator with ``b = log Mf``, which is
    the sign that makes the three pieces add up to ``N f``.  It is taken
    without the centre-cell term so the sum reproduces ``N f`` exactly:
    ``log Mf`` is only Lipschitz, and every piece then uses the same discrete ``T``.
    """
    if not np.any(f.values):
        raise ValueError("the split is undefined for f = 0 (N f itself is 0)")
    grid = f.grid
    K = _prepare(f, T)
    mf = hl_maximal(f, ladder).values
    pos = mf > 0
    logm = np.zeros(grid.shape)
    logm[pos] = np.log(mf[pos])

    fv = f.values
    g1 = np.zeros(grid.shape)
    nz = fv != 0
    g1[nz] = fv[nz] * np.log(np.abs(fv[nz]) / mf[nz])
    n1 = _convolve(g1, K, grid, method)

    n2 = -commutator(f, GridFunction(grid, logm), T, 1, method, centre_term=False).values
    n2[~pos] = 0.0

    tf = _convolve(fv, K, grid, method)
    n3 = np.zeros(grid.shape)
    live = pos & (tf != 0)
    n3[live] = -tf[live] * np.log(np.abs(tf[live]) / mf[live])
    n1[~pos] = 0.0
    return GridFunction(grid, n1), GridFunction(grid, n2), GridFunction(grid, n3)
