"""Uniform box grids, grid functions, cube ladders and the box-average kernels.

Nodes sit at cell centres, ``x_i = -L + (i + 1/2) h`` with ``h = 2L/N``, and a
grid function is read as piecewise constant on cells.  Cubes are anchored at
nodes and measured in cells; the ladder holds every anchor for every dyadic
side ``1, 2, 4, ..., N``.

Box sums come from double-double prefix sums (an error-free ``two_sum``
cascade), so each cube sum is correctly rounded for all practical inputs and
box averages agree bit-for-bit with a ``math.fsum`` enumeration.
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "VectorField",
    "Cube",
    "CubeLadder",
    "ExponentSet",
    "sample",
    "cell_average",
    "cell_minimum",
    "gradient",
    "integrate",
    "box_average",
    "box_averages",
    "window_max_averages",
    "brute_force_max_averages",
    "probe",
    "ladder_argmax",
    "save_grid_function",
    "load_grid_function",
]


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"half width L must be positive and finite, got {self.L}")
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def coords(self) -> np.ndarray:
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    def points(self) -> np.ndarray:
        """Node positions, shape ``(*shape, dim)``."""
        axes = np.meshgrid(*([self.coords()] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points() ** 2, axis=-1))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.L, self.N * factor)

    def describe(self) -> str:
        return f"dim={self.dim},N={self.N},L={self.L!r}"


class GridFunction:
    """Finite real samples on a grid, one per node, read-only."""

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"values have shape {arr.shape}, grid expects {grid.shape}")
        bad = ~np.isfinite(arr)
        if bad.any():
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(f"non-finite value at node {node}")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    def __repr__(self):
        return f"GridFunction({self.grid.describe()})"

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def require_weight(self, name: str = "weight") -> None:
        if np.any(self.values <= 0):
            node = tuple(int(i) for i in np.argwhere(self.values <= 0)[0])
            raise ValueError(f"{name} must be strictly positive; value {self.values[node]!r} at node {node}")

    @cached_property
    def prefix(self) -> tuple[np.ndarray, np.ndarray]:
        """Double-double prefix sums, shape ``(N+1,)*dim``, zero-padded at the front."""
        return _prefix_dd(self.values, self.grid.dim)


@dataclass(frozen=True)
class VectorField:
    components: tuple[GridFunction, ...]

    def __post_init__(self):
        grids = {c.grid for c in self.components}
        if len(grids) != 1:
            raise ValueError("all components must share one grid")

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def norm(self) -> GridFunction:
        sq = sum(c.values**2 for c in self.components)
        return GridFunction(self.grid, np.sqrt(sq))


@dataclass(frozen=True)
class Cube:
    anchor: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(a) for a in self.anchor))
        if self.side < 1:
            raise ValueError(f"cube side must be >= 1 cells, got {self.side}")

    def check(self, grid: Grid) -> None:
        if len(self.anchor) != grid.dim:
            raise ValueError(f"cube anchor {self.anchor} does not match dim {grid.dim}")
        if any(a < 0 or a + self.side > grid.N for a in self.anchor):
            raise ValueError(f"cube {self} lies outside the {grid.N}-node box")

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + self.side) for a in self.anchor)

    def contains(self, node: Sequence[int]) -> bool:
        return all(a <= i < a + self.side for a, i in zip(self.anchor, node))

    def length(self, grid: Grid) -> float:
        return self.side * grid.h

    def to_csv(self) -> str:
        return ";".join(str(a) for a in self.anchor)


@dataclass(frozen=True)
class CubeLadder:
    grid: Grid
    sides: tuple[int, ...] = None

    def __post_init__(self):
        full = tuple(2**j for j in range(int(math.log2(self.grid.N)) + 1))
        sides = full if self.sides is None else tuple(sorted(set(int(s) for s in self.sides)))
        for s in sides:
            if s not in full:
                raise ValueError(f"ladder side {s} is not a dyadic side of an N={self.grid.N} grid")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def full(cls, grid: Grid) -> "CubeLadder":
        return cls(grid)

    def anchors_per_axis(self, side: int) -> int:
        return self.grid.N - side + 1

    def cubes(self) -> Iterator[Cube]:
        for k in self.sides:
            n = self.anchors_per_axis(k)
            for anchor in itertools.product(range(n), repeat=self.grid.dim):
                yield Cube(anchor, k)

    def __len__(self):
        return sum(self.anchors_per_axis(k) ** self.grid.dim for k in self.sides)

    def describe(self) -> str:
        return f"dyadic-sides[{','.join(map(str, self.sides))}]/all-anchors/N={self.grid.N}"


@dataclass(frozen=True)
class ExponentSet:
    """Sobolev exponents for ``1 <= p < n``."""

    n: int
    p: float
    p_prime: float = field(init=False)
    p_star: float = field(init=False)
    n_prime: float = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if not (1 <= self.p < self.n):
            raise ValueError(f"need 1 <= p < n, got p={self.p}, n={self.n}")
        p, n = float(self.p), self.n
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p_prime", math.inf if p == 1 else p / (p - 1))
        object.__setattr__(self, "p_star", n * p / (n - p))
        object.__setattr__(self, "n_prime", n / (n - 1))


# --------------------------------------------------------------------------
# double-double kernels
# --------------------------------------------------------------------------


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    s, e = _fast_two_sum(s, e + t)
    return _fast_two_sum(s, e + f)


def _prefix_dd(values: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive prefix sums over the trailing ``dim`` axes, padded with a zero row in front."""
    hi = np.array(values, dtype=float)
    lo = np.zeros_like(hi)
    for ax in range(hi.ndim - dim, hi.ndim):
        hi = np.moveaxis(hi, ax, -1)
        lo = np.moveaxis(lo, ax, -1)
        n, d = hi.shape[-1], 1
        while d < n:
            nh, nl = _dd_add(hi[..., d:], lo[..., d:], hi[..., :-d], lo[..., :-d])
            hi = np.concatenate([hi[..., :d], nh], axis=-1)
            lo = np.concatenate([lo[..., :d], nl], axis=-1)
            d *= 2
        hi = np.moveaxis(hi, -1, ax)
        lo = np.moveaxis(lo, -1, ax)
    pad = [(0, 0)] * (hi.ndim - dim) + [(1, 0)] * dim
    return np.pad(hi, pad), np.pad(lo, pad)


def _box_sums(prefix: tuple[np.ndarray, np.ndarray], k: int, dim: int) -> np.ndarray:
    """Sums over every side-``k`` cube, one per anchor, along the trailing ``dim`` axes."""
    hi, lo = prefix
    n_a = hi.shape[-1] - k  # (N + 1) - k anchors per axis
    acc_h = acc_l = None
    for corner in itertools.product((0, 1), repeat=dim):
        idx = (Ellipsis,) + tuple(slice(c * k, c * k + n_a) for c in corner)
        sign = 1.0 if (dim - sum(corner)) % 2 == 0 else -1.0
        ch, cl = sign * hi[idx], sign * lo[idx]
        if acc_h is None:
            acc_h, acc_l = ch, cl
        else:
            acc_h, acc_l = _dd_add(acc_h, acc_l, ch, cl)
    return acc_h + acc_l


def box_averages(values: np.ndarray, k: int, dim: int, prefix=None, guard: bool = False) -> np.ndarray:
    """Averages over all side-``k`` cubes (indexed by anchor) of the trailing ``dim`` axes.

    With ``guard`` (only for ``values.ndim == dim``), cubes whose sum is
    below ``2**-50`` of the total absolute mass are re-summed block by block.
    Prefix differences carry an absolute error near ``2**-106`` of the total,
    which swamps such cubes: an all-zero cube in the far field would
    otherwise get a tiny nonzero average.
    """
    if prefix is None:
        prefix = _prefix_dd(values, dim)
    sums = _box_sums(prefix, k, dim)
    if guard and values.ndim == dim:
        tol = 2.0**-50 * math.fsum(np.abs(values).ravel())
        bad = np.flatnonzero(np.abs(sums) <= tol)
        if bad.size:
            from ._kernels import block_sums

            starts = np.ravel_multi_index(np.unravel_index(bad, sums.shape), values.shape)
            offsets = np.ravel_multi_index(np.indices((k,) * dim).reshape(dim, -1), values.shape)
            fixed = np.empty(bad.size)
            block_sums(np.ascontiguousarray(values, dtype=float).ravel(), starts, offsets, fixed)
            sums.flat[bad] = fixed
    return sums / float(k) ** dim


def _sliding_max_last(a: np.ndarray, k: int) -> np.ndarray:
    """``out[i] = max(a[i:i+k])`` along the last axis (van Herk / Gil-Werman)."""
    if k == 1:
        return a
    n = a.shape[-1]
    nb = -(-n // k)
    pad = nb * k - n
    ap = np.concatenate([a, np.full(a.shape[:-1] + (pad,), -np.inf)], axis=-1) if pad else a
    blocks = ap.reshape(a.shape[:-1] + (nb, k))
    fwd = np.maximum.accumulate(blocks, axis=-1).reshape(ap.shape)
    bwd = np.maximum.accumulate(blocks[..., ::-1], axis=-1)[..., ::-1].reshape(ap.shape)
    return np.maximum(bwd[..., : n - k + 1], fwd[..., k - 1 : n])


def sliding_max(a: np.ndarray, k: int, dim: int) -> np.ndarray:
    """Max over every side-``k`` window of the trailing ``dim`` axes, indexed by anchor."""
    out = a
    for ax in range(a.ndim - dim, a.ndim):
        out = np.moveaxis(_sliding_max_last(np.moveaxis(out, ax, -1), k), -1, ax)
    return out


def node_max_over_anchors(anchor_vals: np.ndarray, k: int, dim: int) -> np.ndarray:
    """For each node, the max of ``anchor_vals`` over anchors whose side-``k`` cube holds the node."""
    if k == 1:
        return anchor_vals
    out = anchor_vals
    for ax in range(out.ndim - dim, out.ndim):
        moved = np.moveaxis(out, ax, -1)
        fill = np.full(moved.shape[:-1] + (k - 1,), -np.inf)
        padded = np.concatenate([fill, moved, fill], axis=-1)
        out = np.moveaxis(_sliding_max_last(padded, k), -1, ax)
    return out


def _max_averages_array(a: np.ndarray, sides: Sequence[int], dim: int, prefix=None) -> np.ndarray:
    # ``a`` is nonnegative; single-cell cubes reproduce it exactly
    if prefix is None:
        prefix = _prefix_dd(a, dim)
    out = np.array(a, dtype=float, copy=True)
    for k in sides:
        if k == 1:
            continue
        avg = _box_sums(prefix, k, dim) / float(k) ** dim
        np.maximum(out, node_max_over_anchors(avg, k, dim), out=out)
    return out


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def _call_closure(fn: Callable, pts: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(pts), dtype=float)
    if out.shape != pts.shape[:-1]:
        out = np.broadcast_to(out, pts.shape[:-1]).astype(float)
    return out


def sample(fn: Callable[[np.ndarray], np.ndarray], grid: Grid) -> GridFunction:
    """Evaluate a vectorised closure at every node.

    ``fn`` receives an array of points of shape ``(..., dim)`` and returns the
    values with shape ``(...)``.
    """
    pts = grid.points()
    vals = _call_closure(fn, pts)
    bad = ~np.isfinite(vals)
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"closure returned {vals[node]!r} at node {node} (x={tuple(pts[node])})")
    return GridFunction(grid, vals)


def _gauss01(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor_rule(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss01(order)
    pts = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    wts = np.prod(np.stack(np.meshgrid(*([w] * dim), indexing="ij"), axis=-1).reshape(-1, dim), axis=-1)
    return pts, wts


def _graded_corner_mean(fn, corner: np.ndarray, signs: np.ndarray, h: float, order: int, rtol: float) -> float:
    """Mean of ``fn`` over the cell ``corner + signs * [0, h]^dim``, graded towards ``corner``.

    Level ``l`` covers ``[0, s]^dim \\ [0, s/2]^dim`` with ``s = h 2^-l``; the
    remaining inner cube is estimated by a geometric tail once levels settle.
    """
    dim = corner.size
    rule_pts, rule_w = _tensor_rule(order, dim)
    shells = [np.array(c) for c in itertools.product((0, 1), repeat=dim) if any(c)]
    base = np.stack(shells)  # which half each sub-cube occupies
    # unit-level points: sub-cube offsets (0 or 1/2) + scaled rule over half-width
    unit = (base[:, None, :] * 0.5 + rule_pts[None, :, :] * 0.5).reshape(-1, dim)
    unit_w = np.tile(rule_w, len(shells)) * 0.5**dim
    total, levels, batch = 0.0, [], 48
    level = 0
    while True:
        scales = h * 0.5 ** np.arange(level, level + batch)
        pts = corner + signs * (scales[:, None, None] * unit[None, :, :])
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            vals = _call_closure(fn, pts)
        lv = (vals * unit_w).sum(axis=-1) * scales**dim
        done = False
        for v in lv:
            if not np.isfinite(v):
                done = True
                break
            levels.append(float(v))
            total += v
            if len(levels) > 8 and abs(v) <= rtol * abs(total):
                done = True
                break
        level += batch
        if done or level > 4000:
            break
    if len(levels) >= 2 and levels[-2] != 0:
        rho = levels[-1] / levels[-2]
        if 0 < rho < 1:
            total += levels[-1] * rho / (1 - rho)
    return total / h**dim


def cell_average(
    fn: Callable[[np.ndarray], np.ndarray],
    grid: Grid,
    order: int = 4,
    singular_point: Sequence[float] | None = None,
    rtol: float = 1e-13,
) -> GridFunction:
    """Exact-in-the-limit cell means of a closure (tensor Gauss-Legendre per cell).

    With ``singular_point`` (which must be a cell corner) cells within three
    cells of it are integrated on a finer composite rule, and the cells that
    touch it on a geometric mesh graded into the corner.  Use this for
    integrands with an integrable point singularity, where node sampling
    misses most of the mass.
    """
    dim, h, N = grid.dim, grid.h, grid.N
    lo = -grid.L + np.arange(N) * h
    rule_pts, rule_w = _tensor_rule(order, dim)
    acc = np.zeros(grid.shape)
    corners = np.stack(np.meshgrid(*([lo] * dim), indexing="ij"), axis=-1)
    for q, wq in zip(rule_pts, rule_w):
        acc += wq * _call_closure(fn, corners + q * h)
    if singular_point is not None:
        sp = np.asarray(singular_point, dtype=float)
        c = (sp + grid.L) / h
        ci = np.rint(c).astype(int)
        if not np.allclose(c, ci, atol=1e-9, rtol=0) or np.any(ci <= 0) or np.any(ci >= N):
            raise ValueError(f"singular point {tuple(sp)} must be an interior cell corner")
        sub_pts, sub_w = _tensor_rule(8, dim)
        split = np.stack(np.meshgrid(*([np.arange(4) / 4.0] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        fine_pts = (split[:, None, :] + sub_pts[None, :, :] / 4.0).reshape(-1, dim)
        fine_w = np.tile(sub_w, len(split)) / 4.0**dim
        ranges = [range(max(0, i - 3), min(N, i + 3)) for i in ci]
        for cell in itertools.product(*ranges):
            cell = np.array(cell)
            touching = np.all((cell == ci) | (cell == ci - 1))
            if touching:
                signs = np.where(cell == ci, 1.0, -1.0)
                acc[tuple(cell)] = _graded_corner_mean(fn, sp, signs, h, 8, rtol)
            else:
                pts = lo[cell] + fine_pts * h
                acc[tuple(cell)] = float(np.sum(fine_w * _call_closure(fn, pts)))
    return GridFunction(grid, acc)


def cell_minimum(fn: Callable[[np.ndarray], np.ndarray], grid: Grid, order: int = 4) -> GridFunction:
    """Per-cell minimum of a closure over the cell corners and an interior Gauss rule."""
    dim, h = grid.dim, grid.h
    lo = -grid.L + np.arange(grid.N) * h
    corners = np.stack(np.meshgrid(*([lo] * dim), indexing="ij"), axis=-1)
    rule_pts, _ = _tensor_rule(order, dim)
    offsets = np.concatenate([np.array(list(itertools.product((0.0, 1.0), repeat=dim))), rule_pts])
    out = np.full(grid.shape, np.inf)
    for q in offsets:
        with np.errstate(divide="ignore"):
            np.minimum(out, _call_closure(fn, corners + q * h), out=out)
    return GridFunction(grid, out)


def gradient(f: GridFunction) -> VectorField:
    """Central differences inside, one-sided differences in the boundary cells."""
    g = f.grid
    parts = np.gradient(f.values, g.h, edge_order=1) if g.dim > 1 else [np.gradient(f.values, g.h, edge_order=1)]
    return VectorField(tuple(GridFunction(g, p) for p in parts))


def integrate(f: GridFunction) -> float:
    return math.fsum(f.values.ravel()) * f.grid.cell_volume


def box_average(f: GridFunction, q: Cube) -> float:
    """Average over a cube in O(1) from the cached prefix sums."""
    q.check(f.grid)
    hi, lo = f.prefix
    acc_h = acc_l = None
    dim = f.grid.dim
    for corner in itertools.product((0, 1), repeat=dim):
        idx = tuple(a + c * q.side for a, c in zip(q.anchor, corner))
        sign = 1.0 if (dim - sum(corner)) % 2 == 0 else -1.0
        ch, cl = sign * hi[idx], sign * lo[idx]
        if acc_h is None:
            acc_h, acc_l = ch, cl
        else:
            acc_h, acc_l = _dd_add(acc_h, acc_l, ch, cl)
    return float(acc_h + acc_l) / float(q.side) ** dim


def window_max_averages(f: GridFunction, ladder: CubeLadder | None = None) -> GridFunction:
    """Per node, the largest average of ``|f|`` over ladder cubes containing it."""
    ladder = ladder or CubeLadder(f.grid)
    _check_ladder(f.grid, ladder)
    a = np.abs(f.values)
    return GridFunction(f.grid, _max_averages_array(a, ladder.sides, f.grid.dim))


def brute_force_max_averages(f: GridFunction, ladder: CubeLadder | None = None) -> GridFunction:
    """Enumerate every ladder cube; reference path for the bench."""
    ladder = ladder or CubeLadder(f.grid)
    a = np.abs(f.values)
    out = np.zeros_like(a)
    for q in ladder.cubes():
        avg = math.fsum(a[q.slices].ravel()) / float(q.side) ** f.grid.dim
        view = out[q.slices]
        np.maximum(view, avg, out=view)
    return GridFunction(f.grid, out)


def _check_ladder(grid: Grid, ladder: CubeLadder) -> None:
    if ladder.grid != grid:
        raise ValueError(f"ladder built for {ladder.grid.describe()}, function lives on {grid.describe()}")


def probe(f: GridFunction, x: Sequence[float]) -> float:
    """Multilinear interpolation of the node values at ``x`` (clamped to the node hull)."""
    from scipy.interpolate import RegularGridInterpolator

    c = f.grid.coords()
    pt = np.clip(np.asarray(x, dtype=float), c[0], c[-1])
    interp = RegularGridInterpolator((c,) * f.grid.dim, f.values)
    return float(interp(pt[None, :])[0])


# --------------------------------------------------------------------------
# serialisation: header (dim, N, L) then row-major values
# --------------------------------------------------------------------------

_MAGIC = b"SBLG"
_HEADER = struct.Struct("<4sIId")


def save_grid_function(f: GridFunction, path) -> Path:
    path = Path(path)
    g = f.grid
    if path.suffix.lower() == ".csv":
        lines = ["dim,N,L", f"{g.dim},{g.N},{g.L!r}"]
        lines += [repr(float(v)) for v in f.values.ravel(order="C")]
        path.write_text("\n".join(lines) + "\n")
    else:
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, g.dim, g.N, g.L))
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        lines = path.read_text().split()
        if lines[0].strip() != "dim,N,L":
            raise ValueError(f"{path}: missing 'dim,N,L' header")
        dim, N, L = lines[1].split(",")
        grid = Grid(int(dim), float(L), int(N))
        vals = np.array([float(v) for v in lines[2:]])
    else:
        raw = path.read_bytes()
        magic, dim, N, L = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a grid-function file")
        grid = Grid(dim, L, N)
        vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != _node_count(grid):
        raise ValueError(f"{path}: expected {_node_count(grid)} values, found {vals.size}")
    return GridFunction(grid, vals.reshape(grid.shape))


def _node_count(grid: Grid) -> int:
    return grid.N**grid.dim


def ladder_argmax(per_side) -> tuple[float, Cube]:
    """Largest value over ``(side, anchor_array)`` pairs.

    Ties go to the lexicographically smallest anchor, then the smallest side.
    """
    best = None
    for k, arr in per_side:
        flat = int(np.argmax(arr))
        v = float(arr.flat[flat])
        anchor = tuple(int(i) for i in np.unravel_index(flat, arr.shape))
        if best is None or v > best[0] or (v == best[0] and (anchor, k) < (best[1], best[2])):
            best = (v, anchor, k)
    if best is None:
        raise ValueError("empty ladder")
    return best[0], Cube(best[1], best[2])
