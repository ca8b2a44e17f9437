"""Lebesgue, weak and Lorentz norms from exact distribution functions, and BMO.

The distribution function ``t -> mu{|f| > t}`` of sampled data is a step
function, so the Lorentz integral is a finite sum and no quadrature enters.
For sorted distinct values ``v_1 > v_2 > ... > v_J > v_{J+1} = 0`` with
cumulative masses ``Lambda_j = mu{|f| >= v_j}``::

    ||f||_{s,q}^q = (s/q) * sum_j Lambda_j**(q/s) * (v_j**q - v_{j+1}**q)
    ||f||_{s,inf}  = max_j  v_j * Lambda_j**(1/s)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Cube, CubeLadder, Grid, GridFunction, _check_ladder, box_averages, ladder_argmax

__all__ = [
    "LorentzIndex",
    "DiscreteMeasure",
    "lp_norm",
    "weak_norm",
    "lorentz_norm",
    "local_lorentz_norm",
    "bmo_norm",
    "OscillationReport",
    "distribution",
    "weak_norm_samples",
    "lorentz_norm_samples",
]


@dataclass(frozen=True)
class LorentzIndex:
    s: float
    q: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"Lorentz index s must be positive, got {self.s}")
        if not self.q > 0:
            raise ValueError(f"Lorentz index q must be positive, got {self.q}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "q", float(self.q))


class DiscreteMeasure:
    """Cell masses ``density * h**dim``; Lebesgue measure is density one."""

    def __init__(self, grid: Grid, density: GridFunction | np.ndarray | None = None):
        if density is None:
            dens = np.ones(grid.shape)
        else:
            dens = density.values if isinstance(density, GridFunction) else np.asarray(density, dtype=float)
        if dens.shape != grid.shape:
            raise ValueError(f"density shape {dens.shape} does not match grid {grid.shape}")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValueError("measure density must be finite and nonnegative")
        self.grid = grid
        self.density = dens

    @classmethod
    def lebesgue(cls, grid: Grid) -> "DiscreteMeasure":
        return cls(grid)

    @classmethod
    def weighted(cls, w: GridFunction, power: float = 1.0) -> "DiscreteMeasure":
        """The measure ``w**power dx``."""
        w.require_weight()
        return cls(w.grid, w.values**power)

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.grid.cell_volume


def _masses(f: GridFunction, mu: DiscreteMeasure | None) -> np.ndarray:
    if mu is None:
        return np.full(f.grid.shape, f.grid.cell_volume)
    if mu.grid != f.grid:
        raise ValueError("function and measure live on different grids")
    return mu.masses


def distribution(values: np.ndarray, masses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct positive ``|values|`` in decreasing order and ``mu{|f| >= v}`` at each."""
    a = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    keep = (a > 0) & (m > 0)
    if not keep.any():
        return np.empty(0), np.empty(0)
    uniq, inv = np.unique(a[keep], return_inverse=True)
    mass = np.bincount(inv, weights=m[keep], minlength=uniq.size)
    return uniq[::-1], np.cumsum(mass[::-1])


def weak_norm_samples(values, masses, s: float) -> float:
    v, lam = distribution(values, masses)
    if v.size == 0:
        return 0.0
    return float(np.max(v * lam ** (1.0 / s)))


def lorentz_norm_samples(values, masses, s: float, q: float) -> float:
    if math.isinf(q):
        return weak_norm_samples(values, masses, s)
    v, lam = distribution(values, masses)
    if v.size == 0:
        return 0.0
    # factor out the largest value and the total mass so tiny data cannot underflow
    top, mass = v[0], lam[-1]
    vq = (v / top) ** q
    steps = vq - np.append(vq[1:], 0.0)
    total = (s / q) * math.fsum((lam / mass) ** (q / s) * steps)
    return top * mass ** (1.0 / s) * total ** (1.0 / q)


def lp_norm(f: GridFunction, p: float, mu: DiscreteMeasure | None = None) -> float:
    if not p > 0:
        raise ValueError(f"exponent p must be positive, got {p}")
    if math.isinf(p):
        raise ValueError("p = inf is not supported; use max(|f|)")
    m = _masses(f, mu)
    a = np.abs(f.values)
    top, mass = float(np.max(a)), math.fsum(m.ravel())
    if top == 0 or mass == 0:
        return 0.0
    return top * mass ** (1.0 / p) * math.fsum(((a / top) ** p * (m / mass)).ravel()) ** (1.0 / p)


def weak_norm(f: GridFunction, s: float, mu: DiscreteMeasure | None = None) -> float:
    """``sup_t t * mu{|f| > t}**(1/s)``, evaluated just below each distinct value."""
    if not s > 0:
        raise ValueError(f"exponent s must be positive, got {s}")
    return weak_norm_samples(f.values, _masses(f, mu), s)


def lorentz_norm(f: GridFunction, idx: LorentzIndex, mu: DiscreteMeasure | None = None) -> float:
    if math.isinf(idx.s):
        raise ValueError("s = inf is not supported")
    return lorentz_norm_samples(f.values, _masses(f, mu), idx.s, idx.q)


def local_lorentz_norm(f: GridFunction, cube: Cube, idx: LorentzIndex) -> float:
    """Lorentz norm of ``f`` on ``cube`` under the probability measure ``dx/|Q|``."""
    cube.check(f.grid)
    block = f.values[cube.slices]
    return lorentz_norm_samples(block, np.full(block.shape, 1.0 / block.size), idx.s, idx.q)


@dataclass(frozen=True)
class OscillationReport:
    value: float
    cube: Cube
    family: str

    def __float__(self):
        return self.value


def bmo_norm(b: GridFunction, ladder: CubeLadder | None = None) -> OscillationReport:
    """Largest mean oscillation ``avg_Q |b - b_Q|`` over the ladder."""
    ladder = ladder or CubeLadder(b.grid)
    _check_ladder(b.grid, ladder)
    dim = b.grid.dim
    per_side = []
    for k in ladder.sides:
        if k == 1:
            per_side.append((1, np.zeros((b.grid.N,) * dim)))
            continue
        centers = box_averages(b.values, k, dim, prefix=b.prefix)
        per_side.append((k, _kernels.cube_oscillation(b.values, k, centers)))
    value, cube = ladder_argmax(per_side)
    return OscillationReport(value, cube, ladder.describe())
