"""Muckenhoupt-type weight constants over the cube ladder, and the power-weight family.

Every constant is a maximum of per-cube quantities built from box averages,
so it is evaluated side by side with the same prefix-sum and sliding-window
kernels as the maximal function.  Ties between cubes go to the smallest
anchor, then the smallest side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import (
    Cube,
    CubeLadder,
    ExponentSet,
    Grid,
    GridFunction,
    _check_ladder,
    _max_averages_array,
    box_averages,
    ladder_argmax,
    sample,
    sliding_max,
)

__all__ = [
    "WeightConstantReport",
    "ap_constant",
    "apq_constant",
    "apq_from_power_averages",
    "a1q_constant",
    "a1q_from_power_data",
    "ainfty_constant",
    "ainfty_cube",
    "sharpness_weight",
    "sharpness_function",
    "sharpness_closures",
    "minimal_sharpness_N",
]


@dataclass(frozen=True)
class WeightConstantReport:
    constant: float
    attaining_cube: Cube
    family: str
    definition_tag: str
    p: float = math.nan
    q: float = math.nan

    def __float__(self):
        return self.constant


def _ladder(w: GridFunction, ladder: CubeLadder | None) -> CubeLadder:
    w.require_weight()
    ladder = ladder or CubeLadder(w.grid)
    _check_ladder(w.grid, ladder)
    return ladder


def _report(per_side, ladder, tag, p=math.nan, q=math.nan) -> WeightConstantReport:
    value, cube = ladder_argmax(per_side)
    return WeightConstantReport(value, cube, ladder.describe(), tag, p, q)


def ap_constant(w: GridFunction, p: float, ladder: CubeLadder | None = None) -> WeightConstantReport:
    """``sup_Q (avg_Q w) (avg_Q w^(1-p'))^(p-1)``."""
    if not p > 1:
        raise ValueError(f"A_p needs p > 1, got {p}; use a1q_constant for the endpoint")
    ladder = _ladder(w, ladder)
    dim = w.grid.dim
    pp = p / (p - 1)
    dual = w.values ** (1 - pp)
    per_side = []
    for k in ladder.sides:
        a = box_averages(w.values, k, dim, w.prefix, guard=True)
        b = box_averages(dual, k, dim, guard=True)
        per_side.append((k, a * b ** (p - 1)))
    return _report(per_side, ladder, "A_p", p=p)


def apq_from_power_averages(
    u: np.ndarray, v: np.ndarray, p: float, q: float, ladder: CubeLadder
) -> WeightConstantReport:
    """``A_{p,q}`` constant from cell data ``u`` (standing for ``w^q``) and ``v`` (``w^(-p')``).

    Passing exact cell means of the powers, instead of node samples, gives
    the constant of the underlying continuous weight on the same ladder.
    """
    dim = ladder.grid.dim
    e = q * (p - 1) / p
    per_side = []
    for k in ladder.sides:
        per_side.append((k, box_averages(u, k, dim, guard=True) * box_averages(v, k, dim, guard=True) ** e))
    return _report(per_side, ladder, "A_{p,q}", p=p, q=q)


def apq_constant(w: GridFunction, p: float, q: float, ladder: CubeLadder | None = None) -> WeightConstantReport:
    """``sup_Q (avg_Q w^q) (avg_Q w^(-p'))^(q/p')``."""
    if not p > 1:
        raise ValueError(f"A_(p,q) needs p > 1, got {p}; use a1q_constant for the endpoint")
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    ladder = _ladder(w, ladder)
    pp = p / (p - 1)
    return apq_from_power_averages(w.values**q, w.values ** (-pp), p, q, ladder)


def a1q_from_power_data(u: np.ndarray, low: np.ndarray, q: float, ladder: CubeLadder) -> WeightConstantReport:
    """``sup_Q avg_Q u / min_Q low`` where ``u`` stands for ``w^q`` and ``low`` for its cell minima."""
    dim = ladder.grid.dim
    per_side = []
    for k in ladder.sides:
        mins = -sliding_max(-low, k, dim)
        per_side.append((k, box_averages(u, k, dim, guard=True) / mins))
    return _report(per_side, ladder, "A_{1,q}", p=1.0, q=q)


def a1q_constant(w: GridFunction, q: float, ladder: CubeLadder | None = None) -> WeightConstantReport:
    """``sup_Q (avg_Q w^q) / min_Q w^q``."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    ladder = _ladder(w, ladder)
    wq = w.values**q
    return a1q_from_power_data(wq, wq, q, ladder)


def ainfty_cube(block: np.ndarray) -> float:
    """``(1/w(Q)) sum_Q M(w chi_Q)`` for one cube's values, inner sup over its own dyadic sub-ladder."""
    block = np.asarray(block, dtype=float)
    k = block.shape[0]
    sides = [2**j for j in range(int(math.log2(k)) + 1)]
    m = _max_averages_array(block, sides, block.ndim)
    return math.fsum(m.ravel()) / math.fsum(block.ravel())


def ainfty_constant(
    w: GridFunction, ladder: CubeLadder | None = None, chunk_cells: int = 1 << 22
) -> WeightConstantReport:
    """``sup_Q (1/w(Q)) int_Q M(w chi_Q)`` with ``M`` restricted to cubes inside ``Q``.

    Cubes of one side are processed in batches: the windows are stacked on a
    leading axis and the maximal kernel runs on the trailing axes.
    """
    ladder = _ladder(w, ladder)
    dim = w.grid.dim
    per_side = []
    for k in ladder.sides:
        sub = [2**j for j in range(int(math.log2(k)) + 1)]
        windows = sliding_window_view(w.values, (k,) * dim)
        lead = windows.shape[:dim]
        flat = windows.reshape((-1,) + (k,) * dim)
        ratios = np.empty(flat.shape[0])
        step = max(1, chunk_cells // k**dim)
        axes = tuple(range(1, dim + 1))
        for s in range(0, flat.shape[0], step):
            blk = np.ascontiguousarray(flat[s : s + step])
            m = _max_averages_array(blk, sub, dim)
            ratios[s : s + step] = m.sum(axis=axes) / blk.sum(axis=axes)
        per_side.append((k, ratios.reshape(lead)))
    return _report(per_side, ladder, "A_inf")


# --------------------------------------------------------------------------
# the power-weight family
# --------------------------------------------------------------------------


def _check_delta(delta: float) -> None:
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def minimal_sharpness_N(delta: float, L: float) -> int:
    """Smallest power of two ``N`` with ``h = 2L/N <= delta L / 8``."""
    need = 16.0 / delta
    return max(4, 2 ** math.ceil(math.log2(need)))


def _check_resolution(delta: float, grid: Grid) -> None:
    if grid.h > delta * grid.L / 8 * (1 + 1e-12):
        raise ValueError(
            f"grid too coarse for delta={delta}: need h <= delta*L/8, i.e. N >= {minimal_sharpness_N(delta, grid.L)}"
        )


def sharpness_closures(delta: float, exps: ExponentSet) -> tuple[Callable, Callable, Callable]:
    """Closures ``(w_delta, f_delta, |grad f_delta|)`` on points of shape ``(..., n)``.

    ``w_delta = |x|^((delta-n)/p*)``, ``f_delta = exp(-|x|^delta)`` and
    ``|grad f_delta| = delta |x|^(delta-1) exp(-|x|^delta)``.
    """
    _check_delta(delta)
    e = (delta - exps.n) / exps.p_star

    def radius(x):
        return np.sqrt(np.sum(np.asarray(x) ** 2, axis=-1))

    def w(x):
        return radius(x) ** e

    def f(x):
        return np.exp(-radius(x) ** delta)

    def grad_norm(x):
        r = radius(x)
        return delta * r ** (delta - 1) * np.exp(-(r**delta))

    return w, f, grad_norm


def sharpness_weight(delta: float, exps: ExponentSet, grid: Grid) -> GridFunction:
    """``w_delta`` at the nodes; the grid must resolve ``h <= delta L / 8``."""
    _check_delta(delta)
    if grid.dim != exps.n:
        raise ValueError(f"grid dim {grid.dim} does not match n={exps.n}")
    _check_resolution(delta, grid)
    return sample(sharpness_closures(delta, exps)[0], grid)


def sharpness_function(delta: float, grid: Grid) -> GridFunction:
    """``f_delta = exp(-|x|^delta)`` at the nodes."""
    _check_delta(delta)
    return sample(lambda x: np.exp(-np.sqrt(np.sum(x**2, axis=-1)) ** delta), grid)
