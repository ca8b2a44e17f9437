"""Numerical experiments: power-weight scalings, pointwise domination, Poincare and Sobolev ratios.

Every scan is deterministic given ``(seed, grid, config)``.  Ratios only use
nodes whose denominator exceeds ``tau = 1e-8 * max(denominator)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .grid import (
    Cube,
    CubeLadder,
    ExponentSet,
    Grid,
    GridFunction,
    box_averages,
    cell_average,
    cell_minimum,
    gradient,
    ladder_argmax,
    sample,
)
from .norms import DiscreteMeasure, LorentzIndex, bmo_norm, lp_norm, weak_norm
from .operators import (
    ConvolutionCZ,
    commutator,
    hl_maximal,
    iterated_maximal,
    lorentz_maximal,
    nonlinear_commutator,
    power_maximal,
    riesz_potential,
    rough_singular,
)
from .weights import (
    _check_resolution,
    a1q_constant,
    a1q_from_power_data,
    apq_constant,
    apq_from_power_averages,
    sharpness_closures,
)

__all__ = [
    "TestSuite",
    "SuiteMember",
    "ScalingReport",
    "RatioReport",
    "fit_exponents",
    "sharpness_scan",
    "expected_slopes",
    "domination_scan",
    "counterexample_probe",
    "poincare_scan",
    "poincare_suite_scan",
    "sobolev_ratio_scan",
    "commutator_weak_scan",
    "conjecture_probe",
    "TAU_FACTOR",
]

TAU_FACTOR = 1e-8


# --------------------------------------------------------------------------
# test suites
# --------------------------------------------------------------------------


def _bump_cutoff(t):
    """``exp(1 - 1/(1 - t^2))`` for ``t < 1``, zero beyond; equals 1 at the centre."""
    out = np.zeros_like(t)
    inside = t < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(frozen=True)
class SuiteMember:
    """One test function with its closure and analytic gradient closure."""

    index: int
    func: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]

    def on(self, grid: Grid, scale: float = 1.0) -> tuple[GridFunction, GridFunction]:
        """Node values of ``f`` and ``|grad f|``."""
        f = sample(self.func, grid)
        g = self.grad(grid.points())
        return GridFunction(grid, scale * f.values), GridFunction(grid, abs(scale) * np.sqrt(np.sum(g**2, axis=-1)))


@dataclass(frozen=True)
class TestSuite:
    """Seeded smooth compactly supported test functions on a grid.

    ``gauss-bumps``: one to five Gaussian bumps centred in the ball of radius
    ``0.35 L``, times a smooth radial cutoff vanishing beyond ``0.8 L``.
    """

    __test__ = False  # keep pytest from collecting the class

    seed: int
    count: int
    grid: Grid
    generator: str = "gauss-bumps"
    scale: float = 1.0

    def __post_init__(self):
        if self.generator != "gauss-bumps":
            raise ValueError(f"unknown suite generator {self.generator!r}")
        if self.count < 1:
            raise ValueError("a suite needs at least one function")

    def on(self, grid: Grid) -> "TestSuite":
        return TestSuite(self.seed, self.count, grid, self.generator, self.scale)

    def scaled(self, lam: float) -> "TestSuite":
        return TestSuite(self.seed, self.count, self.grid, self.generator, self.scale * lam)

    def members(self) -> list[SuiteMember]:
        rng = np.random.default_rng(self.seed)
        n, L = self.grid.dim, self.grid.L
        R = 0.8 * L
        out = []
        for i in range(self.count):
            nb = int(rng.integers(1, 6))
            direction = rng.normal(size=(nb, n))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            centres = direction * (0.35 * L * rng.random(nb) ** (1.0 / n))[:, None]
            widths = rng.uniform(0.08, 0.2, nb) * L
            amps = rng.choice([-1.0, 1.0], nb) * rng.uniform(0.5, 1.5, nb)
            out.append(SuiteMember(i, *_bump_closures(centres, widths, amps, R)))
        return out

    def functions(self) -> list[tuple[GridFunction, GridFunction]]:
        return [m.on(self.grid, self.scale) for m in self.members()]


def _bump_closures(centres, widths, amps, R):
    def g_and_grad(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1])
        dg = np.zeros(x.shape)
        for c, s, a in zip(centres, widths, amps):
            d = x - c
            e = a * np.exp(-np.sum(d**2, axis=-1) / s**2)
            g += e
            dg += (-2.0 / s**2) * e[..., None] * d
        return g, dg

    def cutoff_and_grad(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1) / R**2
        t = np.sqrt(r2)
        phi = _bump_cutoff(t)
        fac = np.zeros_like(t)
        inside = t < 1
        fac[inside] = -2.0 / (1.0 - r2[inside]) ** 2 / R**2
        return phi, (phi * fac)[..., None] * x

    def func(x):
        g, _ = g_and_grad(x)
        return cutoff_and_grad(x)[0] * g

    def grad(x):
        g, dg = g_and_grad(x)
        phi, dphi = cutoff_and_grad(x)
        return phi[..., None] * dg + g[..., None] * dphi

    return func, grad


def _check_margin(f: GridFunction) -> None:
    g = f.grid
    pts = g.points()
    outer = np.max(np.abs(pts), axis=-1) > 0.9 * g.L
    if np.any(f.values[outer] != 0):
        raise ValueError("test function is not compactly supported with a 10% margin inside the box")


# --------------------------------------------------------------------------
# reports and fits
# --------------------------------------------------------------------------


@dataclass
class ScalingReport:
    labels: tuple[str, ...]
    deltas: list[float]
    values: dict[str, list[float]]
    slopes: dict[str, float]
    stderr: dict[str, float]
    expected: dict[str, float]
    margin: dict[str, float]
    mode: str = "cell"

    def passed(self, label: str) -> bool:
        return abs(self.slopes[label] - self.expected[label]) <= self.margin[label]

    @property
    def all_passed(self) -> bool:
        return all(self.passed(k) for k in self.labels)


@dataclass
class RatioReport:
    label: str
    ratios: list[float]
    suite_max: float
    attaining_function: int
    attaining_location: tuple
    taus: list[float]
    skipped: list[int] = field(default_factory=list)
    gradient_source: str = "analytic"
    factors: dict = field(default_factory=dict)
    trend: list[float] = field(default_factory=list)
    note: str = ""


def fit_exponents(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log y)``: ``(slope, intercept, stderr)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size or xs.size < 4:
        raise ValueError(f"need at least 4 matching points, got {xs.size} and {ys.size}")
    if np.any(xs <= 0) or np.any(ys <= 0) or not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("power-law fits need finite positive data")
    res = stats.linregress(np.log(xs), np.log(ys))
    return float(res.slope), float(res.intercept), float(res.stderr)


def _merge(label, results, **extra) -> RatioReport:
    """Build a report from per-function ``(ratio, location, tau)`` triples."""
    ratios = [r[0] for r in results]
    best = int(np.argmax(ratios)) if ratios else 0
    return RatioReport(
        label=label,
        ratios=ratios,
        suite_max=float(ratios[best]) if ratios else 0.0,
        attaining_function=best,
        attaining_location=results[best][1] if results else (),
        taus=[r[2] for r in results],
        **extra,
    )


def _node_ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, tuple, float]:
    tau = TAU_FACTOR * float(np.max(den))
    live = den > tau
    if not live.any():
        return 0.0, (), tau
    r = np.zeros_like(num)
    r[live] = num[live] / den[live]
    idx = np.unravel_index(int(np.argmax(r)), r.shape)
    return float(r[idx]), tuple(int(i) for i in idx), tau


# --------------------------------------------------------------------------
# power-weight scaling
# --------------------------------------------------------------------------

SHARPNESS_LABELS = ("norm_wf", "apq", "norm_wgrad")


def expected_slopes(exps: ExponentSet) -> dict[str, float]:
    inv_pp = 0.0 if math.isinf(exps.p_prime) else 1.0 / exps.p_prime
    return {"norm_wf": -1.0 / exps.p_star, "apq": -1.0, "norm_wgrad": inv_pp}


def _sharpness_point(delta, exps, grid, ladder):
    w, f, gn = sharpness_closures(delta, exps)
    wv = sample(w, grid)
    fv = sample(f, grid)
    gv = sample(gn, grid)
    a = lp_norm(GridFunction(grid, wv.values * fv.values), exps.p_star)
    if exps.p > 1:
        c = apq_constant(wv, exps.p, exps.p_star, ladder).constant
    else:
        c = a1q_constant(wv, exps.p_star, ladder).constant
    b = lp_norm(GridFunction(grid, wv.values * gv.values), exps.p)
    return a, c, b


def _sharpness_cell(delta, exps, grid, ladder):
    w, f, gn = sharpness_closures(delta, exps)
    origin = (0.0,) * grid.dim
    ps, p = exps.p_star, exps.p
    vol = grid.cell_volume

    def mass(fn):
        return math.fsum(cell_average(fn, grid, singular_point=origin).values.ravel()) * vol

    a = mass(lambda x: (w(x) * f(x)) ** ps) ** (1 / ps)
    u = cell_average(lambda x: w(x) ** ps, grid, singular_point=origin).values
    if p > 1:
        v = cell_average(lambda x: w(x) ** (-exps.p_prime), grid, singular_point=origin).values
        c = apq_from_power_averages(u, v, p, ps, ladder).constant
    else:
        low = cell_minimum(lambda x: w(x) ** ps, grid).values
        c = a1q_from_power_data(u, low, ps, ladder).constant
    b = mass(lambda x: (w(x) * gn(x)) ** p) ** (1 / p)
    return a, c, b


def sharpness_scan(
    exps: ExponentSet, deltas: Sequence[float], grid: Grid, mode: str = "cell", margin: float = 0.15
) -> ScalingReport:
    """Fit ``log``-slopes of ``||w f||_{p*}``, ``[w]_{A_{p,p*}}`` and ``||w grad f||_p`` against ``delta``.

    ``mode="cell"`` integrates the closures exactly over each cell (graded
    towards the singular corner at the origin); ``mode="point"`` uses node
    samples, which misses the mass near the origin for small ``delta``.
    """
    if mode not in ("cell", "point"):
        raise ValueError(f"mode must be 'cell' or 'point', got {mode!r}")
    if grid.dim != exps.n:
        raise ValueError(f"grid dim {grid.dim} does not match n={exps.n}")
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise ValueError("a slope fit needs at least 4 delta values")
    if any(not (0 < d < 1) for d in deltas):
        raise ValueError("every delta must lie in (0, 1)")
    _check_resolution(min(deltas), grid)
    ladder = CubeLadder(grid)
    run = _sharpness_cell if mode == "cell" else _sharpness_point
    values = {k: [] for k in SHARPNESS_LABELS}
    for d in deltas:
        for k, v in zip(SHARPNESS_LABELS, run(d, exps, grid, ladder)):
            values[k].append(v)
    expected = expected_slopes(exps)
    slopes, errs, margins = {}, {}, {}
    for k in SHARPNESS_LABELS:
        slopes[k], _, errs[k] = fit_exponents(deltas, values[k])
        margins[k] = margin * abs(expected[k]) if expected[k] != 0 else 0.05
    return ScalingReport(SHARPNESS_LABELS, deltas, values, slopes, errs, expected, margins, mode)


# --------------------------------------------------------------------------
# pointwise domination
# --------------------------------------------------------------------------

DOMINATION_TAGS = ("abs", "M", "M^2", "M_{n'}", "M_{n',1}", "M_r", "T")
_TAG_ALIASES = {"Mnp": "M_{n'}", "Mnp1": "M_{n',1}", "T_Omega": "T", "M2": "M^2"}


def _numerator(tag: str, f: GridFunction, T: ConvolutionCZ | None, r: float | None) -> np.ndarray:
    n = f.grid.dim
    n_prime = n / (n - 1) if n > 1 else math.inf
    if tag == "abs":
        return np.abs(f.values)
    if tag == "M":
        return hl_maximal(f).values
    if tag.startswith("M^"):
        return iterated_maximal(f, int(tag[2:])).values
    if tag == "M_{n'}":
        return power_maximal(f, n_prime).values
    if tag == "M_{n',1}":
        return lorentz_maximal(f, LorentzIndex(n_prime, 1)).values
    if tag == "M_r":
        if r is None:
            raise ValueError("tag M_r needs the power r")
        return power_maximal(f, r).values
    if tag == "T":
        if T is None:
            raise ValueError("tag T needs a ConvolutionCZ kernel")
        return np.abs(rough_singular(f, T).values)
    raise ValueError(f"unknown operator tag {tag!r}; choose from {DOMINATION_TAGS}")


def domination_scan(
    op_tag: str,
    suite: TestSuite,
    alpha: float = 1.0,
    T: ConvolutionCZ | None = None,
    r: float | None = None,
    gradient_source: str = "analytic",
) -> RatioReport:
    """Suite max of ``op f / I_alpha(|grad f|)`` over nodes with denominator above ``tau``."""
    tag = _TAG_ALIASES.get(op_tag, op_tag)
    if suite.grid.dim < 2 and tag in ("M_{n'}", "M_{n',1}"):
        raise ValueError(f"tag {tag} needs dimension >= 2")
    results = []
    for f, gnorm in suite.functions():
        _check_margin(f)
        if gradient_source == "fd":
            gnorm = gradient(f).norm()
        num = _numerator(tag, f, T, r)
        den = riesz_potential(gnorm, alpha).values
        results.append(_node_ratio(num, den))
    return _merge(tag, results, gradient_source=gradient_source)


def counterexample_probe(
    epsilon: float, suite: TestSuite, refinements: int = 3, alpha: float = 1.0
) -> list[RatioReport]:
    """``M_{n'+epsilon} f / I_1(|grad f|)`` over successive grid doublings (evidence only)."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    n = suite.grid.dim
    if n < 2:
        raise ValueError("the probe needs dimension >= 2")
    r = n / (n - 1) + epsilon
    out = []
    grid = suite.grid
    for _ in range(refinements):
        rep = domination_scan("M_r", suite.on(grid), alpha, r=r)
        rep.label = f"M_{{n'+{epsilon!r}}}"
        rep.note = f"N={grid.N}; report only"
        out.append(rep)
        grid = grid.refine()
    trend = [rep.suite_max for rep in out]
    for rep in out:
        rep.trend = trend
    return out


# --------------------------------------------------------------------------
# Poincare-Sobolev in Lorentz spaces
# --------------------------------------------------------------------------


def poincare_scan(
    f: GridFunction, ladder: CubeLadder | None, exps: ExponentSet, grad_norm: GridFunction | None = None
) -> tuple[float, Cube | None, int]:
    """``sup_Q ||f - f_Q||_{L^{p*,p}(Q, dx/|Q|)} / (l(Q) (avg_Q |grad f|^p)^(1/p))``.

    Returns ``(sup, attaining cube, number of skipped cubes)``; cubes on which
    the gradient vanishes identically are skipped.
    """
    grid = f.grid
    ladder = ladder or CubeLadder(grid)
    if grad_norm is None:
        grad_norm = gradient(f).norm()
    dim, p, ps = grid.dim, exps.p, exps.p_star
    gp = grad_norm.values**p
    per_side = []
    skipped = 0
    for k in ladder.sides:
        if k == 1:
            continue  # f - f_Q vanishes on a single cell
        centres = box_averages(f.values, k, dim, prefix=f.prefix, guard=True)
        num = _kernels.cube_lorentz(f.values, k, ps, p, centers=centres)
        gavg = box_averages(gp, k, dim, guard=True)
        den = k * grid.h * gavg ** (1.0 / p)
        live = gavg > 0
        skipped += int(np.count_nonzero(~live))
        ratio = np.zeros_like(num)
        ratio[live] = num[live] / den[live]
        per_side.append((k, ratio))
    if not per_side:
        return 0.0, None, skipped
    value, cube = ladder_argmax(per_side)
    if value == 0:
        return 0.0, None, skipped  # nothing contributed, so no cube attains the sup
    return value, cube, skipped


def poincare_suite_scan(suite: TestSuite, exps: ExponentSet) -> RatioReport:
    results, skipped = [], []
    for f, gnorm in suite.functions():
        _check_margin(f)
        v, cube, sk = poincare_scan(f, None, exps, gnorm)
        loc = (cube.anchor, cube.side) if cube is not None else ()
        results.append((v, loc, 0.0))
        skipped.append(sk)
    return _merge("poincare", results, skipped=skipped)


# --------------------------------------------------------------------------
# weighted Sobolev, commutator and conjecture ratios
# --------------------------------------------------------------------------


def _endpoint_constant(w: GridFunction, exps: ExponentSet) -> float:
    if exps.p > 1:
        return apq_constant(w, exps.p, exps.p_star).constant
    return a1q_constant(w, exps.p_star).constant


def sobolev_ratio_scan(w: GridFunction, exps: ExponentSet, suite: TestSuite, variant: str = "identity") -> RatioReport:
    """``||w f||_{p*}`` (or ``||w M f||_{p*}``) over ``[w]^e ||w grad f||_p``."""
    if variant not in ("identity", "maximal"):
        raise ValueError(f"variant must be 'identity' or 'maximal', got {variant!r}")
    if variant == "maximal" and exps.p == 1:
        raise ValueError("the maximal variant is stated for 1 < p < n")
    if w.grid != suite.grid:
        raise ValueError("weight and suite live on different grids")
    w.require_weight()
    const = _endpoint_constant(w, exps)
    e = 1.0 / exps.n_prime
    if variant == "maximal":
        e *= max(1.0, exps.p_prime / exps.p_star)
    factor = const**e
    results = []
    for f, gnorm in suite.functions():
        _check_margin(f)
        top = hl_maximal(f).values if variant == "maximal" else f.values
        num = lp_norm(GridFunction(f.grid, w.values * top), exps.p_star)
        den = factor * lp_norm(GridFunction(f.grid, w.values * gnorm.values), exps.p)
        results.append((num / den if den > 0 else 0.0, (), 0.0))
    return _merge(f"sobolev-{variant}", results, factors={"weight_constant": const, "exponent": e})


def _a1_nprime(w: GridFunction) -> float:
    n = w.grid.dim
    return a1q_constant(w, n / (n - 1)).constant


def commutator_weak_scan(
    b: GridFunction, w: GridFunction, m: int, T: ConvolutionCZ, suite: TestSuite
) -> RatioReport:
    """``||T_b^m f||_{L^{n',inf}(w^{n'})}`` over ``||b||_BMO^m [w]_{A_{1,n'}}^(m+1+1/n') ||w grad f||_1``."""
    if m < 1:
        raise ValueError(f"commutator order must be >= 1, got {m}")
    n = suite.grid.dim
    if n < 2:
        raise ValueError("the weak-type commutator bound needs n >= 2")
    if not (b.grid == w.grid == suite.grid):
        raise ValueError("b, w and the suite live on different grids")
    w.require_weight()
    n_prime = n / (n - 1)
    bmo = bmo_norm(b).value
    a1 = _a1_nprime(w)
    mu = DiscreteMeasure.weighted(w, n_prime)
    results = []
    for f, gnorm in suite.functions():
        _check_margin(f)
        if bmo == 0:
            results.append((0.0, (), 0.0))
            continue
        num = weak_norm(commutator(f, b, T, m), n_prime, mu)
        den = bmo**m * a1 ** (m + 1 + 1 / n_prime) * lp_norm(GridFunction(f.grid, w.values * gnorm.values), 1)
        results.append((num / den if den > 0 else 0.0, (), 0.0))
    return _merge("commutator-weak", results, factors={"bmo": bmo, "a1_nprime": a1, "m": m})


def conjecture_probe(
    w: GridFunction | Callable, T: ConvolutionCZ, suite: TestSuite, refinements: int = 1
) -> RatioReport:
    """``||N f||_{L^{n',inf}(w^{n'})}`` over ``[w]_{A_{1,n'}}^(2+1/n') ||w grad f||_1``.

    Open problem: the report records values and their trend under grid
    doubling and makes no pass/fail claim.  ``w`` may be a closure, which is
    required when ``refinements > 1``.
    """
    n = suite.grid.dim
    if n < 2:
        raise ValueError("the probe needs n >= 2")
    if refinements > 1 and isinstance(w, GridFunction):
        raise ValueError("refinement needs the weight as a closure")
    n_prime = n / (n - 1)
    reports = []
    grid = suite.grid
    for _ in range(refinements):
        wv = w if isinstance(w, GridFunction) else sample(w, grid)
        if wv.grid != grid:
            raise ValueError("weight and suite live on different grids")
        wv.require_weight()
        a1 = _a1_nprime(wv)
        mu = DiscreteMeasure.weighted(wv, n_prime)
        results = []
        for f, gnorm in suite.on(grid).functions():
            _check_margin(f)
            num = weak_norm(nonlinear_commutator(f, T), n_prime, mu)
            den = a1 ** (2 + 1 / n_prime) * lp_norm(GridFunction(grid, wv.values * gnorm.values), 1)
            results.append((num / den if den > 0 else 0.0, (), 0.0))
        reports.append(_merge("conjecture", results, factors={"a1_nprime": a1, "N": grid.N}))
        grid = grid.refine()
    first = reports[0]
    first.trend = [r.suite_max for r in reports]
    first.note = "conjecture: no pass/fail"
    if any(t > 2 * first.trend[0] for t in first.trend[1:]):
        first.note += "; flagged: suite max at least doubled under refinement"
    return first
