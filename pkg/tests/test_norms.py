import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sobolab.grid import Cube, CubeLadder, Grid, GridFunction
from sobolab.norms import (
    DiscreteMeasure,
    LorentzIndex,
    bmo_norm,
    local_lorentz_norm,
    lorentz_norm,
    lp_norm,
    weak_norm,
)

import oracles


def rel(a, b):
    return abs(a - b) / abs(b)


def test_lorentz_index_validation():
    with pytest.raises(ValueError):
        LorentzIndex(0, 1)
    with pytest.raises(ValueError):
        LorentzIndex(2, -1)


def test_indicator_of_unit_set():
    g = Grid(1, 2.0, 8)  # h = 1/2
    f = GridFunction(g, [0, 0, 1, 1, 0, 0, 0, 0])
    for p in (0.5, 1, 2, 7):
        assert lp_norm(f, p) == 1.0
    for s in (1, 1.5, 3):
        assert weak_norm(f, s) == 1.0
    e = GridFunction(g, [0, 1, 1, 1, 1, 1, 1, 0])  # |E| = 3
    for s, q in [(2, 2), (2, 1), (1.5, 4), (3, 0.5)]:
        assert math.isclose(lorentz_norm(e, LorentzIndex(s, q)), (s / q) ** (1 / q) * 3 ** (1 / s), rel_tol=1e-14)


def test_lp_rejects_bad_p():
    with pytest.raises(ValueError):
        lp_norm(GridFunction(Grid(1, 1.0, 4), np.ones(4)), 0)


def test_weighted_notations_agree():
    rng = np.random.default_rng(0)
    g = Grid(2, 1.0, 16)
    f = GridFunction(g, rng.normal(size=g.shape))
    w = GridFunction(g, rng.uniform(0.2, 3, size=g.shape))
    for p in (1, 1.5, 4):
        a = lp_norm(GridFunction(g, w.values * f.values), p)
        b = lp_norm(f, p, DiscreteMeasure.weighted(w, p))
        assert rel(a, b) < 1e-12


def test_gaussian_lp_norm():
    g = Grid(1, 8.0, 2048)
    f = GridFunction(g, np.exp(-g.coords() ** 2))
    assert abs(lp_norm(f, 2) - (math.pi / 2) ** 0.25) < 1e-6


def test_weak_three_values():
    g = Grid(1, 2.0, 4)  # mass 1 per cell
    f = GridFunction(g, [3, 2, 1, 0])
    assert weak_norm(f, 1) == max(3 * 1, 2 * 2, 1 * 3) == oracles.step_weak(f.values, np.ones(4), 1)


def test_lorentz_matches_step_oracle():
    rng = np.random.default_rng(1)
    g = Grid(2, 1.0, 8)
    f = GridFunction(g, np.round(rng.normal(size=g.shape), 1))  # repeated values
    dens = rng.uniform(0.1, 2, size=g.shape)
    mu = DiscreteMeasure(g, dens)
    for s, q in [(2, 1), (1.5, 3), (2, 2), (3, 0.7)]:
        want = oracles.step_lorentz(f.values, mu.masses, s, q)
        assert rel(lorentz_norm(f, LorentzIndex(s, q), mu), want) < 1e-12
    assert weak_norm(f, 2, mu) == pytest.approx(oracles.step_weak(f.values, mu.masses, 2), rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (6, 6), elements=st.floats(-50, 50)),
    # subnormal densities carry too few bits for any relative tolerance
    arrays(np.float64, (6, 6), elements=st.one_of(st.just(0.0), st.floats(1e-300, 4))),
    st.sampled_from([1.0, 1.5, 2.0, 3.0]),
)
def test_layer_cake_and_chebyshev(a, dens, s):
    g = Grid(2, 1.0, 8)
    g6 = np.zeros((8, 8))
    g6[1:7, 1:7] = a
    d = np.ones((8, 8))
    d[1:7, 1:7] = dens
    f, mu = GridFunction(g, g6), DiscreteMeasure(g, d)
    strong = lp_norm(f, s, mu)
    lor = lorentz_norm(f, LorentzIndex(s, s), mu)
    assert lor == pytest.approx(strong, rel=1e-10, abs=1e-300)
    weak = weak_norm(f, s, mu)
    assert weak <= strong * (1 + 1e-12)
    assert weak <= lorentz_norm(f, LorentzIndex(s, s / 2), mu) * (1 + 1e-12)


def test_homogeneity_and_monotone():
    rng = np.random.default_rng(2)
    g = Grid(1, 1.0, 32)
    f = GridFunction(g, rng.normal(size=32))
    idx = LorentzIndex(2, 1)
    assert rel(lorentz_norm(GridFunction(g, -3.5 * f.values), idx), 3.5 * lorentz_norm(f, idx)) < 1e-13
    bigger = GridFunction(g, np.abs(f.values) + 0.1)
    assert lorentz_norm(bigger, idx) >= lorentz_norm(f, idx)
    assert weak_norm(bigger, 2) >= weak_norm(f, 2)


def test_local_lorentz():
    rng = np.random.default_rng(3)
    g = Grid(1, 1.0, 16)
    f = GridFunction(g, rng.normal(size=16))
    q = Cube((4,), 8)
    blk = f.values[4:12]
    assert local_lorentz_norm(GridFunction(g, np.full(16, -2.0)), q, LorentzIndex(3, 3)) == pytest.approx(2.0, rel=1e-15)
    for s, qq in [(2, 1), (1.5, 4)]:
        # the normalised average of a constant carries the factor (s/q)^(1/q)
        c = local_lorentz_norm(GridFunction(g, np.full(16, -2.0)), q, LorentzIndex(s, qq))
        assert c == pytest.approx(2.0 * (s / qq) ** (1 / qq), rel=1e-14)
        want = oracles.step_lorentz(blk, np.full(8, 1 / 8), s, qq)
        assert rel(local_lorentz_norm(f, q, LorentzIndex(s, qq)), want) < 1e-12
    assert rel(local_lorentz_norm(f, q, LorentzIndex(2, 2)), math.sqrt(np.mean(blk**2))) < 1e-13


def test_bmo_examples():
    rng = np.random.default_rng(4)
    g = Grid(2, 1.0, 8)
    b = GridFunction(g, rng.normal(size=g.shape))
    assert bmo_norm(GridFunction(g, np.full(g.shape, 5.0))).value == 0.0
    rep = bmo_norm(b)
    assert rep.value == pytest.approx(oracles.bmo(b.values), rel=1e-13)
    assert bmo_norm(GridFunction(g, -2 * b.values)).value == 2 * rep.value
    assert rel(bmo_norm(GridFunction(g, 0.3 * b.values)).value, 0.3 * rep.value) < 1e-13
    assert rel(bmo_norm(GridFunction(g, b.values + 7.25)).value, rep.value) < 1e-12
    assert rep.cube in set(CubeLadder(g).cubes())


def test_bmo_log_refinement():
    vals = []
    for N in (256, 512):
        g = Grid(1, 8.0, N)
        vals.append(bmo_norm(GridFunction(g, np.log(np.abs(g.coords())))).value)
    assert all(np.isfinite(vals))
    assert abs(vals[1] / vals[0] - 1) < 0.1
