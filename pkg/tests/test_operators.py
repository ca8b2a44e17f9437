import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from sobolab.grid import Grid, GridFunction, probe, sample
from sobolab.norms import LorentzIndex
from sobolab.operators import (
    ConvolutionCZ,
    SphereKernel,
    commutator,
    hl_maximal,
    iterated_maximal,
    lorentz_maximal,
    nonlinear_commutator,
    nonlinear_split,
    power_maximal,
    riesz_potential,
    rough_singular,
)

import oracles


def relmax(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.fixture
def bump2():
    g = Grid(2, 4.0, 32)
    return sample(lambda x: np.exp(-np.sum((x - 0.3) ** 2, -1)) - 0.5 * np.exp(-np.sum((x + 1) ** 2, -1)), g)


# ---------------------------------------------------------------- kernels


def test_sphere_kernel_zero_mean_and_sup():
    k = SphereKernel.from_function(2, lambda u: u[..., 0] ** 2 + 0.3, label="shifted")
    assert abs(np.sum(k.weights * k.samples)) < 1e-12
    assert k.sup == pytest.approx(0.5, rel=1e-12)
    k3 = SphereKernel.builtin("even-2", 3)
    assert abs(np.sum(k3.weights * k3.samples)) < 1e-12
    with pytest.raises(ValueError):
        SphereKernel(2, np.ones(16))
    with pytest.raises(ValueError):
        SphereKernel.builtin("riesz-3", 2)


def test_hilbert_kernel_values():
    T = ConvolutionCZ.builtin("hilbert", 1)
    assert np.allclose(T.kernel.samples, [-1 / math.pi, 1 / math.pi], rtol=0, atol=1e-17)
    assert T.size_bound == pytest.approx(1 / math.pi)
    # weak-L^1 norm on S^0 (counting measure): max(t * #{|Omega| >= t}) = 2/pi
    assert T.kernel.weak_norm == pytest.approx(2 / math.pi)


def test_kernel_csv_roundtrip(tmp_path):
    th = 2 * math.pi * np.arange(256) / 256
    path = tmp_path / "k.csv"
    path.write_text("angle,value\n" + "\n".join(f"{float(t)!r},{math.cos(3 * t)!r}" for t in th))
    k = SphereKernel.from_csv(path)
    u = np.array([[math.cos(0.123), math.sin(0.123)]])
    assert k(u)[0] == pytest.approx(math.cos(3 * 0.123), abs=2e-3)
    g = Grid(2, 1.0, 8)
    f = sample(lambda x: np.exp(-np.sum(x**2, -1)), g)
    ref = rough_singular(f, ConvolutionCZ.builtin("odd-3", 2)).values
    assert relmax(rough_singular(f, ConvolutionCZ(k)).values, ref) < 1e-2


# ---------------------------------------------------------------- maximal family


def test_maximal_constant_and_bounds(bump2):
    g = bump2.grid
    c = GridFunction(g, np.full(g.shape, -1.5))
    for out in (hl_maximal(c), iterated_maximal(c, 3), power_maximal(c, 2.5), lorentz_maximal(c, LorentzIndex(2, 2))):
        assert np.allclose(out.values, 1.5, rtol=1e-14, atol=0)
    m1 = hl_maximal(bump2).values
    m2 = iterated_maximal(bump2, 2).values
    assert np.all(m1 >= np.abs(bump2.values)) and np.all(m2 >= m1)


def test_maximal_of_one_cell_indicator():
    g = Grid(1, 8.0, 64)
    v = np.zeros(64)
    v[32] = 1.0
    assert np.array_equal(hl_maximal(GridFunction(g, v)).values, oracles.maximal(v))


def test_iterated_definition():
    rng = np.random.default_rng(0)
    f = GridFunction(Grid(1, 1.0, 16), rng.normal(size=16))
    assert np.array_equal(iterated_maximal(f, 2).values, hl_maximal(hl_maximal(f)).values)
    assert np.array_equal(iterated_maximal(f, 1).values, hl_maximal(f).values)
    with pytest.raises(ValueError):
        iterated_maximal(f, 0)


def test_power_maximal(bump2):
    assert np.array_equal(power_maximal(bump2, 1).values, hl_maximal(bump2).values)
    assert np.all(power_maximal(bump2, 1).values <= power_maximal(bump2, 2).values * (1 + 1e-14))
    with pytest.raises(ValueError):
        power_maximal(bump2, 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 4), st.floats(0.2, 4), st.integers(0, 2**32 - 1))
def test_power_maximal_monotone_in_r(r1, r2, seed):
    r1, r2 = sorted((r1, r2))
    f = GridFunction(Grid(1, 1.0, 32), np.random.default_rng(seed).normal(size=32))
    assert np.all(power_maximal(f, r1).values <= power_maximal(f, r2).values * (1 + 1e-13))


def test_lorentz_maximal(bump2):
    for s in (1.5, 2.0, 3.0):
        got = lorentz_maximal(bump2, LorentzIndex(s, s)).values
        assert relmax(got, power_maximal(bump2, s).values) < 1e-10
    np_ = 2.0
    assert np.all(lorentz_maximal(bump2, LorentzIndex(np_, 1)).values >= power_maximal(bump2, np_).values * (1 - 1e-12))
    with pytest.raises(ValueError):
        lorentz_maximal(bump2, LorentzIndex(math.inf, 1))


# ---------------------------------------------------------------- Riesz potential


def test_riesz_zero_and_alpha_range():
    g = Grid(2, 1.0, 8)
    assert not np.any(riesz_potential(GridFunction(g, np.zeros(g.shape)), 1.0).values)
    with pytest.raises(ValueError):
        riesz_potential(GridFunction(g, np.ones(g.shape)), 2.0)


def test_riesz_radial_symmetry():
    g = Grid(2, 4.0, 32)
    f = sample(lambda x: np.exp(-np.sum(x**2, -1)), g)
    out = riesz_potential(f, 1.0).values
    for view in (out.T, out[::-1, :], out[:, ::-1]):
        assert np.max(np.abs(view - out)) <= 1e-12 * np.max(out)


def test_riesz_1d_gaussian_at_origin():
    g = Grid(1, 8.0, 512)
    out = riesz_potential(GridFunction(g, np.exp(-g.coords() ** 2)), 0.5)
    want = 2 * integrate.quad(lambda y: np.exp(-(y**2)) * y**-0.5, 0, np.inf)[0]
    assert want == pytest.approx(gamma(0.25), rel=1e-10)
    assert abs(probe(out, [0.0]) / want - 1) < 0.01


def test_riesz_paths_agree():
    g = Grid(2, 4.0, 32)
    f = sample(lambda x: np.exp(-np.sum(x**2, -1)) * (1 + x[..., 0]), g)
    assert relmax(riesz_potential(f, 0.7, "fft").values, riesz_potential(f, 0.7, "direct").values) < 1e-12


def test_convolution_caps():
    with pytest.raises(ValueError, match="capped"):
        riesz_potential(GridFunction(Grid(3, 1.0, 128), np.zeros((128,) * 3)), 1.0)


# ---------------------------------------------------------------- singular integrals


def test_zero_kernel():
    g = Grid(2, 1.0, 16)
    f = GridFunction(g, np.random.default_rng(1).normal(size=g.shape))
    assert not np.any(rough_singular(f, ConvolutionCZ.builtin("zero", 2)).values)


def test_hilbert_even_function_vanishes_at_centre():
    g = Grid(1, 8.0, 256)
    f = GridFunction(g, np.exp(-g.coords() ** 2))
    out = rough_singular(f, ConvolutionCZ.builtin("hilbert", 1)).values
    # the centre sits between nodes 127 and 128; the output is odd about it
    assert abs(out[127] + out[128]) < 1e-12
    assert np.max(np.abs(out + out[::-1])) < 1e-12


def test_hilbert_indicator_closed_form():
    g = Grid(1, 8.0, 2048)
    f = sample(lambda x: (np.abs(x[..., 0]) <= 1).astype(float), g)
    out = rough_singular(f, ConvolutionCZ.builtin("hilbert", 1))
    assert abs(probe(out, [2.0]) - math.log(3) / math.pi) < 1e-2


def test_singular_matches_brute_force_2d():
    g = Grid(2, 1.0, 16)
    f = GridFunction(g, np.random.default_rng(2).normal(size=g.shape))
    for name in ("riesz-2", "odd-3"):
        T = ConvolutionCZ.builtin(name, 2)
        want = oracles.singular(f.values, T.kernel)
        assert relmax(rough_singular(f, T, "direct").values, want) < 1e-13
        assert relmax(rough_singular(f, T, "fft").values, want) < 1e-12


def test_singular_linear():
    rng = np.random.default_rng(3)
    g = Grid(2, 1.0, 32)
    T = ConvolutionCZ.builtin("riesz-1", 2)
    a, b = rng.normal(size=g.shape), rng.normal(size=g.shape)
    lhs = rough_singular(GridFunction(g, 2 * a - 3 * b), T).values
    rhs = 2 * rough_singular(GridFunction(g, a), T).values - 3 * rough_singular(GridFunction(g, b), T).values
    assert relmax(lhs, rhs) < 1e-12


def test_commutator_examples():
    rng = np.random.default_rng(4)
    g = Grid(1, 4.0, 32)
    T = ConvolutionCZ.builtin("hilbert", 1)
    f = GridFunction(g, rng.normal(size=32))
    b = GridFunction(g, rng.normal(size=32))
    assert np.array_equal(commutator(f, b, T, 0).values, rough_singular(f, T).values)
    scale = np.max(np.abs(rough_singular(f, T).values))
    for m in (1, 2):
        const = commutator(f, GridFunction(g, np.full(32, 2.5)), T, m).values
        assert np.max(np.abs(const)) <= 1e-12 * scale
        want = oracles.singular(f.values, T.kernel, m=m, b=b.values, h=g.h)
        assert relmax(commutator(f, b, T, m, "direct").values, want) < 1e-13
        assert relmax(commutator(f, b, T, m, "fft").values, want) < 1e-11
        bare = oracles.singular(f.values, T.kernel, m=m, b=b.values)
        assert relmax(commutator(f, b, T, m, centre_term=False).values, bare) < 1e-13


def test_commutator_matches_brute_force_2d():
    rng = np.random.default_rng(6)
    g = Grid(2, 2.0, 16)
    T = ConvolutionCZ.builtin("riesz-1", 2)
    f = GridFunction(g, rng.normal(size=g.shape))
    b = sample(lambda x: np.sin(x[..., 0]) + x[..., 1] ** 2, g)
    for m in (1, 2):
        want = oracles.singular(f.values, T.kernel, m=m, b=b.values, h=g.h)
        assert relmax(commutator(f, b, T, m, "direct").values, want) < 1e-13


def test_commutator_with_x_is_the_mean():
    g = Grid(1, 8.0, 2048)
    x = g.coords()
    f, b = GridFunction(g, np.exp(-(x**2))), GridFunction(g, x)
    T = ConvolutionCZ.builtin("hilbert", 1)
    out = commutator(f, b, T, 1)
    inner = np.abs(x) < 0.9 * g.L
    assert np.max(np.abs(out.values[inner] / (math.sqrt(math.pi) / math.pi) - 1)) < 1e-3
    # dropping the centre cell loses f(x) h / pi, an O(h) error
    bare = commutator(f, b, T, 1, centre_term=False).values
    assert np.allclose(out.values - bare, f.values * g.h / math.pi, rtol=0, atol=1e-14)


# ---------------------------------------------------------------- nonlinear commutator


@pytest.mark.parametrize("dim,name", [(1, "hilbert"), (2, "riesz-1")])
def test_nonlinear_identities(dim, name):
    g = Grid(dim, 4.0, 64 if dim == 1 else 16)
    rng = np.random.default_rng(5)
    f = GridFunction(g, rng.normal(size=g.shape) * (rng.random(g.shape) > 0.3))
    T = ConvolutionCZ.builtin(name, dim)
    nf = nonlinear_commutator(f, T).values
    assert np.all(np.isfinite(nf))
    lam = 3.7
    assert relmax(nonlinear_commutator(GridFunction(g, lam * f.values), T).values, lam * nf) < 1e-10
    n1, n2, n3 = nonlinear_split(f, T)
    assert relmax(n1.values + n2.values + n3.values, nf) < 1e-10
    assert not np.any(nonlinear_commutator(GridFunction(g, np.zeros(g.shape)), T).values)
    with pytest.raises(ValueError):
        nonlinear_split(GridFunction(g, np.zeros(g.shape)), T)


def test_nonlinear_split_bounds():
    g = Grid(1, 4.0, 128)
    f = sample(lambda x: np.exp(-(x[..., 0] ** 2)) * np.cos(3 * x[..., 0]), g)
    T = ConvolutionCZ.builtin("hilbert", 1)
    mf = hl_maximal(f).values
    t = np.abs(f.values) / mf
    inner = np.zeros_like(t)
    nz = t > 0
    inner[nz] = t[nz] * np.log(t[nz])
    assert np.all(np.abs(inner) <= 1 / math.e + 1e-15)
    tf = rough_singular(f, T).values
    _, _, n3 = nonlinear_split(f, T)
    A = np.abs(tf) <= mf
    assert np.all(np.abs(n3.values[A]) <= mf[A] * (1 + 1e-12))
