import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfginv import GridMismatchError, SpaceField, SpaceTimeField, TorusGrid
from mfginv.grid import (
    divergence,
    gradient,
    heat_propagate,
    integrate,
    inverse_transform,
    laplacian,
    load_field,
    save_field,
    spectral_transform,
)


@pytest.mark.parametrize("bad", [dict(d=0), dict(N=15), dict(N=0), dict(T=0.0), dict(Nt=0)])
def test_grid_rejects_bad_parameters(bad):
    args = dict(d=1, N=16, T=0.1, Nt=10)
    args.update(bad)
    with pytest.raises(GridMismatchError):
        TorusGrid(**args)


def test_grid_geometry():
    g = TorusGrid(2, 8, 0.5, 10)
    assert g.shape == (8, 8)
    assert g.spacetime_shape == (11, 8, 8)
    assert g.h == pytest.approx(0.05)
    assert g.freqs.min() == -4 and g.freqs.max() == 3
    assert g.index((-1, 2)) == (7, 2)
    with pytest.raises(GridMismatchError):
        g.index((4, 0))
    with pytest.raises(GridMismatchError):
        g.index(1)


def test_mode_transform_is_unit_spike(grid2):
    spec = spectral_transform(SpaceField.mode(grid2, (2, -3)))
    assert spec[(2, -3)] == pytest.approx(1.0, abs=1e-14)
    total = sum(abs(a) for _, a in spec.items())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_operators_on_a_mode(grid2):
    xi = (1, -2)
    f = SpaceField.mode(grid2, xi)
    lap = laplacian(f)
    np.testing.assert_allclose(lap.values, -4 * np.pi**2 * 5 * f.values, atol=1e-10)
    gx, gy = gradient(f)
    np.testing.assert_allclose(gx.values, 2j * np.pi * f.values, atol=1e-11)
    np.testing.assert_allclose(gy.values, -4j * np.pi * f.values, atol=1e-11)
    np.testing.assert_allclose(divergence((gx, gy)).values, lap.values, atol=1e-9)


def test_nyquist_mode_has_no_derivative():
    g = TorusGrid(1, 8, 0.1, 4)
    f = SpaceField.mode(g, -4)
    assert gradient(f)[0].sup() < 1e-12
    assert laplacian(f).sup() < 1e-12


def test_heat_propagate_decay(grid1):
    f = SpaceField.mode(grid1, 2) + 0.3
    out = heat_propagate(f, 0.05)
    np.testing.assert_allclose(spectral_transform(out)[2], np.exp(-4 * np.pi**2 * 4 * 0.05), rtol=1e-13)
    assert spectral_transform(out)[0] == pytest.approx(0.3)
    with pytest.raises(ValueError):
        heat_propagate(f, -1.0)


def test_heat_propagate_matches_closed_decay_constant():
    # exp(-4 pi^2 * 0.05) frozen from an mpmath evaluation
    g = TorusGrid(1, 16, 0.1, 4)
    out = heat_propagate(SpaceField.mode(g, 1), 0.05)
    assert spectral_transform(out)[1].real == pytest.approx(0.138911133142800, abs=1e-14)


def test_integrate_space_and_time(grid1):
    assert integrate(SpaceField.mode(grid1, 3) + 2.0) == pytest.approx(2.0)
    t = grid1.times.reshape(-1, 1)
    st_field = SpaceTimeField(grid1, np.broadcast_to(t, grid1.spacetime_shape))
    assert integrate(st_field) == pytest.approx(0.5 * grid1.T**2, rel=1e-12)


def test_grid_mismatch_detected(grid1):
    other = TorusGrid(1, 16, 0.1, 400)
    with pytest.raises(GridMismatchError):
        divergence((SpaceField.mode(grid1, 1), SpaceField.mode(other, 1)))
    with pytest.raises(GridMismatchError):
        SpaceField(grid1, np.zeros(5))


@pytest.mark.parametrize("kind", ["space", "spacetime"])
def test_field_roundtrip(tmp_path, grid2, kind):
    rng = np.random.default_rng(1)
    shape = grid2.shape if kind == "space" else grid2.spacetime_shape
    vals = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    f = SpaceField(grid2, vals) if kind == "space" else SpaceTimeField(grid2, vals)
    back = load_field(save_field(tmp_path / "f.fld", f))
    assert back.grid == grid2
    assert type(back) is type(f)
    np.testing.assert_array_equal(back.values, vals)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=16, max_size=16), st.lists(st.floats(-1, 1), min_size=16, max_size=16))
def test_transform_roundtrip_property(re, im):
    g = TorusGrid(1, 16, 1.0, 1)
    f = SpaceField(g, np.array(re) + 1j * np.array(im))
    back = inverse_transform(spectral_transform(f))
    np.testing.assert_allclose(back.values, f.values, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(-7, 7), st.floats(0.0, 0.2))
def test_heat_propagate_semigroup(k, t):
    g = TorusGrid(1, 16, 1.0, 1)
    f = SpaceField.mode(g, k) + 0.5
    once = heat_propagate(f, t)
    twice = heat_propagate(heat_propagate(f, t / 2), t / 2)
    np.testing.assert_allclose(once.values, twice.values, atol=1e-13)


def test_cosine_has_two_half_amplitudes():
    g = TorusGrid(1, 16, 0.1, 1)
    spec = spectral_transform(SpaceField(g, np.cos(2 * np.pi * g.nodes[0])))
    assert spec[1] == pytest.approx(0.5, abs=1e-15)
    assert spec[-1] == pytest.approx(0.5, abs=1e-15)


def test_divergence_of_gradient_of_cosine():
    g = TorusGrid(2, 16, 0.1, 1)
    f = SpaceField(g, np.cos(2 * np.pi * g.nodes[0]))
    np.testing.assert_allclose(divergence(gradient(f)).values, -4 * np.pi**2 * f.values, atol=1e-11)
