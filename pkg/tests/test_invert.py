import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfginv import ConditioningError, DecouplingError, GridMismatchError, PlantSpec, StageOrderError, TorusGrid, make_planted
from mfginv.grid import FOUR_PI_SQ
from mfginv.invert import (
    CascadeData,
    CoefficientStore,
    ProbeData,
    cyclic_solve,
    offset_design_determinant,
    offset_elimination,
    pairing_matrix,
    pick_decomposition,
    recon_full,
    recon_shared,
    recon_stateless,
    relative_errors,
    stage_one_fit,
    write_report,
)

# closed-form pairing weights at T = 0.1 for xi = 0 (splittings with s = 2 and s' = 8),
# frozen from an mpmath evaluation
C2, E2 = 0.0126604321215705, 3.72347306e-4
C8, E8 = 0.00316628699, 1.92217473e-14
DET_0 = -1.17895843e-6


def _log_growth(sigma, T):
    r = FOUR_PI_SQ * sigma
    return r * T + np.log(-np.expm1(-r * T)) - np.log(r)


@pytest.mark.parametrize("rule", ["positive-axis", "mirrored"])
@pytest.mark.parametrize("d", [1, 2])
def test_decomposition_sweep(rule, d):
    for xi in itertools.product(range(-8, 9), repeat=d):
        dec = pick_decomposition(xi, rule)
        for a, b in ((dec.xi1, dec.xi2), (dec.xi1p, dec.xi2p)):
            assert tuple(x + y for x, y in zip(a, b)) == xi
            assert any(a) and any(b)
        assert dec.s < dec.sp
        # det = E E' (growth(s) - growth(s')) is negative because growth increases
        assert _log_growth(dec.sp, 0.1) > _log_growth(dec.s, 0.1)


def test_mirrored_rule_is_symmetric():
    for xi in range(-6, 7):
        a, b = pick_decomposition((xi,), "mirrored"), pick_decomposition((-xi,), "mirrored")
        assert (a.s, a.sp) == (b.s, b.sp)
    with pytest.raises(ValueError):
        pick_decomposition((1,), "diagonal")


def test_closed_form_pairing_pins():
    M = pairing_matrix(pick_decomposition((0,)), T=0.1)
    np.testing.assert_allclose(M[0], [C2, E2], rtol=1e-8)
    np.testing.assert_allclose(M[1], [C8, E8], rtol=1e-8)
    assert np.linalg.det(M) == pytest.approx(DET_0, rel=1e-7)


def test_discrete_pairing_converges_to_closed_form():
    grid = TorusGrid(1, 16, 0.1, 4000)
    dec = pick_decomposition((1,), "mirrored")
    np.testing.assert_allclose(pairing_matrix(dec, grid), pairing_matrix(dec, T=0.1), rtol=5e-5)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_offset_design_is_invertible(s):
    assert abs(offset_design_determinant(s)) > 0.5
    assert offset_design_determinant(s, (1.0, 1.0)) == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_offset_elimination_recovers_bilinear_coefficients(c):
    rows = {M: c[0] + c[1] * M[1] + c[2] * M[0] + c[3] * M[0] * M[1] for M in itertools.product((1.0, 2.0), repeat=2)}
    out = offset_elimination(rows)
    for key, val in zip([(0, 0), (0, 1), (1, 0), (1, 1)], c):
        assert out[key] == pytest.approx(val, abs=1e-12 * max(1.0, max(map(abs, c))))


def test_offset_elimination_rejects_bad_rows():
    with pytest.raises(ValueError):
        offset_elimination({(1.0,): 1.0})
    with pytest.raises(ValueError):
        offset_elimination({})


def test_cyclic_solve_example():
    np.testing.assert_allclose(cyclic_solve([5, 3, 4]), [1, 3, 2])
    with pytest.raises(ValueError):
        cyclic_solve([1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=6))
def test_cyclic_solve_inverts_leave_one_out_sums(x):
    x = np.array(x)
    y = x.sum() - x
    np.testing.assert_allclose(cyclic_solve(y), x, atol=1e-9)


def test_stage_one_fit_on_exact_polynomial():
    n, S, T, step = 2, 3, 0.1, 0.01
    rng = np.random.default_rng(0)
    from mfginv.costs import all_multi_indices, factorial
    true = {b: rng.normal() for b in all_multi_indices(n, S)}
    pts = np.array(list(itertools.product(range(S + 1), repeat=n)), float) * step
    vals = [T * sum(v * np.prod(p ** np.array(b)) / factorial(b) for b, v in true.items()) for p in pts]
    fit, cond = stage_one_fit(vals, pts, S, T, step)
    for b, v in true.items():
        assert fit[b] == pytest.approx(v, abs=1e-8 * 10 ** (3 * sum(b)))
    assert cond < 1e3


def test_store_refuses_out_of_order_reads():
    store = CoefficientStore(2, 2, "general")
    with pytest.raises(StageOrderError):
        store.get("F", 0, (1, 0))
    store.put("F", 0, (1, 0), 2.0)
    assert store.get("F", 0, (1, 0)) == 2.0


def test_relative_error_rule():
    ae, re = relative_errors([1.0, 1e-20, 0.0], [1.0 + 1e-9, 1e-20 + 1e-12, 1e-12])
    np.testing.assert_allclose(re, [1e-9, 1e-12, 1e-12])


# -- round trips in the resolvable regime --------------------------------------------------

@pytest.fixture(scope="module")
def short_grid():
    return TorusGrid(1, 16, 0.02, 400)


@pytest.fixture(scope="module")
def general_plant(short_grid):
    return make_planted(PlantSpec(2, 2, band=2, seed=1), short_grid)


@pytest.fixture(scope="module")
def narrow_plant(short_grid):
    return make_planted(PlantSpec(2, 2, band=1, seed=4), short_grid)


@pytest.fixture(scope="module")
def full_report(short_grid, general_plant):
    F, G = general_plant
    return recon_full(CascadeData(F, G, short_grid), 2, 1, 2, short_grid, 2, plant=(F, G), rule="mirrored")


def test_full_round_trip_from_cascade(full_report):
    assert full_report.max_rel_err("F") <= 1e-6
    assert full_report.max_rel_err("G") <= 1e-6
    assert full_report.max_condition() <= 1e8
    assert all(r["resolved"] for r in full_report.rows)


def test_positive_axis_rule_round_trip(short_grid, narrow_plant):
    F, G = narrow_plant
    rep = recon_full(CascadeData(F, G, short_grid), 2, 1, 2, short_grid, 1, plant=(F, G))
    assert rep.max_rel_err() <= 1e-6


def test_full_round_trip_from_probes(short_grid, narrow_plant):
    F, G = narrow_plant
    data = ProbeData(F, G, short_grid)
    rep = recon_full(data, 2, 1, 2, short_grid, 1, plant=(F, G), rule="mirrored")
    assert rep.max_rel_err() <= 1e-3
    assert all(abs(s - 2) <= 0.2 for s in data.slopes if np.isfinite(s))


def test_probe_scale_and_real_probes_do_not_change_result(short_grid, general_plant, full_report):
    F, G = general_plant
    rep = recon_full(CascadeData(F, G, short_grid), 2, 1, 2, short_grid, 2, plant=(F, G),
                     rule="mirrored", scale=0.25, real_probes=True, threads=2)
    for a, b in zip(rep.rows, full_report.rows):
        assert abs(a["recovered"] - b["recovered"]) <= 1e-8 * max(1.0, abs(b["recovered"]))


def test_shared_engine_matches_full_engine(short_grid):
    F, G = make_planted(PlantSpec(2, 2, "shared", band=1, seed=6), short_grid)
    data = CascadeData(F, G, short_grid)
    sh = recon_shared(data, 2, 1, 2, short_grid, 1, population=1, plant=(F, G), rule="mirrored")
    full = recon_full(data, 2, 1, 2, short_grid, 1, plant=(F, G), rule="mirrored")
    assert sh.max_rel_err() <= 1e-6
    for beta in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
        for which in ("F", "G"):
            a = np.asarray((sh.F if which == "F" else sh.G).coefficient(0, beta))
            b = np.asarray((full.F if which == "F" else full.G).coefficient(1, beta))
            assert np.max(np.abs(a - b)) <= 1e-8


def test_band_must_fit_the_grid(short_grid, narrow_plant):
    F, G = narrow_plant
    with pytest.raises(GridMismatchError):
        recon_full(CascadeData(F, G, short_grid), 2, 1, 2, short_grid, 3)


def test_recovery_band_must_cover_the_plant(short_grid, general_plant):
    # modes outside the recovered band leak into the higher-order subtraction
    F, G = general_plant
    rep = recon_full(CascadeData(F, G, short_grid), 2, 1, 2, short_grid, 1, plant=(F, G), rule="mirrored")
    assert rep.max_rel_err("F") > 1e-3


def test_strict_mode_refuses_ill_conditioned_band():
    grid = TorusGrid(1, 32, 0.1, 400)
    F, G = make_planted(PlantSpec(2, 2, band=1, seed=1), grid)
    with pytest.raises(ConditioningError) as info:
        recon_full(CascadeData(F, G, grid), 2, 1, 2, grid, 4)
    err = info.value
    assert err.condition > 1e8 and err.frequency is not None and err.population == 0


def test_lenient_mode_keeps_running_cost_and_flags_terminal():
    grid = TorusGrid(1, 16, 0.1, 400)
    F, G = make_planted(PlantSpec(2, 2, band=1, seed=1), grid)
    rep = recon_full(CascadeData(F, G, grid), 2, 1, 2, grid, 2, strict=False, plant=(F, G), rule="mirrored")
    assert rep.max_rel_err("F") <= 1e-6
    flagged = [r for r in rep.rows if not r["resolved"]]
    assert flagged and all(r["cost"] == "G" for r in flagged)
    assert rep.diagnostics


# -- state-independent engine ----------------------------------------------------------------

@pytest.fixture(scope="module")
def stateless_grid():
    return TorusGrid(1, 8, 0.1, 400)


@pytest.mark.parametrize("observed", [0, 2])
def test_stateless_round_trip(stateless_grid, observed):
    F, G = make_planted(PlantSpec(3, 2, "state-independent", coupling_min=0.5, seed=2))
    rep = recon_stateless(CascadeData(F, G, stateless_grid), 3, 2, stateless_grid, plant=(F, G), observed=observed)
    assert rep.complete
    assert len(rep.rows) == 3 * 9
    assert rep.max_rel_err() <= 1e-4


def test_stateless_round_trip_from_probes(stateless_grid):
    F, G = make_planted(PlantSpec(2, 2, "state-independent", coupling_min=0.5, seed=3))
    rep = recon_stateless(ProbeData(F, G, stateless_grid), 2, 2, stateless_grid, plant=(F, G))
    assert rep.max_rel_err() <= 1e-4


def test_stateless_decoupled_plant(stateless_grid):
    F, G = make_planted(PlantSpec(3, 2, "state-independent", decoupled=True, seed=2))
    data = CascadeData(F, G, stateless_grid)
    rep = recon_stateless(data, 3, 2, stateless_grid, plant=(F, G))
    assert not rep.complete
    assert "decoupled" in rep.diagnostics[0]
    assert {r["population"] for r in rep.rows} == {0}
    assert rep.max_rel_err() <= 1e-6
    with pytest.raises(DecouplingError):
        recon_stateless(data, 3, 2, stateless_grid, strict=True)


def test_write_report(tmp_path, full_report):
    out = write_report(full_report, tmp_path, {"seed": 1})
    assert (out / "reconstruction.json").exists()
    lines = (out / "tables" / "full_coefficients.csv").read_text().splitlines()
    assert lines[0].startswith("population,cost,multi_index,frequency")
    assert len(lines) == len(full_report.rows) + 1


@pytest.mark.parametrize("xi,parts", [
    ((0,), ((-1,), (1,), 2, (-2,), (2,), 8)),
    ((3,), ((-1,), (4,), 17, (-2,), (5,), 29)),
])
def test_decomposition_examples(xi, parts):
    dec = pick_decomposition(xi)
    assert (dec.xi1, dec.xi2, dec.s, dec.xi1p, dec.xi2p, dec.sp) == parts


def test_offset_design_determinants_are_one():
    assert offset_design_determinant(1) == pytest.approx(1.0)
    assert offset_design_determinant(2) == pytest.approx(1.0)


def _single_mode_plant(grid, kind):
    cos = np.cos(2 * np.pi * grid.nodes[0])
    from mfginv import CostSeries
    if kind == "shared":
        F = CostSeries(2, 1, {(1, 0): 0.6 * cos, (0, 1): 0.6 * cos}, "shared", grid)
        G = CostSeries(2, 1, None, "shared", grid)
    else:
        F = CostSeries(2, 1, [{(1, 0): cos}, {}], "general", grid)
        G = CostSeries(2, 1, None, "general", grid)
    return F, G


def test_single_mode_plant_recovered():
    # only F_0^(e_0) = cos(2 pi x) is nonzero; its +-1 amplitudes are 0.5
    grid = TorusGrid(1, 16, 0.1, 2000)
    F, G = _single_mode_plant(grid, "general")
    rep = recon_full(CascadeData(F, G, grid), 2, 1, 1, grid, 1, strict=False)
    amps = grid.fft(np.asarray(rep.F.coefficient(0, (1, 0))))
    assert abs(amps[grid.index(1)] - 0.5) <= 1e-6
    assert abs(amps[grid.index(-1)] - 0.5) <= 1e-6


def test_single_mode_shared_plant_recovered():
    grid = TorusGrid(1, 16, 0.1, 2000)
    F, G = _single_mode_plant(grid, "shared")
    rep = recon_shared(CascadeData(F, G, grid), 2, 1, 1, grid, 1, population=1, strict=False)
    amps = grid.fft(np.asarray(rep.F.coefficient(0, (0, 1))))
    assert abs(amps[grid.index(1)] - 0.3) <= 1e-6


def test_stage_one_example():
    # F_0(m) = m_0 + m_1, T = 1: the datum at c = (0.3, 0.2) is 0.5 and the fit returns (1, 1)
    step = 0.1
    pts = np.array(list(itertools.product(range(2), repeat=2)), float) * step
    vals = [1.0 * (p[0] + p[1]) for p in pts]
    fit, _ = stage_one_fit(vals, pts, 1, 1.0, step)
    assert fit[(1, 0)] == pytest.approx(1.0) and fit[(0, 1)] == pytest.approx(1.0)
    assert 1.0 * (fit[(1, 0)] * 0.3 + fit[(0, 1)] * 0.2) == pytest.approx(0.5)
