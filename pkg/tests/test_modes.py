import numpy as np
import pytest

import gatedcat as gc
from gatedcat.errors import GridCoverageError, ModeWidthWarning, PhysicsError
from gatedcat.modes import TimeGrid

OPO_HWHM = 58.4
FILTER_HWHM = 8.0
GATE_WIDTHS = (8.3, 29.7, 49.5, 70.4)


@pytest.fixture(scope="module")
def grid():
    return gc.default_grid()


@pytest.fixture(scope="module")
def packet(grid):
    g = gc.filter_response(FILTER_HWHM, grid)
    r = gc.opo_correlation(OPO_HWHM, grid)
    return gc.wavepacket(g, r)


# ---------------------------------------------------------------------------
# grids


def test_grid_basics():
    g = TimeGrid(-10.0, 0.5, 41)
    assert g.times[0] == -10.0 and g.times[-1] == 10.0
    assert g.span == 20.0
    assert g.index_of_zero() == 20
    assert g.covers(3.0) and not g.covers(4.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(0.0, -1.0, 20)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 4)


def test_grid_subgrid_relation():
    big = TimeGrid(-200.0, 0.5, 801)
    assert big.contains_subgrid(TimeGrid(-130.0, 1.0, 201))
    assert big.contains_subgrid(big)
    assert not big.contains_subgrid(TimeGrid(-130.25, 1.0, 201))  # off-lattice offset
    assert not big.contains_subgrid(TimeGrid(-130.0, 0.3, 201))   # incommensurate step
    assert not big.contains_subgrid(TimeGrid(-300.0, 1.0, 201))   # out of range


# ---------------------------------------------------------------------------
# mode constructors


def test_opo_correlation_decay_rate(grid):
    r = gc.opo_correlation(OPO_HWHM, grid)
    gamma = 2 * np.pi * OPO_HWHM * 1e-3
    assert 1 / gamma == pytest.approx(2.7246, abs=1e-3)
    t = grid.times
    mask = (t > 0) & (t < 10)
    ratio = np.abs(r.values[mask]) / np.abs(r.values[grid.index_of_zero()])
    assert np.allclose(-np.log(ratio) / t[mask], gamma, rtol=1e-9)


def test_opo_correlation_symmetric(grid):
    r = gc.opo_correlation(OPO_HWHM, grid)
    assert np.array_equal(r.values, r.values[::-1])


def test_opo_fwhm_scaling(grid):
    w1 = gc.fwhm(gc.opo_correlation(OPO_HWHM, grid))
    w2 = gc.fwhm(gc.opo_correlation(2 * OPO_HWHM, grid))
    assert w2 == pytest.approx(w1 / 2, rel=0.01)


def test_opo_grid_too_narrow():
    with pytest.raises(GridCoverageError):
        gc.opo_correlation(OPO_HWHM, TimeGrid(-5.0, 0.5, 21))


def test_filter_response_causal(grid):
    g = gc.filter_response(FILTER_HWHM, grid)
    t = grid.times
    assert np.all(g.values[t > 0] == 0)
    gamma = 2 * np.pi * FILTER_HWHM * 1e-3
    assert 1 / gamma == pytest.approx(19.894, abs=1e-3)
    assert g.norm == pytest.approx(1.0, abs=1e-10)


def test_wavepacket_width_matches_expected(packet):
    assert gc.fwhm(packet) == pytest.approx(22.0, abs=2.0)


def test_wavepacket_delta_source_limit(grid):
    g = gc.filter_response(FILTER_HWHM, grid)
    r_fast = gc.opo_correlation(1e4, grid)  # 10 GHz: correlation collapses to ~delta
    f = gc.wavepacket(g, r_fast)
    assert abs(f.overlap(g)) ** 2 > 0.999


def test_wavepacket_commutes(grid):
    g = gc.filter_response(FILTER_HWHM, grid)
    r = gc.opo_correlation(OPO_HWHM, grid)
    a = gc.wavepacket(g, r)
    b = gc.wavepacket(r, g)
    assert np.abs(a.values - b.values).max() < 1e-10


def test_wavepacket_grid_mismatch(grid):
    g = gc.filter_response(FILTER_HWHM, grid)
    r = gc.opo_correlation(OPO_HWHM, TimeGrid(-100.0, 0.5, 401))
    with pytest.raises(ValueError):
        gc.wavepacket(g, r)


def test_mode_restriction(grid, packet):
    sub = TimeGrid(-130.0, 1.0, 201)
    f_sub = packet.restricted(sub)
    assert f_sub.norm == pytest.approx(1.0, abs=1e-12)
    k = np.argmax(np.abs(f_sub.values))
    k_big = np.argmax(np.abs(packet.values))
    assert sub.times[k] == pytest.approx(grid.times[k_big], abs=1.0)


# ---------------------------------------------------------------------------
# jitter distributions


def test_rectangular_density_level(grid):
    j = gc.jitter_rectangular(8.3, grid)
    interior = np.abs(grid.times) <= 8.3 / 2 - grid.dt
    assert np.allclose(j.density[interior], 1 / 8.3, rtol=1e-12)
    assert j.density.sum() * grid.dt == pytest.approx(1.0, abs=1e-12)


def test_rectangular_variance_exact(grid):
    # width an odd multiple of dt: cell edges line up, slab variance is exact
    width = 17 * grid.dt
    j = gc.jitter_rectangular(width, grid)
    assert j.variance() == pytest.approx(width**2 / 12, rel=1e-6)
    assert j.mean() == pytest.approx(0.0, abs=1e-12)


def test_rectangular_too_wide(grid):
    with pytest.raises(GridCoverageError):
        gc.jitter_rectangular(500.0, grid)


def test_rectangular_single_bin_is_delta(grid, packet):
    j = gc.jitter_rectangular(grid.dt, grid)
    pm = gc.principal_mode(gc.jitter_kernel(packet, j))
    assert pm.lambda1 > 0.999


def test_gate_profile_rectangular_limit(grid):
    rect = gc.jitter_rectangular(10.0, grid)
    trap = gc.jitter_gate_profile(10.0, 0.0, 300.0, grid)
    assert np.abs(rect.density - trap.density).max() < 1e-9


def test_gate_profile_floor_ratio(grid):
    j = gc.jitter_gate_profile(10.0, 3.5, 30.0, grid)
    plateau = j.density[grid.index_of_zero()]
    floor = j.density[0]
    assert floor / plateau == pytest.approx(1e-3, rel=1e-12)


def test_gate_profile_unit_integral(grid):
    for width, rise, ext in [(10, 3.5, 30), (25, 1.0, 45), (60, 10.0, 20)]:
        j = gc.jitter_gate_profile(width, rise, ext, grid)
        assert j.density.sum() * grid.dt == pytest.approx(1.0, abs=1e-12)


def test_gate_profile_bad_geometry(grid):
    with pytest.raises(ValueError):
        gc.jitter_gate_profile(10.0, 12.0, 30.0, grid)
    with pytest.raises(ValueError):
        gc.jitter_gate_profile(10.0, 3.0, -1.0, grid)


def test_gaussian_jitter_moments(grid):
    fwhm_ns = 20.0
    j = gc.jitter_gaussian(fwhm_ns, grid)
    sigma = fwhm_ns / np.sqrt(8 * np.log(2))
    # slab discretization of a curved density is exact only to O(dt^2)
    assert j.variance() == pytest.approx(sigma**2, abs=grid.dt**2 / 4)


def test_delta_jitter(grid):
    j = gc.jitter_delta(grid)
    assert j.density[grid.index_of_zero()] == pytest.approx(1 / grid.dt)
    assert j.variance() == pytest.approx(grid.dt**2 / 12)


# ---------------------------------------------------------------------------
# kernel and principal mode


def test_kernel_delta_is_rank_one(grid, packet):
    k = gc.jitter_kernel(packet, gc.jitter_delta(grid))
    outer = np.outer(packet.values, packet.values.conj()).real
    assert np.abs(k.matrix - outer).max() < 1e-10
    pm = gc.principal_mode(k)
    assert pm.lambda1 == pytest.approx(1.0, abs=1e-9)
    assert abs(pm.f1.overlap(packet)) ** 2 > 1 - 1e-9


def test_kernel_wide_gate_rank(grid, packet):
    k = gc.jitter_kernel(packet, gc.jitter_rectangular(70.4, grid))
    pm = gc.principal_mode(k)
    spec = pm.spectrum / pm.spectrum.sum()
    participation = 1.0 / np.sum(spec**2)
    assert participation > 2.0


def test_kernel_hermitian_psd_random(grid, rng):
    t = grid.times
    for _ in range(20):
        center = rng.uniform(-30, 30)
        width = rng.uniform(3, 25)
        vals = np.exp(-((t - center) ** 2) / (2 * width**2)) * (1 + 0.3 * np.sin(t / width))
        f = gc.ModeFunction(grid, vals).normalize()
        jw = rng.uniform(2, 50)
        j = gc.jitter_rectangular(jw, grid)
        k = gc.jitter_kernel(f, j).matrix
        assert np.abs(k - k.conj().T).max() < 1e-12
        ev = np.linalg.eigvalsh((k + k.conj().T) / 2)
        assert ev.min() > -1e-10
        assert np.trace(k).real * grid.dt == pytest.approx(1.0, abs=1e-8)


def test_kernel_grid_mismatch(grid, packet):
    other = TimeGrid(-100.0, 0.5, 401)
    with pytest.raises(ValueError):
        gc.jitter_kernel(packet, gc.jitter_delta(other))


def test_kernel_coverage_error(packet):
    tight = TimeGrid(-40.0, 0.5, 161)
    g = gc.ModeFunction(tight, np.exp(-((tight.times + 20) ** 2) / 18)).normalize()
    with pytest.raises(GridCoverageError):
        gc.jitter_kernel(g, gc.jitter_rectangular(60.0, tight))


def test_principal_mode_width_and_peak_trends(grid, packet):
    widths_f1 = []
    peaks = []
    lams = []
    for w in GATE_WIDTHS:
        pm = gc.principal_mode(gc.jitter_kernel(packet, gc.jitter_rectangular(w, grid)))
        widths_f1.append(gc.fwhm(pm.f1))
        peaks.append(np.abs(pm.f1.values).max())
        lams.append(pm.lambda1)
    assert np.all(np.diff(widths_f1) > 0)
    assert np.all(np.diff(peaks) < 0)
    assert np.all(np.diff(lams) < 0)


def test_principal_mode_rejects_non_hermitian(grid):
    m = np.eye(grid.n_samples)
    m[0, 1] = 0.5
    with pytest.raises(ValueError):
        gc.principal_mode(gc.modes.JitterKernel(grid, m))


def test_spectrum_normalization_invariant(grid, packet):
    for w in (5.0, 20.0, 58.0):
        pm = gc.principal_mode(gc.jitter_kernel(packet, gc.jitter_rectangular(w, grid)))
        assert pm.spectrum.sum() * grid.dt == pytest.approx(1.0, abs=1e-8)
        assert 0 < pm.lambda1 <= 1


def test_shift_covariance(grid, packet):
    base = gc.jitter_rectangular(20.0, grid)
    shifted = base.translate(4.0)
    pm0 = gc.principal_mode(gc.jitter_kernel(packet, base))
    pm1 = gc.principal_mode(gc.jitter_kernel(packet, shifted))
    assert pm1.lambda1 == pytest.approx(pm0.lambda1, abs=1e-9)
    rolled = pm0.f1.shifted(4.0)
    assert abs(pm1.f1.overlap(rolled)) ** 2 > 1 - 1e-9


def test_grid_refinement_stability(packet, grid):
    fine = TimeGrid(grid.t0, grid.dt / 2, 2 * grid.n_samples - 1)
    g_f = gc.filter_response(FILTER_HWHM, fine)
    r_f = gc.opo_correlation(OPO_HWHM, fine)
    f_fine = gc.wavepacket(g_f, r_f)
    for w in (8.3, 49.5):
        lam_coarse = gc.principal_mode(
            gc.jitter_kernel(packet, gc.jitter_rectangular(w, grid))
        ).lambda1
        lam_fine = gc.principal_mode(
            gc.jitter_kernel(f_fine, gc.jitter_rectangular(w, fine))
        ).lambda1
        assert abs(lam_fine - lam_coarse) < 1e-3


# ---------------------------------------------------------------------------
# width measurement


def test_fwhm_gaussian():
    g = TimeGrid(-100.0, 0.5, 401)
    sigma = 10.0
    m = gc.ModeFunction(g, np.exp(-g.times**2 / (2 * sigma**2))).normalize()
    assert gc.fwhm(m) == pytest.approx(2 * sigma * np.sqrt(2 * np.log(2)), abs=g.dt)


def test_fwhm_scales_with_time_axis():
    g1 = TimeGrid(-100.0, 0.5, 401)
    g2 = TimeGrid(-200.0, 1.0, 401)
    m1 = gc.ModeFunction(g1, np.exp(-g1.times**2 / 200)).normalize()
    m2 = gc.ModeFunction(g2, np.exp(-g2.times**2 / 800)).normalize()
    assert gc.fwhm(m2) == pytest.approx(2 * gc.fwhm(m1), rel=1e-6)


def test_fwhm_multi_peak_warns():
    g = TimeGrid(-100.0, 0.5, 401)
    vals = np.exp(-((g.times + 30) ** 2) / 50) + 0.8 * np.exp(-((g.times - 30) ** 2) / 50)
    m = gc.ModeFunction(g, vals).normalize()
    with pytest.warns(ModeWidthWarning):
        width = gc.fwhm(m)
    assert width < 40  # highest peak only, not the envelope of both


def test_fwhm_zero_mode_rejected():
    g = TimeGrid(-10.0, 0.5, 41)
    with pytest.raises(PhysicsError):
        gc.fwhm(gc.ModeFunction(g, np.zeros(41)))
