"""Probe-point reconstruction, linear baseline, and kernel resampling.

Numeric windows are frozen from calibration on the derivative-of-gaussian
profile: working kernels 128 x 128 on [-8, 8]^2 from a 256-point field
box on [-32, 32]^2. The t = 0 round trip lands at 1.2% (leading term
only) and 0.34% (with correction) of the field maximum at amplitude
0.05; the two linear routes agree to a few times 1e-7 once both
quadratures are dense enough.
"""

import dataclasses
import warnings

import numpy as np
import pytest

from kpist.grids import (
    ConditionsReport,
    Grid1D,
    PotentialField,
    make_test_potential,
    partial_fourier_x,
)
from kpist.scattering import (
    ScatteringData,
    ScatteringGrids,
    assemble_T,
    resample_transform,
    solve_mu_sharp,
)
from kpist.rhp import EvolvedData, solve_dmul_dx, solve_mul
from kpist.phase_airy import RegionLabel
from kpist.reconstruct import (
    ReconstructionSample,
    combined_kernel,
    eval_u1,
    eval_u2,
    linear_field,
    linear_kp,
    linear_kp_crosscheck,
    ray_resolution_grid,
    reconstruct,
    resample_scattering_data,
)

WORK_KL = Grid1D(-8.0, 8.0, 128)
WORK_Y = Grid1D(-8.0, 8.0, 128)
FIELD_GRID = Grid1D(-32.0, 32.0, 256)


def build_reference(eps, grid_kl=WORK_KL, grid_y=WORK_Y):
    field = make_test_potential("gaussian_dx", eps, 1.0, FIELD_GRID, FIELD_GRID)
    pt = partial_fourier_x(field)
    wg = ScatteringGrids(grid_kl, grid_y)
    ut = resample_transform(pt, wg)
    mu_p = solve_mu_sharp(ut, +1, wg)
    mu_m = solve_mu_sharp(ut, -1, wg)
    return field, assemble_T(mu_p, mu_m, ut, wg)


def zero_data():
    z = np.zeros((WORK_KL.n, WORK_KL.n), dtype=complex)
    return ScatteringData(z.copy(), z.copy(), z.copy(),
                          ScatteringGrids(WORK_KL, WORK_Y), {})


def core_probes(field, stride=37, count=6):
    vals = field.values
    mask = np.abs(vals) >= 0.3 * np.max(np.abs(vals))
    out = []
    for i, j in np.argwhere(mask)[::stride][:count]:
        out.append((field.grid_x.points[i], field.grid_y.points[j],
                    vals[i, j]))
    return out


@pytest.fixture(scope="module")
def ref05():
    return build_reference(0.05)


@pytest.fixture(scope="module")
def ref02():
    return build_reference(0.02)


@pytest.fixture(scope="module")
def ref01():
    return build_reference(0.01)


class TestSampleRecord:

    def test_sum_identity_and_immutability(self):
        s = ReconstructionSample((0.0, 1.0, 2.0), 0.5 + 0j, 0.25 + 0j,
                                 0.75 + 0j, RegionLabel.TRANSITION)
        assert s.u == s.u1 + s.u2
        with pytest.raises(dataclasses.FrozenInstanceError):
            s.u1 = 0.0


class TestRoundTrip:

    def test_time_zero_core(self, ref05):
        field, data = ref05
        scale = field.max_abs()
        worst1 = worst = worst_im = 0.0
        for x, y, target in core_probes(field):
            s = reconstruct(data, 0.0, x, y)
            worst1 = max(worst1, abs(s.u1 - target))
            worst = max(worst, abs(s.u - target))
            worst_im = max(worst_im, abs(s.u.imag))
            assert s.region is RegionLabel.TRANSITION
        # contract: leading term within 10 eps, full value within 5% on
        # the core; frozen margins from calibration (0.012 and 0.0034)
        assert worst1 / scale <= 10 * 0.05
        assert worst1 / scale <= 0.03
        assert worst / scale <= 0.05
        assert worst / scale <= 0.01
        # the correction must actually help, not just be small
        assert worst < worst1
        # real input data reconstructs to a real field
        assert worst_im <= 1e-4
        assert worst_im <= 1e-5

    def test_zero_data_reconstructs_zero(self):
        s = reconstruct(zero_data(), 0.0, 1.0, -2.0)
        assert s.u1 == 0.0 and s.u2 == 0.0 and s.u == 0.0
        s5 = reconstruct(zero_data(), 5.0, 1.0, -2.0)
        assert s5.u == 0.0
        assert s5.region is RegionLabel.TRANSITION  # x/t small at t=5

    def test_determinism(self, ref05):
        _, data = ref05
        a = reconstruct(data, 0.0, 1.0, 0.5)
        b = reconstruct(data, 0.0, 1.0, 0.5)
        assert a.u == b.u and a.u1 == b.u1 and a.u2 == b.u2


class TestQuadraticCorrection:

    def test_eps_scaling_window(self, ref01, ref02, ref05):
        # |u2| / |u1| grows linearly in amplitude: the normalized ratio
        # stays in a fixed window and the 5x amplitude span moves the
        # raw ratio by 5x up to quadrature (measured 4.35)
        ratios = {}
        for eps, (field, data) in ((0.01, ref01), (0.02, ref02),
                                   (0.05, ref05)):
            s = reconstruct(data, 0.0, 1.0, 0.5)
            r = abs(s.u2) / abs(s.u1)
            ratios[eps] = r
            assert 0.015 <= r / eps <= 0.06
        assert 3.0 <= ratios[0.05] / ratios[0.01] <= 6.5

    def test_probe_mismatch_rejected(self, ref05):
        _, data = ref05
        ev = EvolvedData(data, 0.0)
        sol = solve_dmul_dx(ev, 0.0, 1.0, 0.5)
        with pytest.raises(ValueError, match="solution record"):
            eval_u2(ev, 2.0, 0.5, sol)

    def test_missing_derivative_rejected(self, ref05):
        _, data = ref05
        ev = EvolvedData(data, 0.0)
        sol = solve_mul(data, 0.0, 1.0, 0.5)
        assert sol.dmu_dx is None
        with pytest.raises(ValueError, match="derivative"):
            eval_u2(ev, 1.0, 0.5, sol)


class TestOrchestration:

    def test_time_mismatch_rejected(self, ref05):
        _, data = ref05
        ev = EvolvedData(data, 1.0)
        with pytest.raises(ValueError, match="time"):
            reconstruct(ev, 2.0, 0.0, 0.0)

    def test_failed_conditions_rejected(self, ref05):
        _, data = ref05
        bad = ConditionsReport(c=2.0, c_tilde=2.0, w_norm=1.0,
                               e1w_norm=1.0, passed=False)
        with pytest.raises(ValueError):
            reconstruct(data, 0.0, 1.0, 0.5, conditions=bad)

    def test_region_labels_follow_ray(self, ref05):
        _, data = ref05
        fine = resample_scattering_data(
            data, ray_resolution_grid(25.0, -75.0, 0.0))
        s = reconstruct(fine, 25.0, -75.0, 0.0)
        assert s.region is RegionLabel.OSCILLATORY
        fine2 = resample_scattering_data(
            data, ray_resolution_grid(25.0, 75.0, 0.0))
        s2 = reconstruct(fine2, 25.0, 75.0, 0.0)
        assert s2.region is RegionLabel.RAPID


class TestOscillationFlag:

    def test_silent_on_resolved_probes(self, ref05):
        field, data = ref05
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            for x, y, _ in core_probes(field):
                eval_u1(EvolvedData(data, 0.0), x, y)

    def test_fires_on_coarse_late_time(self, ref05):
        _, data = ref05
        with pytest.warns(RuntimeWarning, match="oscillatory weight"):
            eval_u1(EvolvedData(data, 25.0), -75.0, 0.0)

    def test_silent_after_refinement(self, ref05):
        _, data = ref05
        g = ray_resolution_grid(25.0, -75.0, 0.0)
        fine = resample_scattering_data(data, g)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            eval_u1(EvolvedData(fine, 25.0), -75.0, 0.0)

    def test_zero_kernel_no_flag(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert eval_u1(EvolvedData(zero_data(), 30.0), -50.0, 3.0) == 0.0


class TestLinearBaseline:

    def test_time_zero_identities(self, ref02):
        field, _ = ref02
        scale = field.max_abs()
        v0 = linear_field(field, 0.0)
        assert np.max(np.abs(v0 - field.values)) / scale <= 1e-8
        i, j = 128, 140
        p = linear_kp(field, 0.0, field.grid_x.points[i],
                      field.grid_y.points[j])
        assert abs(p - field.values[i, j]) / scale <= 1e-8

    def test_l2_unitarity(self, ref02):
        field, _ = ref02
        v = linear_field(field, 0.7)
        n0 = np.sqrt(np.sum(field.values ** 2))
        n1 = np.sqrt(np.sum(v ** 2))
        assert abs(n1 - n0) / n0 <= 1e-8

    def test_point_matches_field_on_lattice(self, ref02):
        field, _ = ref02
        v = linear_field(field, 0.7)
        scale = field.max_abs()
        for i, j in [(128, 128), (120, 140), (140, 120)]:
            p = linear_kp(field, 0.7, field.grid_x.points[i],
                          field.grid_y.points[j])
            assert abs(p - v[i, j]) / scale <= 1e-12

    def test_nonzero_mean_rejected(self):
        x = FIELD_GRID.points[:, None]
        y = FIELD_GRID.points[None, :]
        bad = PotentialField(FIELD_GRID, FIELD_GRID,
                             np.exp(-(x ** 2 + y ** 2) / 2.0))
        with pytest.raises(ValueError, match="zero-mean"):
            linear_kp(bad, 0.5, 0.0, 0.0)
        with pytest.raises(ValueError, match="zero-mean"):
            linear_field(bad, 0.5)

    def test_two_route_agreement(self, ref02):
        # dense quadratures on both sides: the rectangular route needs
        # respline because the dispersion rate blows up at the excluded
        # line; the two-variable route needs a wide box for the wedge
        # |q| > |p| (2H - |p|) it cannot reach (measured 5.2e-7, 2.4e-7)
        field, _ = ref02
        scale = field.max_abs()
        kl = Grid1D(-10.0, 10.0, 2048)
        for (t, x, y) in [(0.3, -3.0, 1.0), (0.7, 1.5, -2.0)]:
            a = linear_kp(field, t, x, y, n_quad=8192)
            b = linear_kp_crosscheck(field, t, x, y, kl)
            assert abs(a - b) / scale <= 1e-6


class TestLinearRegimeAtT5:

    def test_leading_term_matches_linear(self, ref01):
        field, data = ref01
        probes = [(-10.0, 8.0), (-20.0, -12.0), (-6.0, 8.0), (-2.0, 0.0)]
        expect_regions = [RegionLabel.OSCILLATORY, RegionLabel.OSCILLATORY,
                          RegionLabel.OSCILLATORY, RegionLabel.TRANSITION]
        u1s, vs = [], []
        for (x, y), reg in zip(probes, expect_regions):
            g = ray_resolution_grid(5.0, x, y)
            fine = resample_scattering_data(data, g)
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                s = reconstruct(fine, 5.0, x, y)
            assert s.region is reg
            assert abs(s.u.imag) <= 1e-7
            u1s.append(s.u1)
            vs.append(linear_kp(field, 5.0, x, y, n_quad=2048,
                                quad_half=8.0))
        scale = max(abs(v) for v in vs)
        rel = max(abs(a - b) for a, b in zip(u1s, vs)) / scale
        assert rel <= 10 * 0.01  # contract at this amplitude
        assert rel <= 0.02       # frozen margin (measured 0.0043)


class TestRefinement:

    def test_doubling_settles_value(self, ref05):
        # successive kernel-grid doublings must shrink the change in the
        # reconstructed value by at least 2x per doubling (measured 9.9x)
        _, data128 = ref05
        _, data64 = build_reference(0.05, grid_kl=Grid1D(-8.0, 8.0, 64))
        _, data256 = build_reference(0.05, grid_kl=Grid1D(-8.0, 8.0, 256))
        us = {}
        for n, d in ((64, data64), (128, data128), (256, data256)):
            us[n] = reconstruct(d, 0.0, 1.0, 0.5).u
        d1 = abs(us[128] - us[64])
        d2 = abs(us[256] - us[128])
        assert d1 / d2 >= 2.0
        assert d1 / d2 >= 3.0  # frozen margin


class TestResampling:

    def test_same_grid_is_nodally_exact(self, ref05):
        _, data = ref05
        res = resample_scattering_data(data, WORK_KL)
        for name in ("T_plus", "T_minus", "T1"):
            assert np.max(np.abs(getattr(res, name)
                                 - getattr(data, name))) <= 1e-12

    def test_against_direct_fine_assembly(self, ref01):
        # the hard direction: halving the spacing while keeping the
        # domain stresses the band cells whose width matches the source
        # spacing (measured 2.9e-3 Frobenius, 1.0e-2 max, u1 3.5e-4)
        _, coarse = ref01
        fine_grid = Grid1D(-4.0, 4.0, 256)
        _, direct = build_reference(0.01, grid_kl=fine_grid)
        res = resample_scattering_data(coarse, fine_grid)
        for name in ("T_plus", "T_minus", "T1"):
            a, b = getattr(res, name), getattr(direct, name)
            assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 6e-3
            assert np.max(np.abs(a - b)) / np.max(np.abs(b)) <= 2.5e-2
        for (x, y) in [(1.0, 0.5), (-2.0, 1.5)]:
            va = eval_u1(EvolvedData(res, 0.0), x, y)
            vb = eval_u1(EvolvedData(direct, 0.0), x, y)
            assert abs(va - vb) / abs(vb) <= 1e-3

    def test_triangular_structure_preserved(self, ref05):
        _, data = ref05
        res = resample_scattering_data(data, Grid1D(-4.0, 4.0, 256))
        n = 256
        d = np.arange(n)[None, :] - np.arange(n)[:, None]
        assert np.all(res.T_plus[d < 0] == 0.0)
        assert np.all(res.T_minus[d > 0] == 0.0)
        # the linear part is proportional to the offset, so its diagonal
        # is numerically zero; the stored diagonals carry only the
        # half-weighted quadratic remainders
        diag = np.arange(n)
        assert np.max(np.abs(res.T1[diag, diag])) <= \
            1e-10 * np.max(np.abs(res.T1))

    def test_meta_records_source(self, ref05):
        _, data = ref05
        res = resample_scattering_data(data, Grid1D(-4.0, 4.0, 256))
        assert res.meta["resampled_from_n"] == 128
        assert res.meta["resampled_from_half_width"] == 8.0

    def test_fine_grid_outside_source_rejected(self, ref05):
        _, data = ref05
        with pytest.raises(ValueError, match="inside"):
            resample_scattering_data(data, Grid1D(-16.0, 16.0, 64))


class TestRayResolutionGrid:

    def test_default_floor_at_time_zero(self):
        g = ray_resolution_grid(0.0, 3.0, 3.0)
        assert (g.min, g.max, g.n) == (-1.5, 1.5, 256)

    def test_oscillatory_ray_late_time(self):
        # x/t = -3 at t = 100: stationary points at +-0.5, default
        # half-width; the endpoint phase rate 2400 forces 4096 cells
        g = ray_resolution_grid(100.0, -300.0, 0.0)
        assert (g.min, g.max, g.n) == (-1.5, 1.5, 4096)

    def test_widened_domain_for_far_stationary_points(self):
        # x/t = -12: stationary points at +-1, domain widens to +-2
        g = ray_resolution_grid(100.0, -1200.0, 0.0)
        assert (g.min, g.max) == (-2.0, 2.0)
        assert g.n == 8192

    def test_cap_and_power_of_two(self):
        g = ray_resolution_grid(1000.0, -12000.0, 5.0, cap=4096)
        assert g.n <= 4096
        assert g.n & (g.n - 1) == 0

    def test_phase_advance_bounded(self):
        for (t, x, y) in [(5.0, -10.0, 8.0), (25.0, -75.0, 0.0),
                          (100.0, -300.0, 0.0)]:
            g = ray_resolution_grid(t, x, y)
            ends = [abs(x - 2 * y * s + 12 * t * s * s)
                    for s in (g.min, g.max)]
            assert max(ends) * g.spacing <= np.pi * 1.0001


class TestCombinedKernel:

    def test_orientation(self, ref05):
        _, data = ref05
        f = combined_kernel(data)
        assert np.array_equal(f, data.T_plus - data.T_minus)
