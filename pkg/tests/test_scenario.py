import math

import numpy as np
import pytest

from jcrsim.scenario import (GeometryError, PathKind, Role, Scenario,
                             VehicleState, advance, path_gain, truth_params)
from jcrsim.waveform import Side


def make_scene(vehicles, frame_period=51.2e-6 * 68 / 60 * 128, seed=7):
    return Scenario(vehicles=tuple(vehicles), frame_period=frame_period,
                    rng_seed=seed)


def av(pos, vel=(0, 0, 0)):
    return VehicleState(1, tuple(pos), tuple(vel), Role.AV)


def tgt(i, pos, vel=(0, 0, 0), role=Role.OTHER):
    return VehicleState(i, tuple(pos), tuple(vel), role)


class TestAdvance:
    def test_zero_frames_identity(self):
        s = make_scene([av((0, 0, 1), (0, 20, 0))])
        s2 = advance(s, 0)
        assert np.array_equal(s2.position_of(s2.the_av()),
                              s.position_of(s.the_av()))

    def test_one_frame_displacement(self):
        s = make_scene([av((0, 0, 1), (0, 20, 0))])
        pos = advance(s, 1).position_of(s.the_av())
        # 20 m/s for one frame of 128 * 58.0267 us
        assert pos[1] == pytest.approx(0.148548267, abs=1e-7)
        assert pos[0] == 0 and pos[2] == 1

    def test_semigroup_bitwise(self):
        s = make_scene([av((0.1, 0.2, 1), (3, 20, 0.5))])
        a = advance(advance(s, 1), 1)
        b = advance(s, 2)
        assert np.array_equal(a.position_of(a.the_av()), b.position_of(b.the_av()))

    def test_negative_frames_rejected(self):
        with pytest.raises(GeometryError):
            advance(make_scene([av((0, 0, 1))]), -1)

    def test_exactly_one_av(self):
        with pytest.raises(GeometryError):
            make_scene([tgt(1, (0, 0, 1)), tgt(2, (1, 1, 1))])


class TestTruthParams:
    def test_boresight(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (0, 10, 1))])
        (p,) = truth_params(s, 1, PathKind.ECHO, table_params)
        assert p.r == pytest.approx(10.0)
        assert p.v_r == pytest.approx(0.0)
        assert p.theta_rx == pytest.approx(0.0)
        assert p.phi_rx == pytest.approx(0.0)

    def test_radial_velocity_projection(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (3, 4, 1), (0, 5, 0))])
        (p,) = truth_params(s, 1, PathKind.ECHO, table_params)
        assert p.v_r == pytest.approx(4.0)

    def test_azimuth_convention(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (-5, 5, 1))])
        (p,) = truth_params(s, 1, PathKind.ECHO, table_params)
        assert p.theta_rx == pytest.approx(math.radians(-45.0))

    def test_echo_angles_tx_equals_rx(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (2, 7, 1.5), (1, -3, 0))])
        (p,) = truth_params(s, 1, PathKind.ECHO, table_params)
        assert p.theta_tx == p.theta_rx
        assert p.phi_tx == p.phi_rx

    def test_fov_culling(self, table_params):
        # |azimuth| > 60 degrees: 10 m to the side, 1 m ahead
        s = make_scene([av((0, 0, 1)), tgt(2, (10, 1, 1))])
        assert truth_params(s, 1, PathKind.ECHO, table_params) == []

    def test_coincident_positions_raise(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (0, 0, 1))])
        with pytest.raises(GeometryError):
            truth_params(s, 1, PathKind.ECHO, table_params)

    def test_forward_paths(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (-5, 5, 1), role=Role.PV),
                        tgt(3, (5, -10, 1))])
        paths = truth_params(s, 2, PathKind.FORWARD, table_params)
        by_id = {p.target_id: p for p in paths}
        direct = by_id[1]
        assert direct.r == pytest.approx(math.hypot(5, 5))
        bounce = by_id[3]
        r_as = math.hypot(5, 10)
        r_ps = math.hypot(10, 15)
        assert bounce.r == pytest.approx(r_as + r_ps)

    def test_phase_frame_deterministic(self, table_params):
        s = make_scene([av((0, 0, 1)), tgt(2, (0, 10, 1), (0, 5, 0))])
        p0 = truth_params(s, 1, PathKind.ECHO, table_params)[0]
        p9 = truth_params(advance(s, 9), 1, PathKind.ECHO, table_params)[0]
        # gain magnitude changes with range, phase stays put
        assert np.angle(p0.beta_h) == pytest.approx(np.angle(p9.beta_h))
        # and repeated evaluation is identical
        p0b = truth_params(s, 1, PathKind.ECHO, table_params)[0]
        assert p0.beta_h == p0b.beta_h

    def test_range_rate_matches_finite_difference(self, table_params):
        # The one-frame forward difference equals the midpoint range rate up
        # to O(T^2); comparing against a single endpoint would leave the
        # curvature term T * v_tan^2 / (2 r), which exceeds the tolerance
        # for the tangential motion of this scene.
        s = make_scene([av((0, 0, 1), (0, 20, 0)),
                        tgt(2, (-5, 5, 1), (0, 25, 0), role=Role.PV),
                        tgt(3, (5, -10, 1), (0, 30, 0))])
        for pk, obs in ((PathKind.FORWARD, 2), (PathKind.ECHO, 1)):
            now = {p.target_id: p for p in truth_params(s, obs, pk, table_params)}
            nxt = {p.target_id: p
                   for p in truth_params(advance(s, 1), obs, pk, table_params)}
            for tid, p in now.items():
                if tid not in nxt:
                    continue
                fd = (nxt[tid].r - p.r) / s.frame_period
                mid = 0.5 * (p.v_r + nxt[tid].v_r)
                assert abs(fd - mid) <= 1e-3 * abs(mid) + 1e-6

    def test_range_rate_finite_difference_radial_motion(self, table_params):
        # Pure radial motion has no curvature term; the literal endpoint
        # tolerance holds.
        s = make_scene([av((0, 0, 1)), tgt(2, (0, 10, 1), (0, 5, 0))])
        p = truth_params(s, 1, PathKind.ECHO, table_params)[0]
        p1 = truth_params(advance(s, 1), 1, PathKind.ECHO, table_params)[0]
        fd = (p1.r - p.r) / s.frame_period
        assert abs(fd - p.v_r) <= 1e-3 * abs(p.v_r) + 1e-6


class TestPathGain:
    def test_echo_reference_value(self, table_params, rng):
        g = path_gain(PathKind.ECHO, 10.0, 10.0, table_params, rng,
                      atmos_db_per_km=0.0)
        lam = table_params.lam
        expect = math.sqrt(4 * lam ** 2) / math.sqrt((4 * math.pi) ** 3 * 1e4)
        assert abs(g) == pytest.approx(expect, rel=1e-12)
        # the rounded-wavelength figure
        assert abs(g) == pytest.approx(1.66e-6, rel=0.02)

    def test_forward_inverse_distance(self, table_params, rng):
        g1 = path_gain(PathKind.FORWARD, 10.0, 0.0, table_params, rng,
                       atmos_db_per_km=0.0)
        g2 = path_gain(PathKind.FORWARD, 20.0, 0.0, table_params, rng,
                       atmos_db_per_km=0.0)
        assert abs(g1) == pytest.approx(2 * abs(g2), rel=1e-12)

    def test_echo_inverse_sixteenth(self, table_params, rng):
        g1 = path_gain(PathKind.ECHO, 10.0, 10.0, table_params, rng,
                       atmos_db_per_km=0.0)
        g2 = path_gain(PathKind.ECHO, 40.0, 40.0, table_params, rng,
                       atmos_db_per_km=0.0)
        assert abs(g1) == pytest.approx(16 * abs(g2), rel=1e-12)

    def test_monotone_in_range(self, table_params, rng):
        mags = [abs(path_gain(PathKind.ECHO, r, 12.0, table_params, rng))
                for r in (5.0, 10.0, 20.0, 80.0)]
        assert all(a > b for a, b in zip(mags, mags[1:]))

    def test_nonpositive_range_raises(self, table_params, rng):
        with pytest.raises(GeometryError):
            path_gain(PathKind.ECHO, 0.0, 10.0, table_params, rng)
        with pytest.raises(GeometryError):
            path_gain(PathKind.FORWARD, -1.0, 0.0, table_params, rng)
