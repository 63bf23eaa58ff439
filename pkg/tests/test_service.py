"""HTTP service: sessions, atomic ingestion, training, localization, SSE."""

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from ips.model import (
    AccessPointId,
    Band,
    SurveyArea,
    sample_to_record,
)
from ips.service import SessionStore, create_app
from ips.simulate import (
    PathLossParams,
    SimScenario,
    VirtualAp,
    grid_reference_points,
    simulate_survey,
    simulate_walk,
)


def small_scenario(seed=0):
    area = SurveyArea(6.0, 6.0)
    aps = []
    for i, (x, y) in enumerate([(1.0, 1.0), (5.0, 1.0), (3.0, 5.0)]):
        for b_idx, band in enumerate((Band.GHZ_2_4, Band.GHZ_5)):
            aps.append(
                VirtualAp(
                    AccessPointId(f"02:00:00:00:{i:02x}:{b_idx:02x}", band),
                    x, y,
                    PathLossParams(shadowing_std_db=2.0),
                )
            )
    return SimScenario(area=area, aps=tuple(aps), rng_seed=seed)


def survey_payload(scenario, scans=4, spacing=2.0):
    rps = grid_reference_points(scenario.area, spacing)
    area = SurveyArea(scenario.area.width, scenario.area.height, tuple(rps))
    samples = simulate_survey(scenario, rps, scans)
    return area, [sample_to_record(s) for s in samples]


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        c.data_dir = tmp_path / "data"
        yield c


def create_session(client, area):
    r = client.post("/api/v1/sessions", json={"area": area.to_json()})
    assert r.status_code == 200, r.text
    return r.json()["session_id"]


def trained_session(client, seed=0):
    scenario = small_scenario(seed)
    area, records = survey_payload(scenario)
    sid = create_session(client, area)
    r = client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records})
    assert r.status_code == 200
    r = client.post(f"/api/v1/sessions/{sid}/train", json={"spacing": 1.0})
    assert r.status_code == 200, r.text
    return sid, scenario


class TestSessions:
    def test_create_returns_distinct_ids(self, client):
        area = SurveyArea(6.0, 6.0)
        a = create_session(client, area)
        b = create_session(client, area)
        assert a != b

    def test_create_state_collecting(self, client):
        sid = create_session(client, SurveyArea(6.0, 6.0))
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["state"] == "Collecting"
        assert info["sample_count"] == 0

    def test_invalid_area_rejected(self, client):
        r = client.post("/api/v1/sessions", json={"area": {"width": 0, "height": 5}})
        assert r.status_code == 400
        assert r.json()["error"] == "InvalidArea"

    def test_unknown_session_404(self, client):
        assert client.get("/api/v1/sessions/nope").status_code == 404
        assert client.post(
            "/api/v1/sessions/nope/samples", json={"samples": [{}]}
        ).status_code in (400, 404)  # schema checked first is fine, but unknown id must 404
        r = client.post("/api/v1/sessions/nope/train", json={})
        assert r.status_code == 404


class TestIngest:
    def test_accepts_valid_batch(self, client):
        scenario = small_scenario()
        area, records = survey_payload(scenario, scans=1)
        sid = create_session(client, area)
        r = client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records[:10]})
        assert r.status_code == 200 and r.json()["accepted"] == 10
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["sample_count"] == 10

    def test_batch_atomicity_on_bad_sample(self, client):
        scenario = small_scenario()
        area, records = survey_payload(scenario, scans=1)
        sid = create_session(client, area)
        bad = dict(records[0])
        bad["x"] = 99.0  # outside the area
        r = client.post(
            f"/api/v1/sessions/{sid}/samples", json={"samples": records[:5] + [bad]}
        )
        assert r.status_code == 400
        assert r.json()["error"] == "ValidationFailed"
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["sample_count"] == 0

    def test_concurrent_batches_serialize(self, client):
        scenario = small_scenario()
        area, records = survey_payload(scenario, scans=8)
        sid = create_session(client, area)
        first, second = records[:100], records[100:200]

        def post(batch):
            return client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": batch})

        with ThreadPoolExecutor(2) as pool:
            r1 = pool.submit(post, first)
            r2 = pool.submit(post, second)
            assert r1.result().status_code == 200
            assert r2.result().status_code == 200

        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["sample_count"] == 200
        lines = (client.data_dir / sid / "samples.jsonl").read_bytes().splitlines()
        assert len(lines) == 200
        for line in lines:
            json.loads(line)  # every line individually well-formed

    def test_ingest_after_training_409(self, client):
        sid, _ = trained_session(client)
        scenario = small_scenario()
        _, records = survey_payload(scenario, scans=1)
        r = client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records[:1]})
        assert r.status_code == 409


class TestTraining:
    def test_end_to_end(self, client):
        sid, scenario = trained_session(client)
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["state"] == "Trained"
        r = client.get(f"/api/v1/sessions/{sid}/radiomap")
        assert r.status_code == 200
        doc = r.json()
        assert doc["grid"]["nx"] == 6 and doc["grid"]["ny"] == 6
        # 4 headings x 6 radios, none skipped in this dense little room
        assert len(doc["surfaces"]) == 24

    def test_report_fields(self, client):
        scenario = small_scenario()
        area, records = survey_payload(scenario)
        sid = create_session(client, area)
        client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records})
        r = client.post(
            f"/api/v1/sessions/{sid}/train",
            json={"spacing": 1.0, "hyper_policy": "fixed", "min_presence": 0.2},
        )
        report = r.json()
        assert report["status"] == "trained"
        assert report["hyper_policy"] == "fixed"
        assert report["spacing"] == 1.0
        assert report["sample_count"] == len(records)
        assert "wall_clock_s" in report
        assert all("hyperparams" in s for s in report["surfaces"])

    def test_train_empty_session_fails(self, client):
        sid = create_session(client, SurveyArea(6.0, 6.0))
        r = client.post(f"/api/v1/sessions/{sid}/train", json={})
        assert r.status_code == 500
        assert "EmptyInput" in r.json()["detail"]
        info = client.get(f"/api/v1/sessions/{sid}").json()
        assert info["state"] == "Failed"

    def test_failed_session_can_retry(self, client):
        scenario = small_scenario()
        area, records = survey_payload(scenario)
        sid = create_session(client, area)
        r = client.post(f"/api/v1/sessions/{sid}/train", json={})
        assert r.status_code == 500  # no samples yet -> Failed
        # Failed -> Collecting is not a legal transition; ingestion stays closed
        r = client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records})
        assert r.status_code == 409

    def test_train_twice_409(self, client):
        sid, _ = trained_session(client)
        r = client.post(f"/api/v1/sessions/{sid}/train", json={})
        assert r.status_code == 409

    def test_retraining_identical_data_byte_identical(self, client):
        scenario = small_scenario(seed=7)
        area, records = survey_payload(scenario)
        blobs = []
        for _ in range(2):
            sid = create_session(client, area)
            client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records})
            r = client.post(f"/api/v1/sessions/{sid}/train", json={"spacing": 1.0})
            assert r.status_code == 200
            blobs.append((client.data_dir / sid / "radiomap.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_bad_flags_rejected(self, client):
        sid = create_session(client, SurveyArea(6.0, 6.0))
        assert client.post(
            f"/api/v1/sessions/{sid}/train", json={"spacing": 0}
        ).status_code == 400
        assert client.post(
            f"/api/v1/sessions/{sid}/train", json={"hyper_policy": "magic"}
        ).status_code == 400


class TestLocalization:
    def test_before_training_409(self, client):
        sid = create_session(client, SurveyArea(6.0, 6.0))
        obs = {"t": "2024-01-01T00:00:00Z", "readings": [
            {"bssid": "02:00:00:00:00:00", "band": "2.4", "rssi": -50}]}
        r = client.post(f"/api/v1/sessions/{sid}/localize", json={"observation": obs})
        assert r.status_code == 409
        assert r.json()["error"] == "NotTrained"

    def test_walk_estimates_in_bounds(self, client):
        sid, scenario = trained_session(client)
        walk = simulate_walk(scenario, [(1.0, 1.0), (5.0, 5.0)], speed=1.0, scan_period=2.0)
        for obs, _truth in walk:
            body = {
                "observation": {
                    "t": "2024-01-01T00:00:00Z",
                    "readings": [
                        {"bssid": ap.bssid, "band": ap.band.value, "rssi": r}
                        for ap, r in obs.readings.items()
                    ],
                }
            }
            r = client.post(f"/api/v1/sessions/{sid}/localize", json=body)
            assert r.status_code == 200, r.text
            est = r.json()
            assert 0 <= est["x"] <= 6 and 0 <= est["y"] <= 6
            assert est["matched_ap_count"] >= 3

    def test_insufficient_overlap_400(self, client):
        sid, _ = trained_session(client)
        obs = {"t": "2024-01-01T00:00:00Z", "readings": [
            {"bssid": "ff:ff:ff:ff:ff:01", "band": "5", "rssi": -50}]}
        r = client.post(f"/api/v1/sessions/{sid}/localize", json={"observation": obs})
        assert r.status_code == 400
        assert r.json()["error"] == "InsufficientOverlap"

    def test_concurrent_localize_identical(self, client):
        sid, scenario = trained_session(client)
        (obs, _), = simulate_walk(scenario, [(2.0, 2.0), (2.0, 2.5)], 1.0, 10.0)[:1]
        body = {
            "observation": {
                "t": "2024-01-01T00:00:00Z",
                "readings": [
                    {"bssid": ap.bssid, "band": ap.band.value, "rssi": r}
                    for ap, r in obs.readings.items()
                ],
            }
        }
        with ThreadPoolExecutor(8) as pool:
            results = list(
                pool.map(
                    lambda _: client.post(
                        f"/api/v1/sessions/{sid}/localize", json=body
                    ).json(),
                    range(24),
                )
            )
        assert all(r == results[0] for r in results)

    def test_eval_summary_matches_records(self, client):
        sid, scenario = trained_session(client)
        walk = simulate_walk(scenario, [(1.0, 1.0), (5.0, 1.0)], 1.0, 1.0)
        entries = [
            {
                "observation": {
                    "t": "2024-01-01T00:00:00Z",
                    "readings": [
                        {"bssid": ap.bssid, "band": ap.band.value, "rssi": r}
                        for ap, r in obs.readings.items()
                    ],
                },
                "truth": {"x": pos[0], "y": pos[1]},
            }
            for obs, pos in walk
        ]
        r = client.post(
            f"/api/v1/sessions/{sid}/eval", json={"observations_with_truth": entries}
        )
        assert r.status_code == 200
        doc = r.json()
        errors = [rec["error_m"] for rec in doc["records"]]
        assert doc["summary"]["n"] == len(errors)
        assert doc["summary"]["mean_error_m"] == pytest.approx(sum(errors) / len(errors))


class TestCrashRecovery:
    def test_sample_count_recomputed(self, tmp_path):
        data_dir = tmp_path / "data"
        app = create_app(data_dir)
        with TestClient(app) as client:
            scenario = small_scenario()
            area, records = survey_payload(scenario, scans=1)
            r = client.post("/api/v1/sessions", json={"area": area.to_json()})
            sid = r.json()["session_id"]
            client.post(f"/api/v1/sessions/{sid}/samples", json={"samples": records[:7]})

        store = SessionStore(data_dir)  # fresh process
        assert store.get(sid).sample_count == 7

    def test_crashed_training_marked_failed(self, tmp_path):
        data_dir = tmp_path / "data"
        app = create_app(data_dir)
        with TestClient(app) as client:
            r = client.post(
                "/api/v1/sessions", json={"area": SurveyArea(6.0, 6.0).to_json()}
            )
            sid = r.json()["session_id"]
        meta_path = data_dir / sid / "session.json"
        meta = json.loads(meta_path.read_text())
        meta["state"] = "Training"
        meta_path.write_text(json.dumps(meta))
        store = SessionStore(data_dir)
        from ips.service import SessionState

        assert store.get(sid).state == SessionState.FAILED


@pytest.fixture()
def live_server(tmp_path):
    app = create_app(tmp_path / "data")
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def sse_events(base, sid, collected, stop, ready):
    with httpx.stream("GET", f"{base}/api/v1/sessions/{sid}/stream", timeout=10.0) as r:
        ready.set()
        for line in r.iter_lines():
            if stop.is_set():
                return
            if line.startswith("data: "):
                collected.append(json.loads(line[len("data: "):]))
                if len(collected) >= stop.target:  # type: ignore[attr-defined]
                    return


class TestStream:
    def test_stream_requires_trained(self, live_server):
        r = httpx.post(
            f"{live_server}/api/v1/sessions",
            json={"area": SurveyArea(6.0, 6.0).to_json()},
        )
        sid = r.json()["session_id"]
        r = httpx.get(f"{live_server}/api/v1/sessions/{sid}/stream")
        assert r.status_code == 409

    def test_events_delivered_in_order_to_all_subscribers(self, live_server):
        scenario = small_scenario()
        area, records = survey_payload(scenario)
        sid = httpx.post(
            f"{live_server}/api/v1/sessions", json={"area": area.to_json()}
        ).json()["session_id"]
        httpx.post(
            f"{live_server}/api/v1/sessions/{sid}/samples",
            json={"samples": records},
            timeout=30.0,
        )
        r = httpx.post(
            f"{live_server}/api/v1/sessions/{sid}/train", json={}, timeout=60.0
        )
        assert r.status_code == 200

        walk = simulate_walk(scenario, [(1.0, 1.0), (5.0, 5.0)], 1.0, 2.0)
        bodies = [
            {
                "observation": {
                    "t": "2024-01-01T00:00:00Z",
                    "readings": [
                        {"bssid": ap.bssid, "band": ap.band.value, "rssi": rssi}
                        for ap, rssi in obs.readings.items()
                    ],
                }
            }
            for obs, _ in walk
        ]

        collected_a, collected_b = [], []
        stop = threading.Event()
        stop.target = len(bodies)
        ready_a, ready_b = threading.Event(), threading.Event()
        ta = threading.Thread(
            target=sse_events, args=(live_server, sid, collected_a, stop, ready_a), daemon=True
        )
        tb = threading.Thread(
            target=sse_events, args=(live_server, sid, collected_b, stop, ready_b), daemon=True
        )
        ta.start()
        tb.start()
        assert ready_a.wait(5) and ready_b.wait(5)
        time.sleep(0.2)  # let subscriptions register server-side

        expected = []
        for body in bodies:
            r = httpx.post(
                f"{live_server}/api/v1/sessions/{sid}/localize", json=body, timeout=10.0
            )
            assert r.status_code == 200
            expected.append(r.json())

        deadline = time.time() + 10
        while (
            len(collected_a) < len(bodies) or len(collected_b) < len(bodies)
        ) and time.time() < deadline:
            time.sleep(0.05)
        stop.set()

        assert [e["payload"] for e in collected_a] == expected
        assert [e["payload"] for e in collected_b] == expected
        assert all(e["type"] == "estimate" for e in collected_a)
