"""Domain model: validation, BSSID canonicalization, JSONL round-trips."""

import io
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ips.errors import (
    EmptyReadings,
    InvalidArea,
    MalformedBssid,
    MalformedRecord,
    OutOfBoundsPosition,
    OutOfRangeRssi,
)
from ips.model import (
    AccessPointId,
    Band,
    FingerprintSample,
    Heading,
    ReferencePoint,
    SurveyArea,
    parse_bssid,
    read_jsonl,
    sample_to_record,
    validate_sample,
    write_jsonl,
)

AREA = SurveyArea(14.0, 14.0, (ReferencePoint("rp-07", 3.0, 2.0),))
T0 = datetime(2024, 5, 1, 3, 21, 9, tzinfo=timezone.utc)


def make_sample(rssi=-61, x=3.0, y=2.0, readings=None):
    if readings is None:
        readings = {AccessPointId("aa:bb:cc:dd:ee:ff", Band.GHZ_5, "lab"): rssi}
    return FingerprintSample(
        point_id="rp-07", x=x, y=y, heading=Heading.N,
        timestamp=T0, device_id="dev-1", readings=readings,
    )


class TestValidation:
    def test_valid_sample_accepted(self):
        sample = make_sample()
        assert validate_sample(sample, AREA) is sample

    def test_rssi_above_zero_rejected(self):
        with pytest.raises(OutOfRangeRssi, match="rssi 5"):
            validate_sample(make_sample(rssi=5), AREA)

    def test_rssi_below_floor_rejected(self):
        with pytest.raises(OutOfRangeRssi):
            validate_sample(make_sample(rssi=-101), AREA)

    def test_out_of_bounds_position(self):
        with pytest.raises(OutOfBoundsPosition):
            validate_sample(make_sample(x=20.0), AREA)

    def test_empty_readings(self):
        with pytest.raises(EmptyReadings):
            validate_sample(make_sample(readings={}), AREA)

    def test_boundary_values_accepted(self):
        sample = make_sample(rssi=-100, x=14.0, y=0.0)
        assert validate_sample(sample, AREA) is sample
        sample = make_sample(rssi=0)
        assert validate_sample(sample, AREA) is sample


class TestArea:
    def test_rp_outside_rejected(self):
        with pytest.raises(InvalidArea):
            SurveyArea(5.0, 5.0, (ReferencePoint("a", 6.0, 1.0),))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvalidArea):
            SurveyArea(5.0, 5.0, (ReferencePoint("a", 1, 1), ReferencePoint("a", 2, 2)))

    def test_zero_width_rejected(self):
        with pytest.raises(InvalidArea):
            SurveyArea(0.0, 5.0)

    def test_json_round_trip(self):
        assert SurveyArea.from_json(AREA.to_json()) == AREA


class TestBssid:
    def test_canonical_form(self):
        assert parse_bssid("AA:BB:CC:DD:EE:FF") == "aa:bb:cc:dd:ee:ff"
        assert parse_bssid("aa-bb-cc-dd-ee-ff") == "aa:bb:cc:dd:ee:ff"

    @pytest.mark.parametrize("bad", ["aa:bb:cc:dd:ee", "aabbccddeeff", "gg:bb:cc:dd:ee:ff",
                                     "aa:bb:cc:dd:ee:ff:00", "", "aa:bb-cc:dd:ee:ff"])
    def test_malformed_rejected(self, bad):
        with pytest.raises(MalformedBssid):
            parse_bssid(bad)

    @given(st.lists(st.integers(0, 255), min_size=6, max_size=6), st.booleans())
    def test_round_trip_idempotent_and_case_normalizing(self, octets, upper):
        text = ":".join(f"{o:02x}" for o in octets)
        if upper:
            text = text.upper()
        canonical = parse_bssid(text)
        assert canonical == text.lower()
        assert parse_bssid(canonical) == canonical

    def test_identity_excludes_ssid(self):
        a = AccessPointId("aa:bb:cc:dd:ee:ff", Band.GHZ_5, "one")
        b = AccessPointId("AA:BB:CC:DD:EE:FF", Band.GHZ_5, "two")
        assert a == b and hash(a) == hash(b)
        assert a != AccessPointId("aa:bb:cc:dd:ee:ff", Band.GHZ_2_4, "one")


class TestHeading:
    @pytest.mark.parametrize("deg", [0, 90, 180, 270])
    def test_bijection(self, deg):
        assert Heading.from_degrees(deg).degrees == deg

    def test_labels(self):
        assert Heading.N.degrees == 0
        assert Heading.E.degrees == 90
        assert Heading.S.degrees == 180
        assert Heading.W.degrees == 270


# -- JSONL ---------------------------------------------------------------

bssid_strategy = st.lists(st.integers(0, 255), min_size=6, max_size=6).map(
    lambda octets: ":".join(f"{o:02x}" for o in octets)
)

ap_strategy = st.builds(
    AccessPointId,
    bssid=bssid_strategy,
    band=st.sampled_from(list(Band)),
    ssid=st.one_of(st.none(), st.text(max_size=8)),
)

sample_strategy = st.builds(
    FingerprintSample,
    point_id=st.text(min_size=1, max_size=12),
    x=st.floats(0, 14, allow_nan=False),
    y=st.floats(0, 14, allow_nan=False),
    heading=st.sampled_from(list(Heading)),
    timestamp=st.datetimes(
        min_value=datetime(2020, 1, 1), max_value=datetime(2030, 1, 1)
    ).map(lambda d: d.replace(tzinfo=timezone.utc)),
    device_id=st.text(max_size=8),
    readings=st.dictionaries(ap_strategy, st.integers(-100, 0), min_size=1, max_size=6),
)


class TestJsonl:
    def test_empty_round_trip(self):
        buf = io.BytesIO()
        assert write_jsonl([], buf) == 0
        buf.seek(0)
        assert read_jsonl(buf) == []

    def test_single_sample_round_trip(self):
        readings = {
            AccessPointId("aa:bb:cc:dd:ee:ff", Band.GHZ_5, "lab"): -61,
            AccessPointId("11:22:33:44:55:66", Band.GHZ_2_4): -70,
        }
        sample = make_sample(readings=readings)
        buf = io.BytesIO()
        n = write_jsonl([sample], buf)
        assert n == len(buf.getvalue())
        buf.seek(0)
        (back,) = read_jsonl(buf)
        assert back == sample
        assert list(back.readings) == list(sample.readings)  # order preserved

    def test_wire_format_matches_schema(self):
        sample = make_sample()
        record = sample_to_record(sample)
        assert record == {
            "point_id": "rp-07", "x": 3.0, "y": 2.0, "heading_deg": 0,
            "t": "2024-05-01T03:21:09Z", "device_id": "dev-1",
            "readings": [{"bssid": "aa:bb:cc:dd:ee:ff", "band": "5", "ssid": "lab", "rssi": -61}],
        }

    def test_missing_key_rejected_with_line(self):
        record = sample_to_record(make_sample())
        del record["heading_deg"]
        buf = io.BytesIO(json.dumps(record).encode() + b"\n")
        with pytest.raises(MalformedRecord) as err:
            read_jsonl(buf)
        assert err.value.line == 1
        assert "heading_deg" in str(err.value)

    def test_unknown_key_rejected(self):
        record = sample_to_record(make_sample())
        record["extra"] = 1
        with pytest.raises(MalformedRecord, match="extra"):
            read_jsonl(io.BytesIO(json.dumps(record).encode() + b"\n"))

    def test_float_rssi_rejected(self):
        record = sample_to_record(make_sample())
        record["readings"][0]["rssi"] = -61.5
        with pytest.raises(MalformedRecord, match="integer"):
            read_jsonl(io.BytesIO(json.dumps(record).encode() + b"\n"))

    def test_bad_band_rejected(self):
        record = sample_to_record(make_sample())
        record["readings"][0]["band"] = "6"
        with pytest.raises(MalformedRecord):
            read_jsonl(io.BytesIO(json.dumps(record).encode() + b"\n"))

    def test_invalid_json_line_number(self):
        good = json.dumps(sample_to_record(make_sample())).encode()
        buf = io.BytesIO(good + b"\n{oops\n")
        with pytest.raises(MalformedRecord) as err:
            read_jsonl(buf)
        assert err.value.line == 2

    def test_partial_results_discarded(self):
        good = json.dumps(sample_to_record(make_sample())).encode()
        buf = io.BytesIO(good + b"\nnot json\n")
        with pytest.raises(MalformedRecord):
            read_jsonl(buf)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(sample_strategy, max_size=8))
    def test_round_trip_identity(self, samples):
        buf = io.BytesIO()
        write_jsonl(samples, buf)
        buf.seek(0)
        assert read_jsonl(buf) == samples
