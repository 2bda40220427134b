import random

import pytest

from rigsim import nmea
from rigsim.nmea import (
    ChecksumMismatchError,
    FieldRangeError,
    GprmcFields,
    LidarChannelConfig,
    MalformedSentenceError,
    PpsPulse,
    SentenceOverrunError,
    WrongSentenceTypeError,
    checksum,
    decode_gprmc,
    encode_gprmc,
    emit_time_message,
)

CANONICAL_FIELDS = GprmcFields(
    utc_hours=12, utc_minutes=35, utc_seconds=19.0, status="A",
    lat_degrees=48, lat_minutes=7.038, lat_hemisphere="N",
    lon_degrees=11, lon_minutes=31.0, lon_hemisphere="E",
    speed_knots=22.4, course_deg=84.4,
    date_day=23, date_month=3, date_year=94,
    magvar_deg=3.1, magvar_direction="W",
)
CANONICAL_SENTENCE = (
    "$GPRMC,123519,A,4807.038,N,01131.000,E,022.4,084.4,230394,003.1,W*6A\r\n"
)


class TestChecksum:
    def test_empty(self):
        assert checksum("") == "00"

    def test_single_byte(self):
        assert checksum("A") == "41"

    def test_canonical_payload(self):
        payload = "GPRMC,123519,A,4807.038,N,01131.000,E,022.4,084.4,230394,003.1,W"
        assert checksum(payload) == "6A"

    def test_single_byte_flip_changes_checksum(self):
        payload = b"GPRMC,123519,A,4807.038,N"
        base = checksum(payload)
        for i in range(len(payload)):
            flipped = bytearray(payload)
            flipped[i] ^= 0x01
            assert checksum(bytes(flipped)) != base


class TestEncode:
    def test_canonical(self):
        assert encode_gprmc(CANONICAL_FIELDS) == CANONICAL_SENTENCE

    def test_sentence_length_cap(self):
        assert len(CANONICAL_SENTENCE) <= nmea.MAX_SENTENCE_LEN

    def test_minutes_out_of_range(self):
        bad = GprmcFields(
            utc_hours=0, utc_minutes=0, utc_seconds=0.0, status="A",
            lat_degrees=10, lat_minutes=61.0, lat_hemisphere="N",
            lon_degrees=0, lon_minutes=0.0, lon_hemisphere="E",
            speed_knots=0.0, course_deg=0.0,
            date_day=1, date_month=1, date_year=0,
        )
        with pytest.raises(FieldRangeError):
            encode_gprmc(bad)

    def test_optional_magvar_empty(self):
        fields = GprmcFields(
            utc_hours=1, utc_minutes=2, utc_seconds=3.0, status="A",
            lat_degrees=0, lat_minutes=0.0, lat_hemisphere="N",
            lon_degrees=0, lon_minutes=0.0, lon_hemisphere="E",
            speed_knots=0.0, course_deg=0.0,
            date_day=1, date_month=1, date_year=0,
        )
        sentence = encode_gprmc(fields)
        assert ",,*" in sentence
        assert decode_gprmc(sentence) == fields


class TestDecode:
    def test_canonical(self):
        assert decode_gprmc(CANONICAL_SENTENCE) == CANONICAL_FIELDS

    def test_bad_checksum(self):
        corrupted = CANONICAL_SENTENCE.replace("*6A", "*6B")
        with pytest.raises(ChecksumMismatchError):
            decode_gprmc(corrupted)

    def test_wrong_sentence_type(self):
        payload = "GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,"
        sentence = f"${payload}*{checksum(payload)}\r\n"
        with pytest.raises(WrongSentenceTypeError):
            decode_gprmc(sentence)

    def test_malformed_field(self):
        payload = "GPRMC,12xx19,A,4807.038,N,01131.000,E,022.4,084.4,230394,003.1,W"
        sentence = f"${payload}*{checksum(payload)}\r\n"
        with pytest.raises(MalformedSentenceError):
            decode_gprmc(sentence)

    def test_not_a_sentence(self):
        with pytest.raises(MalformedSentenceError):
            decode_gprmc("GPRMC no dollar no star")


def random_fields(rng: random.Random) -> GprmcFields:
    lat_deg = rng.randint(0, 89)
    lon_deg = rng.randint(0, 179)
    has_magvar = rng.random() < 0.5
    return GprmcFields(
        utc_hours=rng.randint(0, 23),
        utc_minutes=rng.randint(0, 59),
        utc_seconds=round(rng.uniform(0, 59.999), 3),
        status=rng.choice("AV"),
        lat_degrees=lat_deg,
        lat_minutes=round(rng.uniform(0, 59.999), 3),
        lat_hemisphere=rng.choice("NS"),
        lon_degrees=lon_deg,
        lon_minutes=round(rng.uniform(0, 59.999), 3),
        lon_hemisphere=rng.choice("EW"),
        speed_knots=round(rng.uniform(0, 999.9), 1),
        course_deg=round(rng.uniform(0, 359.9), 1),
        date_day=rng.randint(1, 28),
        date_month=rng.randint(1, 12),
        date_year=rng.randint(0, 99),
        magvar_deg=round(rng.uniform(0, 99.9), 1) if has_magvar else None,
        magvar_direction=rng.choice("EW") if has_magvar else None,
    )


def test_round_trip_fuzz_1000():
    rng = random.Random(20240817)
    for _ in range(1000):
        fields = random_fields(rng)
        sentence = encode_gprmc(fields)
        assert decode_gprmc(sentence) == fields
        # encode(decode(s)) is also the identity on canonical sentences
        assert encode_gprmc(decode_gprmc(sentence)) == sentence


class TestPps:
    def test_pulse_on_second_boundary(self):
        PpsPulse(true_emit_time=100.0, marks_second=100)
        with pytest.raises(FieldRangeError):
            PpsPulse(true_emit_time=100.5, marks_second=100)

    def test_pulses_exactly_one_second_apart(self):
        config = LidarChannelConfig(baud_rate=9600)
        pulses = [emit_time_message(config, s)[0] for s in range(100, 110)]
        gaps = {b.true_emit_time - a.true_emit_time for a, b in zip(pulses, pulses[1:])}
        assert gaps == {1.0}


class TestEmitTimeMessage:
    def test_duration_at_9600_baud(self):
        config = LidarChannelConfig(baud_rate=9600)
        _, sentence, _, duration = emit_time_message(config, 100)
        assert duration == pytest.approx(10 * len(sentence) / 9600)

    def test_72_byte_sentence_duration(self):
        # 720 bits at 9600 baud
        assert nmea.transmit_duration("x" * 72, 9600) == pytest.approx(0.075)

    def test_sentence_names_the_marked_second(self):
        config = LidarChannelConfig(baud_rate=9600)
        pulse, sentence, _, _ = emit_time_message(config, 100)
        assert pulse.marks_second == 100
        fields = decode_gprmc(sentence)
        assert fields.utc_second_of_day() == 100

    def test_overrun_at_110_baud(self):
        # ~0.72 s/72 bytes at 110 baud exceeds the second: 720/110 = 6.55 s
        config = LidarChannelConfig(baud_rate=110, sentence_offset_ms=0.0)
        with pytest.raises(SentenceOverrunError):
            emit_time_message(config, 5)

    def test_channel_config_bounds(self):
        with pytest.raises(FieldRangeError):
            LidarChannelConfig(baud_rate=0)
        with pytest.raises(FieldRangeError):
            LidarChannelConfig(sentence_offset_ms=1000.0)
