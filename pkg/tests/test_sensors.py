import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigsim import nmea
from rigsim.sensors import (
    EVENT_CAMERA,
    IMU,
    LIDAR,
    TRIGGERED_CAMERA,
    ULTRASOUND,
    ChannelMismatchError,
    KindMismatchError,
    SensorConfigError,
    SensorModel,
    fire_triggered_camera,
    free_run,
    payload_digest,
    perceive_ext_trigger,
    quantize_us,
    discipline_lidar,
)
from rigsim.timebase import ClockState
from rigsim.trigger import TriggerEvent


def camera(**kwargs):
    defaults = dict(sensor_id="cam", kind=TRIGGERED_CAMERA, trigger_channel=0)
    defaults.update(kwargs)
    return SensorModel(**defaults)


def edge(time_ns, seq, channel=0, kind="rising"):
    return TriggerEvent(channel_id=channel, time_ns=time_ns, edge=kind,
                        sequence_index=seq)


class TestSensorModel:
    def test_triggered_kinds_need_channel(self):
        for kind in (TRIGGERED_CAMERA, EVENT_CAMERA, ULTRASOUND):
            with pytest.raises(SensorConfigError):
                SensorModel(sensor_id="x", kind=kind)

    def test_unknown_kind(self):
        with pytest.raises(SensorConfigError):
            SensorModel(sensor_id="x", kind="sonar")

    def test_connection_class(self):
        assert SensorModel(sensor_id="l", kind=LIDAR).connection_class == "ethernet"
        assert camera().connection_class == "usb"
        assert SensorModel(sensor_id="i", kind=IMU).connection_class == "usb"


class TestFireTriggeredCamera:
    def test_stamp_uses_device_clock(self):
        cam = camera(clock=ClockState(true_epoch_offset=0.25))
        rec = fire_triggered_camera(cam, edge(1_000_000_000, 0), rng_seed=1)
        assert rec.device_timestamp == pytest.approx(1.25)
        assert rec.sequence_index == 0
        assert cam.emitted_count == 1

    def test_wrong_channel_rejected(self):
        with pytest.raises(ChannelMismatchError):
            fire_triggered_camera(camera(), edge(0, 0, channel=3), rng_seed=1)

    def test_drop_rate_statistics(self):
        cam = camera(drop_probability=0.2)
        drops = 0
        for k in range(2000):
            if fire_triggered_camera(cam, edge(k * 10_000_000, k), rng_seed=7) is None:
                drops += 1
        assert 0.15 < drops / 2000 < 0.25

    def test_never_drops_at_zero_probability(self):
        cam = camera()
        for k in range(500):
            assert fire_triggered_camera(cam, edge(k, k), rng_seed=9) is not None

    def test_drop_pattern_independent_of_delivery_order(self):
        def run(order):
            cam = camera(drop_probability=0.5)
            dropped = set()
            for k in order:
                if fire_triggered_camera(cam, edge(k * 1000, k), rng_seed=3) is None:
                    dropped.add(k)
            return dropped

        assert run(range(100)) == run(reversed(range(100)))

    def test_digest_is_stable(self):
        assert payload_digest("cam", 5, 123) == payload_digest("cam", 5, 123)
        assert payload_digest("cam", 5, 123) != payload_digest("cam", 6, 123)


class TestQuantizeUs:
    def test_exact_microsecond(self):
        assert quantize_us(1.000001) == 1_000_001

    def test_ties_to_even(self):
        assert quantize_us(12.5e-6 / 12.5 * 12.5) == 12  # 12.5 us -> 12
        assert quantize_us(11.5e-6) == 12
        assert quantize_us(12.5e-6) == 12
        assert quantize_us(13.5e-6) == 14

    def test_tie_on_large_stamp(self):
        # 1.0000005 s is exactly half a microsecond past an even count
        assert quantize_us(1.0000005) == 1_000_000
        assert quantize_us(1.0000015) == 1_000_002

    def test_plain_rounding(self):
        assert quantize_us(0.9999996) == 1_000_000
        assert quantize_us(0.9999994) == 999_999

    @given(st.integers(min_value=0, max_value=10**9))
    def test_quantization_error_within_half_us(self, ns):
        t = ns / 1e9
        q = quantize_us(t)
        assert abs(q * 1000 - ns) <= 500


class TestEventCamera:
    def test_quantized_stream_entry(self):
        evc = SensorModel(sensor_id="evc", kind=EVENT_CAMERA, trigger_channel=1,
                          clock=ClockState(true_epoch_offset=0.125))
        out = perceive_ext_trigger(evc, edge(2_000_000_300, 4, channel=1))
        assert out.device_timestamp_us == 2_125_000
        assert out.edge == "rising"

    def test_kind_guard(self):
        with pytest.raises(KindMismatchError):
            perceive_ext_trigger(camera(), edge(0, 0))

    def test_channel_guard(self):
        evc = SensorModel(sensor_id="evc", kind=EVENT_CAMERA, trigger_channel=1)
        with pytest.raises(ChannelMismatchError):
            perceive_ext_trigger(evc, edge(0, 0, channel=0))


class TestDisciplineLidar:
    def sentence_for(self, second):
        cfg = nmea.LidarChannelConfig(baud_rate=9600)
        pulse, sentence, _, _ = nmea.emit_time_message(cfg, second)
        return pulse, sentence

    def test_step_sets_clock_to_marked_second(self):
        lidar = SensorModel(sensor_id="l", kind=LIDAR,
                            clock=ClockState(true_epoch_offset=0.3, drift_ppm=20.0))
        pulse, sentence = self.sentence_for(100)
        clock = discipline_lidar(lidar, pulse, sentence)
        assert clock.device_time(100.0) == pytest.approx(100.0, abs=1e-9)
        assert lidar.fault_count == 0

    def test_bad_sentence_holds_over(self):
        lidar = SensorModel(sensor_id="l", kind=LIDAR,
                            clock=ClockState(true_epoch_offset=0.3))
        pulse, sentence = self.sentence_for(100)
        before = lidar.clock
        clock = discipline_lidar(lidar, pulse, sentence.replace("*", "x*", 1))
        assert clock == before
        assert lidar.fault_count == 1

    def test_second_mismatch_holds_over(self):
        lidar = SensorModel(sensor_id="l", kind=LIDAR)
        pulse, _ = self.sentence_for(100)
        _, other_sentence = self.sentence_for(101)
        before = lidar.clock
        assert discipline_lidar(lidar, pulse, other_sentence) == before
        assert lidar.fault_count == 1

    def test_kind_guard(self):
        pulse, sentence = self.sentence_for(100)
        with pytest.raises(KindMismatchError):
            discipline_lidar(camera(), pulse, sentence)


class TestFreeRun:
    def test_perfect_clock_tick_count(self):
        imu = SensorModel(sensor_id="imu", kind=IMU)
        records = free_run(imu, 400.0, 0.0, 5.0)
        assert len(records) == 2000
        assert records[0].device_timestamp == 0.0
        assert records[1].device_timestamp == pytest.approx(1 / 400.0)

    def test_fast_clock_emits_extra_ticks(self):
        # +1000 ppm over 100 s pushes ~0.1 s of extra device time into the
        # window: 100.1 s of device time at 10 Hz -> 1001 ticks.
        imu = SensorModel(sensor_id="imu", kind=IMU,
                          clock=ClockState(drift_ppm=1000.0))
        records = free_run(imu, 10.0, 0.0, 100.0)
        assert len(records) == 1001

    def test_slow_clock_emits_fewer_ticks(self):
        imu = SensorModel(sensor_id="imu", kind=IMU,
                          clock=ClockState(drift_ppm=-1000.0))
        records = free_run(imu, 10.0, 0.0, 100.0)
        assert len(records) == 999

    def test_windows_partition_cleanly(self):
        whole = SensorModel(sensor_id="a", kind=IMU,
                            clock=ClockState(true_epoch_offset=0.007, drift_ppm=35.0))
        split = SensorModel(sensor_id="a", kind=IMU,
                            clock=ClockState(true_epoch_offset=0.007, drift_ppm=35.0))
        full = free_run(whole, 100.0, 0.0, 10.0)
        parts = []
        for i in range(10):
            parts.extend(free_run(split, 100.0, float(i), float(i + 1)))
        assert [r.device_timestamp for r in parts] == [
            r.device_timestamp for r in full
        ]

    def test_rate_guard(self):
        with pytest.raises(ValueError):
            free_run(SensorModel(sensor_id="a", kind=IMU), 0.0, 0.0, 1.0)

    @settings(max_examples=100, deadline=None)
    @given(
        offset=st.floats(min_value=-0.4, max_value=0.4,
                         allow_nan=False, allow_infinity=False),
        drift=st.floats(min_value=-1000.0, max_value=1000.0,
                        allow_nan=False, allow_infinity=False),
        rate=st.floats(min_value=1.0, max_value=500.0,
                       allow_nan=False, allow_infinity=False),
    )
    def test_tick_count_matches_device_time_span(self, offset, drift, rate):
        model = SensorModel(
            sensor_id="x", kind=IMU,
            clock=ClockState(true_epoch_offset=offset, drift_ppm=drift),
        )
        t0, t1 = 10.0, 20.0
        records = free_run(model, rate, t0, t1)
        d0 = model.clock.device_time(t0)
        d1 = model.clock.device_time(t1)
        expected = math.floor(d1 * rate) - math.ceil(d0 * rate)
        assert abs(len(records) - (expected + 1)) <= 1
        # stamps strictly increasing on the device clock
        stamps = [r.device_timestamp for r in records]
        assert stamps == sorted(stamps)
        assert len(set(stamps)) == len(stamps)
