"""NMEA 0183 GPRMC codec and the GPRMC+PPS time-distribution channel.

The LiDAR synchronization channel emits one PPS pulse at every second
boundary of the master clock, followed on a serial line by a GPRMC
sentence naming that second. ``encode_gprmc``/``decode_gprmc`` are exact
inverses on valid field sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_SENTENCE_LEN = 82  # includes "$" and CRLF
BITS_PER_BYTE_8N1 = 10  # start bit + 8 data bits + stop bit


class NmeaError(ValueError):
    """Base class for GPRMC codec failures."""


class FieldRangeError(NmeaError):
    """A field violates its admissible range."""


class ChecksumMismatchError(NmeaError):
    """Sentence checksum does not match its payload."""


class WrongSentenceTypeError(NmeaError):
    """Sentence is not a GPRMC sentence."""


class MalformedSentenceError(NmeaError):
    """Sentence structure or a field cannot be parsed."""


class SentenceOverrunError(NmeaError):
    """Sentence transmission does not fit before the next PPS pulse."""


@dataclass(frozen=True)
class GprmcFields:
    """Decoded content of a GPRMC sentence.

    Angles use the NMEA degrees + decimal-minutes split. Seconds, minutes
    and decimal values are quantized to what the wire format carries
    (milliseconds, 0.001 arc-minutes, 0.1 knots/degrees).
    """

    utc_hours: int
    utc_minutes: int
    utc_seconds: float
    status: str  # A = valid, V = warning
    lat_degrees: int
    lat_minutes: float
    lat_hemisphere: str  # N or S
    lon_degrees: int
    lon_minutes: float
    lon_hemisphere: str  # E or W
    speed_knots: float
    course_deg: float
    date_day: int
    date_month: int
    date_year: int  # two digits
    magvar_deg: float | None = None
    magvar_direction: str | None = None  # E or W

    def validate(self) -> None:
        if not (0 <= self.utc_hours < 24 and 0 <= self.utc_minutes < 60):
            raise FieldRangeError("UTC hours/minutes out of range")
        if not 0.0 <= self.utc_seconds < 60.0:
            raise FieldRangeError("UTC seconds out of range")
        if self.status not in ("A", "V"):
            raise FieldRangeError(f"bad status {self.status!r}")
        if self.lat_hemisphere not in ("N", "S"):
            raise FieldRangeError(f"bad latitude hemisphere {self.lat_hemisphere!r}")
        if self.lon_hemisphere not in ("E", "W"):
            raise FieldRangeError(f"bad longitude hemisphere {self.lon_hemisphere!r}")
        if not (0.0 <= self.lat_minutes < 60.0 and 0.0 <= self.lon_minutes < 60.0):
            raise FieldRangeError("arc-minutes must be in [0, 60)")
        if not (0 <= self.lat_degrees and self.lat_degrees + self.lat_minutes / 60.0 <= 90.0):
            raise FieldRangeError("latitude exceeds 90 degrees")
        if not (0 <= self.lon_degrees and self.lon_degrees + self.lon_minutes / 60.0 <= 180.0):
            raise FieldRangeError("longitude exceeds 180 degrees")
        if self.speed_knots < 0.0:
            raise FieldRangeError("speed must be >= 0")
        if not 0.0 <= self.course_deg < 360.0:
            raise FieldRangeError("course must be in [0, 360)")
        if not (1 <= self.date_day <= 31 and 1 <= self.date_month <= 12):
            raise FieldRangeError("bad date")
        if not 0 <= self.date_year <= 99:
            raise FieldRangeError("year must be two digits")
        if (self.magvar_deg is None) != (self.magvar_direction is None):
            raise FieldRangeError("magnetic variation value and direction go together")
        if self.magvar_direction is not None and self.magvar_direction not in ("E", "W"):
            raise FieldRangeError(f"bad magvar direction {self.magvar_direction!r}")

    def utc_second_of_day(self) -> int:
        return self.utc_hours * 3600 + self.utc_minutes * 60 + int(self.utc_seconds)


@dataclass(frozen=True)
class PpsPulse:
    """One pulse marking the exact beginning of a UTC second."""

    true_emit_time: float
    marks_second: int

    def __post_init__(self) -> None:
        if self.true_emit_time != math.floor(self.true_emit_time):
            raise FieldRangeError("PPS must sit exactly on a second boundary")


@dataclass(frozen=True)
class LidarChannelConfig:
    """Serial parameters of the GPRMC+PPS channel."""

    baud_rate: int = 9600
    inverted_level: bool = False  # metadata only; logical bits are simulated
    sentence_offset_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.baud_rate <= 0:
            raise FieldRangeError("baud_rate must be > 0")
        if not 0.0 <= self.sentence_offset_ms < 1000.0:
            raise FieldRangeError("sentence_offset_ms must be in [0, 1000)")


def checksum(payload: str | bytes) -> str:
    """XOR of the bytes between '$' and '*', as two uppercase hex digits."""
    if isinstance(payload, str):
        payload = payload.encode("ascii")
    acc = 0
    for b in payload:
        acc ^= b
    return f"{acc:02X}"


def _fmt_seconds(value: float) -> str:
    if value == int(value):
        return f"{int(value):02d}"
    return f"{value:06.3f}"


def encode_gprmc(f: GprmcFields) -> str:
    """Render fields as a full sentence, '$GPRMC,...*hh\\r\\n'."""
    f.validate()
    if f.magvar_deg is None:
        magvar = ""
        magvar_dir = ""
    else:
        magvar = f"{f.magvar_deg:05.1f}"
        magvar_dir = f.magvar_direction
    payload = ",".join(
        [
            "GPRMC",
            f"{f.utc_hours:02d}{f.utc_minutes:02d}{_fmt_seconds(f.utc_seconds)}",
            f.status,
            f"{f.lat_degrees:02d}{f.lat_minutes:06.3f}",
            f.lat_hemisphere,
            f"{f.lon_degrees:03d}{f.lon_minutes:06.3f}",
            f.lon_hemisphere,
            f"{f.speed_knots:05.1f}",
            f"{f.course_deg:05.1f}",
            f"{f.date_day:02d}{f.date_month:02d}{f.date_year:02d}",
            magvar,
            magvar_dir,
        ]
    )
    sentence = f"${payload}*{checksum(payload)}\r\n"
    if len(sentence) > MAX_SENTENCE_LEN:
        raise FieldRangeError(f"sentence exceeds {MAX_SENTENCE_LEN} characters")
    return sentence


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise MalformedSentenceError(f"bad {what} field {text!r}") from None


def _parse_angle(text: str, degree_digits: int, what: str) -> tuple[int, float]:
    if len(text) < degree_digits + 2 or "." in text[:degree_digits]:
        raise MalformedSentenceError(f"bad {what} field {text!r}")
    try:
        degrees = int(text[:degree_digits])
    except ValueError:
        raise MalformedSentenceError(f"bad {what} field {text!r}") from None
    minutes = _parse_float(text[degree_digits:], what)
    return degrees, minutes


def decode_gprmc(sentence: str) -> GprmcFields:
    """Parse and checksum-verify a GPRMC sentence."""
    body = sentence.rstrip("\r\n")
    if not body.startswith("$") or "*" not in body:
        raise MalformedSentenceError("sentence must look like '$...*hh'")
    payload, _, claimed = body[1:].rpartition("*")
    if len(claimed) != 2:
        raise MalformedSentenceError(f"bad checksum field {claimed!r}")
    actual = checksum(payload)
    if claimed.upper() != actual:
        raise ChecksumMismatchError(f"checksum {claimed!r} != computed {actual!r}")
    fields = payload.split(",")
    if fields[0] != "GPRMC":
        raise WrongSentenceTypeError(f"expected GPRMC, got {fields[0]!r}")
    if len(fields) != 12:
        raise MalformedSentenceError(f"expected 11 data fields, got {len(fields) - 1}")
    utc = fields[1]
    if len(utc) < 6:
        raise MalformedSentenceError(f"bad UTC field {utc!r}")
    try:
        hours, minutes = int(utc[0:2]), int(utc[2:4])
    except ValueError:
        raise MalformedSentenceError(f"bad UTC field {utc!r}") from None
    seconds = _parse_float(utc[4:], "UTC seconds")
    lat_deg, lat_min = _parse_angle(fields[3], 2, "latitude")
    lon_deg, lon_min = _parse_angle(fields[5], 3, "longitude")
    date = fields[9]
    if len(date) != 6 or not date.isdigit():
        raise MalformedSentenceError(f"bad date field {date!r}")
    magvar = fields[10]
    magvar_dir = fields[11]
    if (magvar == "") != (magvar_dir == ""):
        raise MalformedSentenceError("magnetic variation value/direction mismatch")
    result = GprmcFields(
        utc_hours=hours,
        utc_minutes=minutes,
        utc_seconds=seconds,
        status=fields[2],
        lat_degrees=lat_deg,
        lat_minutes=lat_min,
        lat_hemisphere=fields[4],
        lon_degrees=lon_deg,
        lon_minutes=lon_min,
        lon_hemisphere=fields[6],
        speed_knots=_parse_float(fields[7], "speed"),
        course_deg=_parse_float(fields[8], "course"),
        date_day=int(date[0:2]),
        date_month=int(date[2:4]),
        date_year=int(date[4:6]),
        magvar_deg=None if magvar == "" else _parse_float(magvar, "magvar"),
        magvar_direction=None if magvar_dir == "" else magvar_dir,
    )
    try:
        result.validate()
    except FieldRangeError as exc:
        raise MalformedSentenceError(str(exc)) from None
    return result


# Fixed position/date constants used by the simulated channel; LiDAR time
# discipline only consumes the timestamp.
DEFAULT_TEMPLATE = GprmcFields(
    utc_hours=0,
    utc_minutes=0,
    utc_seconds=0.0,
    status="A",
    lat_degrees=31,
    lat_minutes=10.800,
    lat_hemisphere="N",
    lon_degrees=121,
    lon_minutes=35.640,
    lon_hemisphere="E",
    speed_knots=0.0,
    course_deg=0.0,
    date_day=1,
    date_month=1,
    date_year=24,
)


def sentence_for_second(
    master_second: int, template: GprmcFields = DEFAULT_TEMPLATE
) -> str:
    """GPRMC sentence whose UTC time names ``master_second`` (mod one day)."""
    second_of_day = master_second % 86400
    fields = GprmcFields(
        utc_hours=second_of_day // 3600,
        utc_minutes=(second_of_day % 3600) // 60,
        utc_seconds=float(second_of_day % 60),
        status=template.status,
        lat_degrees=template.lat_degrees,
        lat_minutes=template.lat_minutes,
        lat_hemisphere=template.lat_hemisphere,
        lon_degrees=template.lon_degrees,
        lon_minutes=template.lon_minutes,
        lon_hemisphere=template.lon_hemisphere,
        speed_knots=template.speed_knots,
        course_deg=template.course_deg,
        date_day=template.date_day,
        date_month=template.date_month,
        date_year=template.date_year,
        magvar_deg=template.magvar_deg,
        magvar_direction=template.magvar_direction,
    )
    return encode_gprmc(fields)


def transmit_duration(sentence: str, baud_rate: int) -> float:
    """Serial transmission time at 8N1 framing (10 bits per byte)."""
    return BITS_PER_BYTE_8N1 * len(sentence) / baud_rate


def emit_time_message(
    config: LidarChannelConfig,
    master_second: int,
    template: GprmcFields = DEFAULT_TEMPLATE,
) -> tuple[PpsPulse, str, float, float]:
    """One PPS pulse plus its sentence for a given master-clock second.

    Returns (pulse, sentence, transmit_start, transmit_duration). Raises
    SentenceOverrunError when the transmission would collide with the next
    pulse.
    """
    if master_second < 0:
        raise FieldRangeError("master_second must be >= 0")
    pulse = PpsPulse(true_emit_time=float(master_second), marks_second=master_second)
    sentence = sentence_for_second(master_second, template)
    start_offset = config.sentence_offset_ms / 1000.0
    duration = transmit_duration(sentence, config.baud_rate)
    if start_offset + duration >= 1.0:
        raise SentenceOverrunError(
            f"sentence needs {start_offset + duration:.3f} s, must finish within 1 s"
        )
    return pulse, sentence, master_second + start_offset, duration
