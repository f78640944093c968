"""EDF signal files, seizure manifests and dataset statistics."""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EdfError, ManifestError, MissingChannelError
from .numerics import resample_linear

log = logging.getLogger(__name__)

SEIZURE_TYPES = ("FNSZ", "GNSZ", "CPSZ", "ABSZ", "TNSZ", "TCSZ", "SPSZ")
TYPE_INDEX = {code: i for i, code in enumerate(SEIZURE_TYPES)}
TYPE_NAMES = {
    "FNSZ": "Focal Non-Specific",
    "GNSZ": "Generalized Non-Specific",
    "CPSZ": "Complex Partial",
    "ABSZ": "Absence",
    "TNSZ": "Tonic",
    "TCSZ": "Tonic Clonic",
    "SPSZ": "Simple Partial",
}
EXCLUDED_TYPES = ("MYSZ",)

MANIFEST_COLUMNS = ("patient_id", "session_id", "file_path", "start_s", "stop_s", "type")
DEFAULT_FS = 250.0

# (name, width) of the fixed main header and of each per-signal block
_MAIN_FIELDS = (
    ("version", 8),
    ("patient_id", 80),
    ("recording_id", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
)
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


@dataclass(frozen=True)
class EdfHeader:
    version: str
    patient_id: str
    recording_id: str
    start_date: str
    start_time: str
    header_bytes: int
    reserved: str
    n_records: int
    record_duration: float
    n_signals: int

    @property
    def duration(self):
        return max(self.n_records, 0) * self.record_duration


@dataclass(frozen=True)
class SignalHeader:
    label: str
    transducer: str
    physical_dimension: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    prefilter: str
    samples_per_record: int
    sampling_rate: float

    def to_physical(self, digital):
        """Linear digital -> physical calibration."""
        gain = (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min)
        return self.physical_min + (np.asarray(digital, dtype=np.float64) - self.digital_min) * gain


@dataclass(frozen=True)
class Recording:
    labels: tuple
    fs: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] != len(self.labels):
            raise ValueError("samples must be (channels, time) with one row per label")
        samples.flags.writeable = False
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "samples", samples)

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return self.samples.shape[1] / self.fs


@dataclass(frozen=True)
class SeizureEvent:
    patient_id: str
    session_id: str
    file_path: str
    start: float
    stop: float
    type: str

    @property
    def duration(self):
        return self.stop - self.start

    @property
    def label(self):
        return TYPE_INDEX[self.type]


@dataclass
class Manifest:
    events: list
    version: str = ""
    skipped: dict = field(default_factory=dict)
    base_dir: str = ""

    def __len__(self):
        return len(self.events)

    def resolve(self, event):
        """Absolute-or-relative path of an event's EDF file."""
        path = Path(event.file_path)
        if not path.is_absolute() and self.base_dir:
            path = Path(self.base_dir) / path
        return path


@dataclass(frozen=True)
class TypeStats:
    type: str
    n_seizures: int
    duration_s: float
    n_patients: int


# --------------------------------------------------------------------------
# EDF


def _ascii(raw, what):
    try:
        return raw.decode("ascii").rstrip(" \x00")
    except UnicodeDecodeError as exc:
        raise EdfError(f"non-ASCII bytes in field {what!r}") from exc


def _number(text, what, kind=float):
    try:
        return kind(text.strip())
    except ValueError:
        if kind is int:
            try:
                value = float(text.strip())
            except ValueError:
                pass
            else:
                if value.is_integer():
                    return int(value)
        raise EdfError(f"non-numeric value {text!r} in field {what!r}") from None


def parse_edf_header(raw):
    """Decode the main and per-signal EDF headers from ``raw`` bytes.

    Data records are not touched; ``raw`` only needs to hold the header.
    """
    raw = bytes(raw)
    if len(raw) < 256:
        raise EdfError(f"truncated header: {len(raw)} bytes, need at least 256")
    values = {}
    pos = 0
    for name, width in _MAIN_FIELDS:
        values[name] = _ascii(raw[pos:pos + width], name)
        pos += width
    header_bytes = _number(values["header_bytes"], "header_bytes", int)
    n_records = _number(values["n_records"], "n_records", int)
    duration = _number(values["record_duration"], "record_duration")
    n_signals = _number(values["n_signals"], "n_signals", int)
    if n_signals <= 0:
        raise EdfError(f"signal count must be positive, got {n_signals}")
    if header_bytes != 256 + 256 * n_signals:
        raise EdfError(
            f"header size mismatch: field says {header_bytes}, "
            f"expected {256 + 256 * n_signals} for {n_signals} signals"
        )
    if n_records < -1:
        raise EdfError(f"invalid record count {n_records}")
    if not duration > 0:
        raise EdfError(f"record duration must be positive, got {duration}")
    if values["reserved"].startswith("EDF+D"):
        raise EdfError("discontinuous EDF+D files are not supported")
    if len(raw) < header_bytes:
        raise EdfError(f"truncated header: {len(raw)} bytes, need {header_bytes}")

    header = EdfHeader(
        version=values["version"],
        patient_id=values["patient_id"],
        recording_id=values["recording_id"],
        start_date=values["start_date"],
        start_time=values["start_time"],
        header_bytes=header_bytes,
        reserved=values["reserved"],
        n_records=n_records,
        record_duration=duration,
        n_signals=n_signals,
    )

    # per-signal fields are stored field-major: all labels, then all transducers, ...
    columns = {}
    for name, width in _SIGNAL_FIELDS:
        columns[name] = [
            _ascii(raw[pos + i * width:pos + (i + 1) * width], name) for i in range(n_signals)
        ]
        pos += width * n_signals

    signals = []
    for i in range(n_signals):
        label = columns["label"][i]
        if label == "EDF Annotations":
            raise EdfError("EDF+ annotation channels are not supported")
        dmin = _number(columns["digital_min"][i], "digital_min", int)
        dmax = _number(columns["digital_max"][i], "digital_max", int)
        pmin = _number(columns["physical_min"][i], "physical_min")
        pmax = _number(columns["physical_max"][i], "physical_max")
        spr = _number(columns["samples_per_record"][i], "samples_per_record", int)
        if dmax <= dmin:
            raise EdfError(f"signal {label!r}: digital max {dmax} must exceed digital min {dmin}")
        if pmax == pmin:
            raise EdfError(f"signal {label!r}: physical min equals physical max")
        if spr <= 0:
            raise EdfError(f"signal {label!r}: samples per record must be positive")
        signals.append(SignalHeader(
            label=label,
            transducer=columns["transducer"][i],
            physical_dimension=columns["physical_dimension"][i],
            physical_min=pmin,
            physical_max=pmax,
            digital_min=dmin,
            digital_max=dmax,
            prefilter=columns["prefilter"][i],
            samples_per_record=spr,
            sampling_rate=spr / duration,
        ))
    return header, signals


def read_edf(path):
    """Read a whole EDF file.

    Returns ``(header, signals, digital)`` where ``digital`` is a list of
    int16 arrays, one per signal.
    """
    raw = Path(path).read_bytes()
    header, signals = parse_edf_header(raw)
    spr = np.array([s.samples_per_record for s in signals])
    record_len = int(spr.sum())
    body = raw[header.header_bytes:]
    n_records = header.n_records
    available = len(body) // (2 * record_len)
    if n_records == -1:
        n_records = available
    elif available < n_records:
        raise EdfError(f"{path}: truncated data, {available} of {n_records} records present")
    data = np.frombuffer(body, dtype="<i2", count=n_records * record_len)
    data = data.reshape(n_records, record_len)
    offsets = np.concatenate([[0], np.cumsum(spr)])
    digital = [data[:, offsets[i]:offsets[i + 1]].reshape(-1) for i in range(len(signals))]
    if header.n_records == -1:
        header = EdfHeader(**{**header.__dict__, "n_records": n_records})
    return header, signals, digital


def read_channels(path, montage, t0, t1, fs=DEFAULT_FS):
    """Load the montage channels of ``path`` over ``[t0, t1)`` seconds.

    Digital samples are scaled to physical units and every channel is
    linearly resampled to ``fs`` before slicing.
    """
    if not t1 > t0:
        raise ValueError(f"empty time window [{t0}, {t1})")
    header, signals, digital = read_edf(path)
    if t0 < 0 or t1 > header.duration + 1e-9:
        raise ValueError(
            f"time window [{t0}, {t1}) outside recording of {header.duration} s ({path})"
        )
    by_label = {s.label: i for i, s in enumerate(signals)}
    rows = []
    i0 = int(round(t0 * fs))
    i1 = int(round(t1 * fs))
    for label in montage:
        if label not in by_label:
            raise MissingChannelError(label, path)
        k = by_label[label]
        sig = signals[k]
        phys = sig.to_physical(digital[k])
        if sig.sampling_rate != fs:
            phys = resample_linear(phys, sig.sampling_rate, fs)
        rows.append(phys[i0:i1])
    n = min(len(r) for r in rows)
    return Recording(labels=tuple(montage), fs=float(fs), samples=np.stack([r[:n] for r in rows]))


# --------------------------------------------------------------------------
# manifests


def parse_manifest(text, version=""):
    """Parse manifest CSV text.

    A leading ``# version: <tag>`` comment sets the version tag.  Rows of
    excluded types (MYSZ) are counted in ``Manifest.skipped`` and dropped.
    """
    lines = text.splitlines()
    while lines and lines[0].startswith("#"):
        comment = lines.pop(0)[1:].strip()
        if comment.lower().startswith("version:"):
            version = comment.split(":", 1)[1].strip()
    reader = csv.reader(lines)
    try:
        head = next(reader)
    except StopIteration:
        raise ManifestError("empty manifest: no header row") from None
    if tuple(h.strip() for h in head) != MANIFEST_COLUMNS:
        raise ManifestError(f"manifest header must be {','.join(MANIFEST_COLUMNS)}, got {','.join(head)}")

    events = []
    skipped = {}
    seen = set()
    owner = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(MANIFEST_COLUMNS):
            raise ManifestError(f"row {lineno}: expected 6 fields, got {len(row)}")
        patient, session, file_path, start, stop, code = (c.strip() for c in row)
        try:
            start_s = float(start)
            stop_s = float(stop)
        except ValueError:
            raise ManifestError(f"row {lineno}: non-numeric start/stop") from None
        code = code.upper()
        if code in EXCLUDED_TYPES:
            skipped[code] = skipped.get(code, 0) + 1
            log.warning("row %d: skipping excluded seizure type %s", lineno, code)
            continue
        if code not in TYPE_INDEX:
            raise ManifestError(f"row {lineno}: unknown seizure type {code!r}")
        if not stop_s > start_s:
            raise ManifestError(f"row {lineno}: stop {stop_s} must exceed start {start_s}")
        if not (patient and file_path):
            raise ManifestError(f"row {lineno}: empty patient id or file path")
        key = (patient, file_path, start_s, stop_s)
        if key in seen:
            raise ManifestError(f"row {lineno}: duplicate event {key}")
        seen.add(key)
        prev = owner.setdefault(file_path, (patient, session))
        if prev != (patient, session):
            raise ManifestError(
                f"row {lineno}: file {file_path!r} already belongs to patient/session {prev}"
            )
        events.append(SeizureEvent(patient, session, file_path, start_s, stop_s, code))
    return Manifest(events=events, version=version, skipped=skipped)


def load_manifest(path):
    path = Path(path)
    manifest = parse_manifest(path.read_text(encoding="utf-8"))
    manifest.base_dir = str(path.parent)
    return manifest


def _fmt(x):
    return f"{x:.10g}"


def serialize_manifest(manifest):
    buf = io.StringIO()
    if manifest.version:
        buf.write(f"# version: {manifest.version}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for ev in manifest.events:
        writer.writerow([ev.patient_id, ev.session_id, ev.file_path, _fmt(ev.start), _fmt(ev.stop), ev.type])
    return buf.getvalue()


# --------------------------------------------------------------------------
# statistics


def dataset_stats(manifest):
    """Per-type seizure count, summed duration and distinct patient count.

    Rows are sorted by descending seizure count, ties in type order.
    """
    events = manifest.events if isinstance(manifest, Manifest) else list(manifest)
    if not events:
        raise ManifestError("empty manifest")
    count = {}
    patients = {}
    for ev in events:
        count[ev.type] = count.get(ev.type, 0) + 1
        patients.setdefault(ev.type, set()).add(ev.patient_id)
    # sorted summation keeps the total independent of row order
    duration = {code: float(np.sum(np.sort([ev.duration for ev in events if ev.type == code])))
                for code in count}
    rows = [TypeStats(c, count[c], duration[c], len(patients[c])) for c in count]
    rows.sort(key=lambda r: (-r.n_seizures, TYPE_INDEX[r.type]))
    return rows


def stats_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["type", "n_seizures", "duration_s", "n_patients"])
    for r in rows:
        writer.writerow([r.type, r.n_seizures, _fmt(r.duration_s), r.n_patients])
    return buf.getvalue()


def stats_table(rows):
    """Aligned plain-text table: type, seizure count, duration (s), patient count."""
    head = ("Seizure Type", "Seizure Number", "Duration (Seconds)", "Patient Number")
    body = [
        (f"{TYPE_NAMES[r.type]} ({r.type})", str(r.n_seizures), _fmt(round(r.duration_s, 3)), str(r.n_patients))
        for r in rows
    ]
    widths = [max(len(head[i]), *(len(b[i]) for b in body)) for i in range(4)]
    lines = ["  ".join(
        h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(head, widths))
    )]
    lines.append("  ".join("-" * w for w in widths))
    for b in body:
        lines.append("  ".join(
            c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(b, widths))
        ))
    return "\n".join(lines) + "\n"
