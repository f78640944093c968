"""Synthetic labeled EEG corpora.

Each seizure clip is a sum of narrow-band sinusoids drawn from its class
signature, scaled per channel group and per patient, plus white noise.
The separability knob ``separability`` blends every class signature with
the across-class mean: 0 makes all classes identical, 1 leaves each class
with energy only in its own bands.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ingest import SEIZURE_TYPES, TYPE_INDEX, Manifest, Recording, SeizureEvent, serialize_manifest

log = logging.getLogger(__name__)

DEFAULT_PHYSICAL_RANGE = (-3276.8, 3276.7)
DIGITAL_RANGE = (-32768, 32767)
N_GROUPS = 4
SINES_PER_BAND = 3

_ELECTRODES = (
    "FP1", "FP2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
    "F7", "F8", "T3", "T4", "T5", "T6", "FZ", "CZ", "PZ", "A1",
)


def default_montage(n_channels=20):
    labels = [f"EEG {e}-REF" for e in _ELECTRODES[:n_channels]]
    labels += [f"EEG X{i:02d}-REF" for i in range(len(labels), n_channels)]
    return labels


@dataclass(frozen=True)
class ClassSignature:
    """Band profile of one class.

    ``bands`` holds ``(center_hz, bandwidth_hz, amplitude_uv)`` triples and
    ``group_gains`` one row of channel-group gains per band.
    """

    code: str
    bands: tuple
    group_gains: np.ndarray
    amplitude_jitter: float = 0.1


@dataclass
class GenSpec:
    classes: list = field(default_factory=lambda: list(SEIZURE_TYPES))
    patients_per_class: int = 4
    seizures_per_patient: int = 4
    duration: float = 60.0
    n_channels: int = 20
    fs: float = 250.0
    noise: float = 2.0
    separability: float = 1.0
    seed: int = 0
    patient_gain_jitter: float = 0.2
    amplitude_jitter: float = 0.1
    padding: float = 2.0
    shared_patients: bool = False
    patientwise: bool = True

    def validate(self):
        if not 1 <= len(self.classes) <= 7:
            raise ValueError("between 1 and 7 classes required")
        unknown = set(self.classes) - set(SEIZURE_TYPES)
        if unknown:
            raise ValueError(f"unknown class codes {sorted(unknown)}")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class codes")
        if self.patientwise and self.patients_per_class < 3:
            raise ValueError("patient-wise folds need at least 3 patients per class")
        if self.patients_per_class < 1 or self.seizures_per_patient < 1:
            raise ValueError("patients_per_class and seizures_per_patient must be >= 1")
        if self.duration < 16:
            raise ValueError("clip duration must cover the longest window (16 s)")
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if not float(self.fs).is_integer() or self.fs <= 0:
            raise ValueError("fs must be a positive integer (1-second EDF records)")
        if not 0.0 <= self.separability <= 1.0:
            raise ValueError("separability must lie in [0, 1]")
        if self.noise < 0 or self.padding < 0:
            raise ValueError("noise and padding must be non-negative")
        if not 0 <= self.patient_gain_jitter < 1:
            raise ValueError("patient_gain_jitter must lie in [0, 1)")
        for sig in class_signatures(self):
            for center, bw, _ in sig.bands:
                if center + bw / 2 >= self.fs / 2:
                    raise ValueError(f"band at {center} Hz exceeds Nyquist of {self.fs} Hz")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown GenSpec fields {sorted(extra)}")
        spec = cls(**data)
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)

    @property
    def montage(self):
        return default_montage(self.n_channels)


def _base_table():
    """Per-class band table at full separability: two bands per class."""
    centers = []
    for c in range(len(SEIZURE_TYPES)):
        centers.append((2.5 + 1.4 * c, 1.0, 30.0))
        centers.append((14.0 + 3.0 * c, 2.0, 15.0))
    return centers


def class_signatures(spec):
    """Signatures for ``spec.classes`` after blending by separability."""
    bands = _base_table()
    n_bands = len(bands)
    # own[c, b] = amplitude of band b in class c at full separability
    own = np.zeros((len(SEIZURE_TYPES), n_bands))
    gains = np.zeros((len(SEIZURE_TYPES), n_bands, N_GROUPS))
    for c in range(len(SEIZURE_TYPES)):
        own[c, 2 * c] = bands[2 * c][2]
        own[c, 2 * c + 1] = bands[2 * c + 1][2]
        # fixed spatial pattern per class, independent of the corpus seed
        gains[c] = np.random.default_rng((7919, c)).uniform(0.3, 1.0, size=(n_bands, N_GROUPS))
    mean_amp = own.mean(axis=0)
    mean_gain = gains.mean(axis=0)
    d = spec.separability
    out = []
    for code in spec.classes:
        c = TYPE_INDEX[code]
        amp = (1 - d) * mean_amp + d * own[c]
        g = (1 - d) * mean_gain + d * gains[c]
        out.append(ClassSignature(
            code=code,
            bands=tuple((bands[b][0], bands[b][1], float(amp[b])) for b in range(n_bands)),
            group_gains=g,
            amplitude_jitter=spec.amplitude_jitter,
        ))
    return out


def channel_groups(n_channels):
    """Group index of every channel (contiguous blocks)."""
    return (np.arange(n_channels) * N_GROUPS) // max(n_channels, 1)


def synthesize_clip(signature, n_channels, fs, duration, rng, patient_gain=None, noise=0.0,
                    padding=0.0):
    """Samples ``(n_channels, T)`` of one clip, seizure in ``[padding, padding+duration)``."""
    n_total = int(round((duration + 2 * padding) * fs))
    i0 = int(round(padding * fs))
    i1 = i0 + int(round(duration * fs))
    t = np.arange(i1 - i0) / fs
    groups = channel_groups(n_channels)
    x = np.zeros((n_channels, n_total))
    group_sig = np.zeros((N_GROUPS, t.size))
    for b, (center, bw, amp) in enumerate(signature.bands):
        if amp <= 0:
            continue
        jitter = max(0.0, 1.0 + signature.amplitude_jitter * rng.standard_normal())
        freqs = center + bw * (rng.random(SINES_PER_BAND) - 0.5)
        phases = rng.uniform(0, 2 * np.pi, SINES_PER_BAND)
        band = (amp * jitter / SINES_PER_BAND) * np.sin(
            2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]
        ).sum(axis=0)
        group_sig += signature.group_gains[b][:, None] * band[None, :]
    x[:, i0:i1] = group_sig[groups]
    if patient_gain is not None:
        x *= np.asarray(patient_gain)[:, None]
    if noise > 0:
        x += noise * rng.standard_normal(x.shape)
    return x


def write_edf(recording, path, physical_range=DEFAULT_PHYSICAL_RANGE, patient_id="X",
              recording_id="X"):
    """Write ``recording`` as a plain EDF file with 1-second data records.

    Samples outside ``physical_range`` are clipped; the number of clipped
    samples is returned.  A trailing partial record is padded with zeros.
    """
    fs = recording.fs
    if not float(fs).is_integer():
        raise ValueError("write_edf needs an integer sampling rate")
    spr = int(fs)
    pmin, pmax = physical_range
    dmin, dmax = DIGITAL_RANGE
    x = np.asarray(recording.samples, dtype=np.float64)
    n_sig, n = x.shape
    n_records = -(-n // spr)
    padded = np.zeros((n_sig, n_records * spr))
    padded[:, :n] = x
    n_clipped = int(np.count_nonzero((padded < pmin) | (padded > pmax)))
    if n_clipped:
        log.warning("write_edf: %d samples clipped to [%g, %g]", n_clipped, pmin, pmax)
    padded = np.clip(padded, pmin, pmax)
    digital = np.rint(dmin + (padded - pmin) * (dmax - dmin) / (pmax - pmin))
    digital = np.clip(digital, dmin, dmax).astype("<i2")
    records = digital.reshape(n_sig, n_records, spr).transpose(1, 0, 2)

    def f(value, width):
        text = str(value)
        if len(text) > width:
            raise ValueError(f"header value {text!r} exceeds {width} chars")
        return text.ljust(width).encode("ascii")

    def num(value, width):
        text = f"{value:.{width}g}"
        while len(text) > width:
            width -= 1
            text = f"{value:.{width}g}"
        return text

    head = b"".join([
        f("0", 8), f(patient_id, 80), f(recording_id, 80), f("01.01.00", 8), f("00.00.00", 8),
        f(256 + 256 * n_sig, 8), f("", 44), f(n_records, 8), f("1", 8), f(n_sig, 4),
    ])
    sig_fields = [
        [f(label, 16) for label in recording.labels],
        [f("AgAgCl electrode", 80)] * n_sig,
        [f("uV", 8)] * n_sig,
        [f(num(pmin, 8), 8)] * n_sig,
        [f(num(pmax, 8), 8)] * n_sig,
        [f(dmin, 8)] * n_sig,
        [f(dmax, 8)] * n_sig,
        [f("", 80)] * n_sig,
        [f(spr, 8)] * n_sig,
        [f("", 32)] * n_sig,
    ]
    head += b"".join(b"".join(col) for col in sig_fields)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(records.tobytes())
    return n_clipped


def _patient_roster(spec):
    """``{class_code: [patient ids]}``; ids are unique across classes unless
    ``shared_patients`` reuses the last patient of the previous class."""
    roster = {}
    prev = None
    for ci, code in enumerate(spec.classes):
        ids = [f"p{ci}{j:02d}" for j in range(spec.patients_per_class)]
        if spec.shared_patients and prev is not None:
            ids[0] = roster[prev][-1]
        roster[code] = ids
        prev = code
    return roster


def generate_corpus(spec, out_dir):
    """Write EDF files and ``manifest.csv`` under ``out_dir``.

    Returns the in-memory :class:`Manifest`.  Output depends only on
    ``spec``: every clip draws from its own child of the corpus seed.
    """
    spec.validate()
    out = Path(out_dir)
    (out / "edf").mkdir(parents=True, exist_ok=True)
    sigs = {s.code: s for s in class_signatures(spec)}
    roster = _patient_roster(spec)
    montage = spec.montage

    all_patients = sorted({p for ids in roster.values() for p in ids})
    gains = {}
    for k, pid in enumerate(all_patients):
        rng = np.random.default_rng((spec.seed, 1, k))
        j = spec.patient_gain_jitter
        gains[pid] = rng.uniform(1 - j, 1 + j, size=spec.n_channels)

    events = []
    clip = 0
    for code in spec.classes:
        for pid in roster[code]:
            for s in range(spec.seizures_per_patient):
                rng = np.random.default_rng((spec.seed, 2, clip))
                x = synthesize_clip(sigs[code], spec.n_channels, spec.fs, spec.duration, rng,
                                    patient_gain=gains[pid], noise=spec.noise,
                                    padding=spec.padding)
                session = f"s{code}{s:02d}"
                rel = f"edf/{pid}_{session}.edf"
                write_edf(Recording(labels=montage, fs=spec.fs, samples=x), out / rel,
                          patient_id=pid, recording_id=session)
                events.append(SeizureEvent(pid, session, rel, spec.padding,
                                           spec.padding + spec.duration, code))
                clip += 1

    manifest = Manifest(events=events, version="synthetic", base_dir=str(out))
    (out / "manifest.csv").write_text(serialize_manifest(manifest), encoding="utf-8")
    (out / "genspec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest
