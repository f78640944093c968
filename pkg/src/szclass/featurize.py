"""Windowed FFT features.

Method 1 is the log10 magnitude spectrum between 1 Hz and ``f_max`` per
channel, flattened channel-major.  Method 2 correlates the normalized
spectra of all channel pairs and appends the eigenvalues of that
correlation matrix.
"""

import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CacheVersionError, DataError, DimensionError, SpecMismatchError
from .ingest import DEFAULT_FS, SEIZURE_TYPES, read_channels
from .numerics import fft_magnitudes, pearson_correlation_batch, sym_eigenvalues_batch

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-10
BUCKET_NORMS = ("channel", "bucket")


@dataclass(frozen=True)
class WindowSpec:
    length: float
    overlap: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("window length must be positive")
        if not 0 <= self.overlap < self.length:
            raise ValueError("overlap must satisfy 0 <= O < W_l")

    @property
    def stride(self):
        return self.length - self.overlap


@dataclass(frozen=True)
class FeatureSpec:
    """``bucket_norm`` selects how Method 2 normalizes the clipped spectra:
    ``"channel"`` z-scores each channel across its frequency buckets,
    ``"bucket"`` z-scores each frequency bucket across channels."""

    method: int
    f_max: int
    eps: float = LOG_FLOOR
    bucket_norm: str = "channel"

    def __post_init__(self):
        if self.method not in (1, 2):
            raise ValueError("method must be 1 or 2")
        if not self.f_max > 1:
            raise ValueError("f_max must exceed 1 Hz")
        if not self.eps > 0:
            raise ValueError("log floor must be positive")
        if self.bucket_norm not in BUCKET_NORMS:
            raise ValueError(f"bucket_norm must be one of {BUCKET_NORMS}")


@dataclass
class FeatureMatrix:
    X: np.ndarray
    labels: np.ndarray
    patients: list
    seizure_ids: np.ndarray
    starts: np.ndarray
    method: int = 1
    f_max: int = 0
    window: float = 0.0
    overlap: float = 0.0
    montage: tuple = ()
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.seizure_ids = np.asarray(self.seizure_ids, dtype=np.int64)
        self.starts = np.asarray(self.starts, dtype=np.float64)
        self.patients = list(self.patients)
        n = self.X.shape[0]
        if not (len(self.labels) == len(self.patients) == len(self.seizure_ids) == len(self.starts) == n):
            raise ValueError("provenance columns must match the row count")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(SEIZURE_TYPES)):
            raise ValueError("labels outside the 7-class vocabulary")
        self.montage = tuple(self.montage)

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def subset(self, mask):
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return FeatureMatrix(
            X=self.X[idx], labels=self.labels[idx],
            patients=[self.patients[i] for i in idx],
            seizure_ids=self.seizure_ids[idx], starts=self.starts[idx],
            method=self.method, f_max=self.f_max, window=self.window,
            overlap=self.overlap, montage=self.montage,
        )


# --------------------------------------------------------------------------
# windowing


def window_count(duration, spec):
    if duration < spec.length - 1e-9:
        return 0
    return int(np.floor((duration - spec.length) / spec.stride + 1e-9)) + 1


def window_starts(duration, spec):
    """Start times (s) of every full window in a clip of ``duration`` s."""
    return np.arange(window_count(duration, spec)) * spec.stride


def window_clip(clip, spec):
    """Cut a Recording into windows of shape ``(count, N, round(W_l * fs))``.

    Window ``i`` starts at ``i * (W_l - O)`` seconds; the trailing partial
    window is dropped.  A clip shorter than one window yields zero windows.
    """
    fs = clip.fs
    x = clip.samples
    n_len = int(round(spec.length * fs))
    starts = window_starts(clip.duration, spec)
    if starts.size == 0:
        log.warning("clip of %.3f s shorter than window %.3f s", clip.duration, spec.length)
        return np.zeros((0, x.shape[0], n_len))
    first = np.rint(starts * fs).astype(np.int64)
    first = first[first + n_len <= x.shape[1]]
    idx = first[:, None] + np.arange(n_len)[None, :]
    return np.ascontiguousarray(x[:, idx].transpose(1, 0, 2))


# --------------------------------------------------------------------------
# feature methods


def band_bins(n_samples, fs, f_max):
    """Indices of rfft bins with ``1 <= f < f_max`` for a window of ``n_samples``."""
    if f_max > fs / 2:
        raise ValueError(f"f_max {f_max} Hz above Nyquist ({fs / 2} Hz)")
    k = np.arange(n_samples // 2 + 1)
    freqs = k * (fs / n_samples)
    sel = k[(freqs >= 1.0 - 1e-9) & (freqs < f_max - 1e-9)]
    if sel.size == 0:
        raise ValueError(f"no frequency bins in [1, {f_max}) Hz for a {n_samples}-sample window")
    return sel


def _as_batch(windows):
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 2:
        w = w[None]
    if w.ndim != 3:
        raise ValueError("windows must be (N, L) or (count, N, L)")
    return w


def _clipped_spectra(windows, fs, spec):
    bins = band_bins(windows.shape[-1], fs, spec.f_max)
    return fft_magnitudes(windows)[..., bins]


def method1_batch(windows, fs, spec, n_channels=None):
    w = _as_batch(windows)
    if n_channels is not None and w.shape[1] != n_channels:
        raise DimensionError(f"window has {w.shape[1]} channels, montage has {n_channels}")
    mags = _clipped_spectra(w, fs, spec)
    feats = np.log10(np.maximum(mags, spec.eps))
    return feats.reshape(feats.shape[0], -1)


def method1_features(window, fs, spec, n_channels=None):
    """Log10 magnitudes on ``[1, f_max)`` Hz, shape ``N * B``, channel-major."""
    return method1_batch(np.asarray(window)[None], fs, spec, n_channels)[0]


def _zscore(a, axis):
    mean = a.mean(axis=axis, keepdims=True)
    std = a.std(axis=axis, keepdims=True)
    scale = np.maximum(np.max(np.abs(a), axis=axis, keepdims=True), 1.0)
    flat = std <= 1e-12 * scale
    out = (a - mean) / np.where(flat, 1.0, std)
    return np.where(flat, 0.0, out)


def normalize_buckets(mags, mode="channel"):
    """Normalize clipped spectra ``(..., N, B)`` before correlation."""
    if mode == "channel":
        return _zscore(mags, axis=-1)
    if mode == "bucket":
        return _zscore(mags, axis=-2)
    raise ValueError(f"unknown bucket normalization {mode!r}")


def sort_by_magnitude(eigs):
    """Sort along the last axis by descending |value|, ties by descending value."""
    eigs = np.asarray(eigs)
    # lexsort keys: last key is primary
    order = np.lexsort((-eigs, -np.abs(eigs)), axis=-1)
    return np.take_along_axis(eigs, order, axis=-1)


def method2_batch(windows, fs, spec, n_channels=None):
    w = _as_batch(windows)
    n = w.shape[1]
    if n_channels is not None and n != n_channels:
        raise DimensionError(f"window has {n} channels, montage has {n_channels}")
    if n < 2:
        raise ValueError("method 2 needs at least 2 channels")
    mags = _clipped_spectra(w, fs, spec)
    if mags.shape[-1] < 2:
        raise ValueError("method 2 needs at least 2 frequency bins")
    corr = pearson_correlation_batch(normalize_buckets(mags, spec.bucket_norm))
    iu = np.triu_indices(n, k=1)
    upper = corr[:, iu[0], iu[1]]
    eigs = sort_by_magnitude(sym_eigenvalues_batch(corr))
    return np.concatenate([upper, eigs], axis=1)


def method2_features(window, fs, spec, n_channels=None):
    """Upper-triangle channel correlations plus sorted eigenvalues, ``N(N-1)/2 + N``."""
    return method2_batch(np.asarray(window)[None], fs, spec, n_channels)[0]


def feature_dim(n_channels, spec, window_length, fs=DEFAULT_FS):
    if spec.method == 2:
        return n_channels * (n_channels - 1) // 2 + n_channels
    n_len = int(round(window_length * fs))
    return n_channels * band_bins(n_len, fs, spec.f_max).size


def featurize_windows(windows, fs, spec, n_channels=None):
    if spec.method == 1:
        return method1_batch(windows, fs, spec, n_channels)
    return method2_batch(windows, fs, spec, n_channels)


# --------------------------------------------------------------------------
# whole manifests


def load_clips(manifest, montage, fs=DEFAULT_FS, workers=1):
    """Read every event's clip.

    Returns ``(clips, skipped)``; ``clips[i]`` is None when event ``i``
    could not be read and ``skipped`` lists ``(index, path, reason)``.
    """

    def load(i):
        ev = manifest.events[i]
        path = manifest.resolve(ev)
        try:
            return read_channels(path, montage, ev.start, ev.stop, fs=fs), None
        except (OSError, DataError, ValueError) as exc:
            return None, (i, str(path), f"{type(exc).__name__}: {exc}")

    indices = range(len(manifest.events))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(load, indices))
    else:
        results = [load(i) for i in indices]
    clips = [r[0] for r in results]
    skipped = [r[1] for r in results if r[1] is not None]
    for i, path, reason in skipped:
        log.warning("skipping event %d (%s): %s", i, path, reason)
    return clips, skipped


def featurize_clips(manifest, clips, montage, wspec, fspec, skipped=()):
    rows = []
    labels = []
    patients = []
    sids = []
    starts = []
    for i, (ev, clip) in enumerate(zip(manifest.events, clips)):
        if clip is None:
            continue
        windows = window_clip(clip, wspec)
        if windows.shape[0] == 0:
            continue
        feats = featurize_windows(windows, clip.fs, fspec, n_channels=len(montage))
        k = feats.shape[0]
        rows.append(feats)
        labels.append(np.full(k, ev.label))
        patients.extend([ev.patient_id] * k)
        sids.append(np.full(k, i))
        starts.append(ev.start + np.arange(k) * wspec.stride)
    if not rows:
        raise DataError("featurization produced zero windows")
    return FeatureMatrix(
        X=np.concatenate(rows), labels=np.concatenate(labels), patients=patients,
        seizure_ids=np.concatenate(sids), starts=np.concatenate(starts),
        method=fspec.method, f_max=fspec.f_max, window=wspec.length, overlap=wspec.overlap,
        montage=tuple(montage), skipped=list(skipped),
    )


def featurize_manifest(manifest, montage, wspec, fspec, fs=DEFAULT_FS, workers=1):
    """Features for every readable event, in manifest then window order.

    Unreadable events are skipped and listed in ``FeatureMatrix.skipped``.
    """
    clips, skipped = load_clips(manifest, montage, fs=fs, workers=workers)
    return featurize_clips(manifest, clips, montage, wspec, fspec, skipped)


# --------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X):
        return standardize_apply(self, X)


def standardize_fit(X):
    """Per-column mean and population std of the training rows."""
    X = np.asarray(X.X if isinstance(X, FeatureMatrix) else X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit standardization on an empty matrix")
    return Standardizer(mean=X.mean(axis=0), std=X.std(axis=0))


def standardize_apply(stats, X):
    """Apply fitted stats; zero-std columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    flat = stats.std <= 1e-12 * np.maximum(np.abs(stats.mean), 1.0)
    out = (X - stats.mean) / np.where(flat, 1.0, stats.std)
    out[:, flat] = 0.0
    return out


# --------------------------------------------------------------------------
# binary cache

MAGIC = b"SZFT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBHffQIQ")


def montage_hash(labels):
    """64-bit FNV-1a over the labels joined with newlines."""
    h = 0xCBF29CE484222325
    for byte in "\n".join(labels).encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _row_dtype(d):
    return np.dtype([("label", "u1"), ("patient", "<u4"), ("seizure", "<u4"),
                     ("start", "<f8"), ("x", "<f8", (d,))])


def write_cache(path, fm):
    d = fm.n_features
    table = sorted(set(fm.patients))
    lookup = {p: i for i, p in enumerate(table)}
    rows = np.zeros(len(fm), dtype=_row_dtype(d))
    rows["label"] = fm.labels
    rows["patient"] = [lookup[p] for p in fm.patients]
    rows["seizure"] = fm.seizure_ids
    rows["start"] = fm.starts
    rows["x"] = fm.X
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, fm.method, int(fm.f_max), fm.window, fm.overlap,
                        montage_hash(fm.montage), d, len(fm))
    tail = [struct.pack("<I", len(table))]
    for p in table:
        raw = p.encode("utf-8")
        tail.append(struct.pack("<H", len(raw)) + raw)
    montage = "\n".join(fm.montage).encode("utf-8")
    tail.append(struct.pack("<I", len(montage)) + montage)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(rows.tobytes())
        fh.write(b"".join(tail))


def read_cache(path, expect=None):
    """Read a cache file.

    ``expect`` may map any of ``method, f_max, window, overlap,
    montage_hash, n_features`` to the value the caller requires.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CacheVersionError(f"{path}: truncated cache header")
    magic, version, method, f_max, window, overlap, mhash, d, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CacheVersionError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CacheVersionError(f"{path}: unsupported format version {version}")
    header = dict(method=method, f_max=f_max, window=window, overlap=overlap,
                  montage_hash=mhash, n_features=d, rows=n)
    for key, want in (expect or {}).items():
        got = header[key]
        same = abs(got - want) <= 1e-6 if isinstance(got, float) else got == want
        if not same:
            raise SpecMismatchError(f"{path}: cache has {key}={got}, expected {want}")
    dtype = _row_dtype(d)
    end = _HEADER.size + n * dtype.itemsize
    if len(raw) < end + 4:
        raise CacheVersionError(f"{path}: truncated cache payload")
    rows = np.frombuffer(raw, dtype=dtype, count=n, offset=_HEADER.size)
    pos = end
    try:
        (n_pat,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        table = []
        for _ in range(n_pat):
            (ln,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            if pos + ln > len(raw):
                raise struct.error("short patient table")
            table.append(raw[pos:pos + ln].decode("utf-8"))
            pos += ln
        (ln,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        if pos + ln > len(raw):
            raise struct.error("short montage")
        montage = raw[pos:pos + ln].decode("utf-8").split("\n") if ln else []
    except struct.error as exc:
        raise CacheVersionError(f"{path}: truncated cache trailer") from exc
    if montage_hash(montage) != mhash:
        raise CacheVersionError(f"{path}: montage does not match header hash")
    return FeatureMatrix(
        X=rows["x"].copy(), labels=rows["label"].astype(np.int64),
        patients=[table[i] for i in rows["patient"]],
        seizure_ids=rows["seizure"].astype(np.int64), starts=rows["start"].copy(),
        method=method, f_max=f_max, window=window, overlap=overlap, montage=montage,
    )
