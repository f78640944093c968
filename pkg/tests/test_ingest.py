import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szclass.errors import EdfError, ManifestError, MissingChannelError
from szclass.ingest import (SEIZURE_TYPES, Manifest, Recording, SeizureEvent, SignalHeader,
                            dataset_stats, load_manifest, parse_edf_header, parse_manifest,
                            read_channels, read_edf, serialize_manifest, stats_csv, stats_table)
from szclass.synthgen import write_edf

from edfutil import build_edf

HEAD = "patient_id,session_id,file_path,start_s,stop_s,type\n"


def _signal(dmin=-32768, dmax=32767, pmin=-3276.8, pmax=3276.7):
    return SignalHeader("x", "", "uV", pmin, pmax, dmin, dmax, "", 250, 250.0)


class TestEdfHeader:
    def test_minimal_one_signal(self):
        raw = build_edf([("EEG FP1-REF", 4, np.arange(4))], n_records=1)
        header, signals = parse_edf_header(raw)
        assert header.n_signals == 1
        assert header.header_bytes == 512
        assert header.duration == 1.0
        assert signals[0].label == "EEG FP1-REF"
        assert signals[0].sampling_rate == 4.0

    def test_header_size_mismatch(self):
        raw = build_edf([("A", 4, np.zeros(4))], n_records=1, header_bytes=999)
        with pytest.raises(EdfError, match="header size mismatch"):
            parse_edf_header(raw)

    def test_truncated(self):
        raw = build_edf([("A", 4, np.zeros(4))], n_records=1)
        with pytest.raises(EdfError, match="truncated"):
            parse_edf_header(raw[:300])

    def test_non_numeric(self):
        raw = bytearray(build_edf([("A", 4, np.zeros(4))], n_records=1))
        raw[236:244] = b"abc     "
        with pytest.raises(EdfError, match="non-numeric"):
            parse_edf_header(bytes(raw))

    def test_bad_digital_range(self):
        raw = build_edf([("A", 4, np.zeros(4))], n_records=1, dig=(10, 10))
        with pytest.raises(EdfError, match="digital max"):
            parse_edf_header(raw)

    def test_discontinuous_rejected(self):
        raw = build_edf([("A", 4, np.zeros(4))], n_records=1, reserved="EDF+D")
        with pytest.raises(EdfError, match="EDF\\+D"):
            parse_edf_header(raw)

    def test_annotation_channel_rejected(self):
        raw = build_edf([("EDF Annotations", 4, np.zeros(4))], n_records=1)
        with pytest.raises(EdfError, match="annotation"):
            parse_edf_header(raw)

    def test_synthgen_round_trip(self, tmp_path):
        x = np.zeros((2, 500))
        rec = Recording(labels=("EEG A-REF", "EEG B-REF"), fs=250.0, samples=x)
        write_edf(rec, tmp_path / "two.edf")
        header, signals, digital = read_edf(tmp_path / "two.edf")
        assert header.n_signals == 2
        assert header.n_records == 2
        assert header.record_duration == 1.0
        assert [s.label for s in signals] == ["EEG A-REF", "EEG B-REF"]
        for s in signals:
            assert (s.physical_min, s.physical_max) == (-3276.8, 3276.7)
            assert (s.digital_min, s.digital_max) == (-32768, 32767)
            assert s.samples_per_record == 250
        assert all(d.size == 500 for d in digital)


class TestCalibration:
    def test_hand_value(self):
        assert _signal().to_physical(100) == pytest.approx(10.0, abs=1e-9)

    def test_endpoints_exact(self):
        sig = _signal()
        assert sig.to_physical(-32768) == -3276.8
        assert sig.to_physical(32767) == pytest.approx(3276.7, abs=1e-9)

    @given(st.integers(-32768, 32766))
    def test_monotone(self, d):
        sig = _signal()
        assert sig.to_physical(d + 1) > sig.to_physical(d)


class TestReadChannels:
    def _file(self, tmp_path):
        # two channels at different native rates, three 1 s records
        t256 = np.arange(3 * 256)
        t200 = np.arange(3 * 200)
        a = (t256 % 200) - 100
        b = 2 * t200 - 300
        raw = build_edf([("EEG FP1-REF", 256, a), ("EEG FP2-REF", 200, b)], n_records=3)
        path = tmp_path / "multi.edf"
        path.write_bytes(raw)
        return path

    def test_resampled_and_ordered(self, tmp_path):
        path = self._file(tmp_path)
        rec = read_channels(path, ["EEG FP2-REF", "EEG FP1-REF"], 0.0, 2.0, fs=250)
        assert rec.samples.shape == (2, 500)
        assert rec.labels == ("EEG FP2-REF", "EEG FP1-REF")
        # channel b is an affine ramp in time, so resampling reproduces it exactly
        t = np.arange(500) / 250
        want = 0.1 * (2 * 200 * t - 300)
        np.testing.assert_allclose(rec.samples[0], want, atol=1e-9)

    def test_time_slice(self, tmp_path):
        path = self._file(tmp_path)
        full = read_channels(path, ["EEG FP2-REF"], 0.0, 3.0)
        part = read_channels(path, ["EEG FP2-REF"], 1.0, 2.0)
        np.testing.assert_array_equal(part.samples[0], full.samples[0, 250:500])

    def test_missing_channel(self, tmp_path):
        path = self._file(tmp_path)
        with pytest.raises(MissingChannelError) as info:
            read_channels(path, ["EEG FP1-REF", "EEG CZ-REF"], 0.0, 1.0)
        assert info.value.label == "EEG CZ-REF"

    def test_out_of_range(self, tmp_path):
        path = self._file(tmp_path)
        with pytest.raises(ValueError):
            read_channels(path, ["EEG FP1-REF"], 2.0, 4.0)

    def test_recording_is_read_only(self, tmp_path):
        rec = read_channels(self._file(tmp_path), ["EEG FP1-REF"], 0.0, 1.0)
        with pytest.raises(ValueError):
            rec.samples[0, 0] = 1.0


class TestManifest:
    def test_single_row(self):
        m = parse_manifest(HEAD + "p01,s01,f01.edf,10.0,35.5,FNSZ\n")
        (ev,) = m.events
        assert ev.duration == 25.5
        assert ev.label == 0

    def test_mysz_skipped(self):
        m = parse_manifest(HEAD + "p01,s01,f01.edf,0,5,MYSZ\np01,s01,f01.edf,6,9,GNSZ\n")
        assert len(m.events) == 1
        assert m.skipped == {"MYSZ": 1}

    def test_reversed_interval_names_row(self):
        with pytest.raises(ManifestError, match="row 2"):
            parse_manifest(HEAD + "p01,s01,f01.edf,10.0,5.0,FNSZ\n")

    @pytest.mark.parametrize("body", [
        "p01,s01,f01.edf,0,5,XXSZ\n",
        "p01,s01,f01.edf,0,5\n",
        "p01,s01,f01.edf,a,5,FNSZ\n",
        "p01,s01,f01.edf,0,5,FNSZ\np01,s01,f01.edf,0,5,FNSZ\n",
        "p01,s01,f01.edf,0,5,FNSZ\np02,s01,f01.edf,6,9,FNSZ\n",
    ])
    def test_rejects(self, body):
        with pytest.raises(ManifestError):
            parse_manifest(HEAD + body)

    def test_bad_header(self):
        with pytest.raises(ManifestError, match="header"):
            parse_manifest("a,b,c\n")

    def test_version_and_round_trip(self, tmp_path):
        text = "# version: v1.4.0\n" + HEAD + "p01,s01,f01.edf,10,35.5,FNSZ\np02,s02,f02.edf,1,2.25,TCSZ\n"
        m = parse_manifest(text)
        assert m.version == "v1.4.0"
        assert serialize_manifest(m) == text
        path = tmp_path / "m.csv"
        path.write_text(serialize_manifest(m))
        again = load_manifest(path)
        assert again.events == m.events
        assert again.resolve(again.events[0]) == tmp_path / "f01.edf"


def _events(rows):
    return [SeizureEvent(p, f"s{i}", f"{p}_{i}.edf", 0.0, d, t) for i, (p, d, t) in enumerate(rows)]


class TestStats:
    def test_single_event(self):
        (row,) = dataset_stats(parse_manifest(HEAD + "p01,s01,f01.edf,10.0,35.5,FNSZ\n"))
        assert (row.type, row.n_seizures, row.duration_s, row.n_patients) == ("FNSZ", 1, 25.5, 1)

    def test_empty(self):
        with pytest.raises(ManifestError, match="empty manifest"):
            dataset_stats(Manifest(events=[]))

    def test_order_and_counts(self):
        ev = _events([("a", 1.0, "GNSZ"), ("b", 2.0, "FNSZ"), ("a", 3.0, "GNSZ"), ("c", 4.0, "ABSZ")])
        rows = dataset_stats(ev)
        assert [r.type for r in rows] == ["GNSZ", "FNSZ", "ABSZ"]
        assert rows[0].n_seizures == 2 and rows[0].n_patients == 1 and rows[0].duration_s == 4.0

    @given(st.lists(st.tuples(st.sampled_from("abcde"), st.floats(0.1, 1e4),
                              st.sampled_from(SEIZURE_TYPES)), min_size=1, max_size=40),
           st.randoms())
    @settings(max_examples=50, deadline=None)
    def test_row_permutation_invariant(self, rows, rnd):
        ev = _events(rows)
        shuffled = list(ev)
        rnd.shuffle(shuffled)
        assert dataset_stats(ev) == dataset_stats(shuffled)

    def test_output_formats(self):
        ev = _events([("a", 1.5, "GNSZ"), ("b", 2.0, "FNSZ")])
        rows = dataset_stats(ev)
        assert stats_csv(rows).splitlines()[0] == "type,n_seizures,duration_s,n_patients"
        table = stats_table(rows).splitlines()
        assert table[0].split("  ")[0].strip() == "Seizure Type"
        assert len(table) == 2 + len(rows)
