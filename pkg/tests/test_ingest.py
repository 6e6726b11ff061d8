from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgsr.errors import DatasetError, WfdbError
from ecgsr.ingest import (
    DatasetIndex,
    IndexRow,
    assign_split,
    encode_wfdb16,
    format_header,
    make_header,
    parse_header,
    ptbxl_metadata,
    read_metadata,
    read_wfdb16,
    read_wfdb16_files,
    write_wfdb16,
)
from ecgsr.signal import LEADS, make_record


def header_text(n_samples, gain="1000", fmt=16, leads=LEADS, fs=500):
    lines = [f"rec {len(leads)} {fs} {n_samples}"]
    lines += [f"rec.dat {fmt} {gain}/mV 16 0 0 0 0 {lead}" for lead in leads]
    return "\n".join(lines) + "\n"


def pack_frames(raw):
    """Frame-interleaved little-endian int16, written one value at a time."""
    n_sig, n = raw.shape
    return b"".join(struct.pack("<h", int(raw[s, j])) for j in range(n) for s in range(n_sig))


class TestReadWfdb16:
    def test_one_microvolt_per_lsb(self):
        raw = np.zeros((12, 3), dtype=int)
        raw[0, 1] = 1000
        rec = read_wfdb16(header_text(3), pack_frames(raw))
        assert rec.samples[0, 1] == 1.0
        assert rec.samples[0, 0] == 0.0

    def test_baseline_and_negative(self):
        raw = np.full((12, 2), -32768)
        rec = read_wfdb16(header_text(2, gain="200(-100)"), pack_frames(raw))
        assert rec.samples[5, 0] == pytest.approx((-32768 + 100) / 200)

    def test_size_mismatch(self):
        with pytest.raises(WfdbError) as e:
            read_wfdb16(header_text(5000), b"\0" * 119_998)
        assert e.value.code == "SIZE_MISMATCH"

    def test_unsupported_format(self):
        with pytest.raises(WfdbError) as e:
            read_wfdb16(header_text(2, fmt=212), b"\0" * 48)
        assert e.value.code == "UNSUPPORTED_FORMAT"

    @pytest.mark.parametrize("text", ["", "rec 12 500\n", "rec twelve 500 10\n", "rec 12 500 1\nrec.dat 16\n"])
    def test_bad_header(self, text):
        with pytest.raises(WfdbError) as e:
            read_wfdb16(text, b"")
        assert e.value.code == "BAD_HEADER"

    def test_lead_order_canonicalised(self, rng):
        raw = rng.integers(-2000, 2000, size=(12, 4))
        shuffled = list(reversed(LEADS))
        rec = read_wfdb16(header_text(4, leads=shuffled), pack_frames(raw))
        # file row i holds lead shuffled[i]
        for i, name in enumerate(shuffled):
            np.testing.assert_array_equal(rec.samples[LEADS.index(name)], raw[i] / 1000)

    def test_ptbxl_style_header(self):
        text = ("00001_hr 12 500 2\n"
                + "".join(f"00001_hr.dat 16 1000.0(0)/mV 16 0 -119 1508 0 {l}\n" for l in LEADS)
                + "# comment\n")
        h = parse_header(text)
        assert h.fs == 500 and h.n_samples == 2 and h.signals[0].gain == 1000.0
        assert h.signals[0].init_value == -119


class TestRoundTrip:
    def test_bytes_identical(self, rng):
        raw = rng.integers(-32768, 32768, size=(12, 50))
        text = header_text(50)
        data = pack_frames(raw)
        rec = read_wfdb16(text, data)
        assert encode_wfdb16(rec, parse_header(text)) == data

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), gain=st.sampled_from([200.0, 1000.0]))
    def test_quantisation_bound(self, seed, gain):
        x = np.random.default_rng(seed).uniform(-5, 5, size=(12, 40))
        rec = make_record(x, 100, "r")
        h = make_header("r", 100, 40, gain=gain)
        back = read_wfdb16(format_header(h), encode_wfdb16(rec, h))
        assert np.max(np.abs(back.samples - x)) <= 1 / (2 * gain) + 1e-12

    def test_files(self, tmp_path, rng):
        rec = make_record(rng.normal(size=(12, 100)), 100, "abc")
        write_wfdb16(rec, tmp_path / "sub" / "abc_lr")
        back = read_wfdb16_files(tmp_path / "sub" / "abc_lr")
        assert back.fs == 100 and back.record_id == "abc_lr"
        assert np.max(np.abs(back.samples - rec.samples)) <= 0.5e-3 + 1e-12

    def test_overflow(self):
        rec = make_record(np.full((12, 2), 40.0), 100, "r")
        with pytest.raises(WfdbError) as e:
            encode_wfdb16(rec, make_header("r", 100, 2))
        assert e.value.code == "OVERFLOW"

    def test_missing_file(self, tmp_path):
        with pytest.raises(WfdbError) as e:
            read_wfdb16_files(tmp_path / "nope")
        assert e.value.code == "MISSING_FILE"


class TestMetadata:
    def test_row(self):
        idx = read_metadata("record_id,superclass,path\nr001,MI,records/r001\n")
        assert idx.rows == (IndexRow("r001", "MI", "records/r001"),)

    def test_unknown_class(self):
        with pytest.raises(DatasetError) as e:
            read_metadata("record_id,superclass,path\nr001,XYZ,p\n")
        assert e.value.code == "UNKNOWN_CLASS"

    def test_header_only(self):
        assert len(read_metadata("record_id,superclass,path\n")) == 0

    def test_bad_columns(self):
        with pytest.raises(DatasetError) as e:
            read_metadata("id,superclass,path\n")
        assert e.value.code == "BAD_COLUMNS"


class TestPtbxlMetadata:
    STATEMENTS = (",description,diagnostic,diagnostic_class\n"
                  "IMI,inferior MI,1.0,MI\nNORM,normal,1.0,NORM\nSR,sinus rhythm,,\n")
    DATABASE = ("ecg_id,scp_codes,filename_lr,filename_hr\n"
                "1,\"{'NORM': 100.0, 'SR': 0.0}\",records100/00000/00001_lr,records500/00000/00001_hr\n"
                "2,\"{'IMI': 35.0, 'NORM': 80.0}\",records100/00000/00002_lr,records500/00000/00002_hr\n"
                "3,\"{'SR': 0.0}\",records100/00000/00003_lr,records500/00000/00003_hr\n")

    def test_rows(self):
        idx = read_metadata(ptbxl_metadata(self.DATABASE, self.STATEMENTS))
        assert [(r.record_id, r.superclass) for r in idx.rows] == [("1", "NORM"), ("2", "NORM")]
        assert idx.rows[0].path_lr == "records100/00000/00001_lr"
        assert idx.rows[0].path_hr == "records500/00000/00001_hr"

    def test_most_likely_code_wins(self):
        db = self.DATABASE.replace("'IMI': 35.0, 'NORM': 80.0", "'IMI': 90.0, 'NORM': 80.0")
        idx = read_metadata(ptbxl_metadata(db, self.STATEMENTS))
        assert idx.rows[1].superclass == "MI"


def index_of(n_mi, n_norm=0):
    rows = [IndexRow(f"m{i}", "MI", f"p/m{i}") for i in range(n_mi)]
    rows += [IndexRow(f"n{i}", "NORM", f"p/n{i}") for i in range(n_norm)]
    return DatasetIndex(tuple(rows))


class TestAssignSplit:
    def test_ninety_ten(self):
        s = assign_split(index_of(100), "MI", 0.9, 0)
        assert len(s.by_split("train")) == 90 and len(s.by_split("validation")) == 10

    def test_floor_with_other_classes(self):
        s = assign_split(index_of(10, 5), "MI", 0.9, 0)
        assert [len(s.by_split(k)) for k in ("train", "validation", "test")] == [9, 1, 5]

    def test_deterministic(self):
        a = assign_split(index_of(30), "MI", 0.5, 7)
        b = assign_split(index_of(30), "MI", 0.5, 7)
        assert a == b
        assert a != assign_split(index_of(30), "MI", 0.5, 8)

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, f):
        with pytest.raises(DatasetError) as e:
            assign_split(index_of(5), "MI", f, 0)
        assert e.value.code == "BAD_FRACTION"

    def test_empty_class(self):
        with pytest.raises(DatasetError) as e:
            assign_split(index_of(0, 3), "MI", 0.9, 0)
        assert e.value.code == "EMPTY_CLASS"

    @settings(max_examples=30, deadline=None)
    @given(n_mi=st.integers(1, 40), n_norm=st.integers(0, 10), f=st.floats(0.05, 0.95), seed=st.integers(0, 99))
    def test_partition(self, n_mi, n_norm, f, seed):
        s = assign_split(index_of(n_mi, n_norm), "MI", f, seed)
        ids = [sorted(r.record_id for r in s.by_split(k)) for k in ("train", "validation", "test")]
        assert sum(map(len, ids)) == n_mi + n_norm
        assert len(set().union(*map(set, ids))) == n_mi + n_norm
        assert len(ids[0]) == int(np.floor(f * n_mi + 1e-9))
