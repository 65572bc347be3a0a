"""Feature-file and alignment-table round trips and validation."""

from __future__ import annotations

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from decodewin.errors import FormatError, ValidationError
from decodewin.tensorio import (
    MAGIC,
    FeatureMatrix,
    PhoneRecord,
    read_alignments,
    read_feature_file,
    strip_stress,
    write_alignments,
    write_feature_file,
)


def make_matrix(data, rate=50.0, utt="utt1", tag="enc", layer=None):
    return FeatureMatrix(
        utterance_id=utt,
        frame_rate_hz=rate,
        data=np.asarray(data, dtype=np.float32),
        encoder_tag=tag,
        layer=layer,
    )


class TestFeatureFiles:
    def test_minimal_round_trip_and_size(self, tmp_path):
        m = make_matrix([[0.0]], rate=50.0)
        path = tmp_path / "m.fdt"
        write_feature_file(m, path)
        raw = path.read_bytes()
        (header_len,) = struct.unpack("<I", raw[8:12])
        assert raw[:8] == MAGIC
        assert len(raw) == 12 + header_len + 4
        assert read_feature_file(path) == m

    def test_payload_size_arithmetic(self, tmp_path):
        m = make_matrix(np.zeros((30, 768)), rate=25.0, layer=9)
        path = tmp_path / "m.fdt"
        write_feature_file(m, path)
        raw = path.read_bytes()
        (header_len,) = struct.unpack("<I", raw[8:12])
        assert len(raw) - 12 - header_len == 30 * 768 * 4

    def test_properties_and_header_content(self, tmp_path):
        m = make_matrix(np.arange(12).reshape(3, 4), rate=25.0, tag="av", layer=3)
        assert (m.frames, m.dim) == (3, 4)
        path = tmp_path / "m.fdt"
        write_feature_file(m, path)
        raw = path.read_bytes()
        (header_len,) = struct.unpack("<I", raw[8:12])
        header = json.loads(raw[12 : 12 + header_len])
        assert header == {
            "utterance_id": "utt1",
            "frame_rate_hz": 25.0,
            "dim": 4,
            "frames": 3,
            "encoder_tag": "av",
            "layer": 3,
        }

    def test_nan_rejected_and_no_file_written(self, tmp_path):
        m = make_matrix([[1.0, float("nan")]])
        path = tmp_path / "bad.fdt"
        with pytest.raises(ValidationError):
            write_feature_file(m, path)
        assert not path.exists()

    def test_truncated_payload(self, tmp_path):
        m = make_matrix(np.ones((4, 3)))
        path = tmp_path / "m.fdt"
        write_feature_file(m, path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError, match="payload truncated"):
            read_feature_file(path)

    def test_oversized_payload(self, tmp_path):
        m = make_matrix(np.ones((4, 3)))
        path = tmp_path / "m.fdt"
        write_feature_file(m, path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="longer"):
            read_feature_file(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.fdt"
        path.write_bytes(b"NOTFDT00" + b"\x00" * 20)
        with pytest.raises(FormatError, match="magic"):
            read_feature_file(path)

    def test_non_positive_frame_rate_in_header(self, tmp_path):
        m = make_matrix(np.ones((2, 2)))
        path = tmp_path / "m.fdt"
        write_feature_file(m, path)
        raw = path.read_bytes()
        (header_len,) = struct.unpack("<I", raw[8:12])
        header = json.loads(raw[12 : 12 + header_len])
        header["frame_rate_hz"] = 0
        blob = json.dumps(header, sort_keys=True).encode()
        path.write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob + raw[12 + header_len :])
        with pytest.raises(FormatError, match="non-positive frame rate"):
            read_feature_file(path)

    def test_header_not_json(self, tmp_path):
        path = tmp_path / "m.fdt"
        path.write_bytes(MAGIC + struct.pack("<I", 4) + b"{{{{" + b"\x00" * 4)
        with pytest.raises(FormatError, match="JSON"):
            read_feature_file(path)

    def test_non_2d_data_rejected(self):
        with pytest.raises(ValidationError, match="2-D"):
            make_matrix(np.zeros(5))

    @settings(max_examples=40, deadline=None)
    @given(
        data=hnp.arrays(
            dtype=np.float32,
            shape=st.tuples(
                st.integers(min_value=1, max_value=8),
                st.integers(min_value=1, max_value=8),
            ),
            elements=st.floats(
                min_value=-1e6, max_value=1e6, allow_nan=False, width=32
            ),
        ),
        rate=st.sampled_from([25.0, 50.0, 100.0]),
        layer=st.one_of(st.none(), st.integers(min_value=0, max_value=24)),
    )
    def test_round_trip_is_bit_exact(self, tmp_path_factory, data, rate, layer):
        m = make_matrix(data, rate=rate, layer=layer)
        path = tmp_path_factory.mktemp("fdt") / "m.fdt"
        write_feature_file(m, path)
        back = read_feature_file(path)
        assert back == m
        assert back.data.tobytes() == m.data.tobytes()


class TestAlignments:
    HEADER = "utterance_id\tphone\tonset_s\toffset_s"

    def write(self, tmp_path, rows):
        path = tmp_path / "ali.tsv"
        path.write_text("\n".join([self.HEADER, *rows]) + "\n")
        return path

    def test_stress_digits_stripped(self, tmp_path):
        path = self.write(tmp_path, ["utt1\tAH1\t0.48\t0.56"])
        records = read_alignments(path)
        assert records == [PhoneRecord("utt1", "AH", 0.48, 0.56)]

    def test_strip_stress_rules(self):
        assert strip_stress("AH0") == "AH"
        assert strip_stress("AH2") == "AH"
        assert strip_stress("AH") == "AH"
        assert strip_stress("1") == "1"

    def test_silence_markers_dropped(self, tmp_path):
        path = self.write(
            tmp_path,
            [
                "u\tsil\t0.0\t0.1",
                "u\tB\t0.1\t0.2",
                "u\tSP\t0.2\t0.3",
                "u\tspn\t0.3\t0.4",
            ],
        )
        assert [r.phone for r in read_alignments(path)] == ["B"]

    def test_sorted_by_utterance_then_onset(self, tmp_path):
        path = self.write(
            tmp_path,
            ["b\tK\t0.5\t0.6", "a\tT\t0.3\t0.4", "a\tB\t0.1\t0.2"],
        )
        records = read_alignments(path)
        assert [(r.utterance_id, r.phone) for r in records] == [
            ("a", "B"),
            ("a", "T"),
            ("b", "K"),
        ]

    def test_overlap_reported_with_pair(self, tmp_path):
        path = self.write(tmp_path, ["u\tB\t0.1\t0.3", "u\tT\t0.2\t0.4"])
        with pytest.raises(FormatError, match=r"overlap.*0\.1.*0\.3.*0\.2.*0\.4"):
            read_alignments(path)

    def test_touching_intervals_are_fine(self, tmp_path):
        path = self.write(tmp_path, ["u\tB\t0.1\t0.2", "u\tT\t0.2\t0.3"])
        assert len(read_alignments(path)) == 2

    def test_parse_error_carries_line_number(self, tmp_path):
        path = self.write(tmp_path, ["u\tB\t0.1\t0.2", "u\tT\tabc\t0.4"])
        with pytest.raises(FormatError, match="line 3"):
            read_alignments(path)

    def test_wrong_field_count(self, tmp_path):
        path = self.write(tmp_path, ["u\tB\t0.1"])
        with pytest.raises(FormatError, match="line 2.*4"):
            read_alignments(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "ali.tsv"
        path.write_text("utt\tphone\tstart\tend\n")
        with pytest.raises(FormatError, match="line 1"):
            read_alignments(path)

    def test_negative_onset_rejected(self, tmp_path):
        path = self.write(tmp_path, ["u\tB\t-0.1\t0.2"])
        with pytest.raises(FormatError, match="negative onset"):
            read_alignments(path)

    def test_empty_interval_rejected(self, tmp_path):
        path = self.write(tmp_path, ["u\tB\t0.2\t0.2"])
        with pytest.raises(FormatError, match="not after"):
            read_alignments(path)

    def test_write_read_round_trip(self, tmp_path):
        records = [
            PhoneRecord("u1", "AH", 0.48, 0.56),
            PhoneRecord("u1", "B", 0.56, 0.62),
            PhoneRecord("u2", "K", 0.0, 0.125),
        ]
        path = tmp_path / "ali.tsv"
        write_alignments(records, path)
        assert read_alignments(path) == records
