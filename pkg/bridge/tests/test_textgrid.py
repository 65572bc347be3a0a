"""TextGrid phone-tier conversion."""

from __future__ import annotations

import pytest

from featbridge import MediaError, phone_records_from_textgrid

from conftest import textgrid_text


class TestConversion:
    def test_extracts_phone_intervals(self):
        text = textgrid_text(
            [(0.0, 0.2, ""), (0.2, 0.45, "AH0"), (0.45, 0.8, "K"), (0.8, 1.0, "")],
            xmax=1.0,
        )
        records = phone_records_from_textgrid(text, "u1")
        assert [(r.phone, r.onset_s, r.offset_s) for r in records] == [
            ("AH0", 0.2, 0.45),
            ("K", 0.45, 0.8),
        ]
        assert all(r.utterance_id == "u1" for r in records)

    def test_labels_kept_verbatim(self):
        # Stress digits survive conversion; the consumer strips them.
        text = textgrid_text([(0.0, 0.5, "IY1")], xmax=0.5)
        records = phone_records_from_textgrid(text, "u")
        assert records[0].phone == "IY1"

    def test_skips_words_tier(self):
        text = textgrid_text([(0.0, 0.5, "K")], xmax=0.5, extra_tier=True)
        records = phone_records_from_textgrid(text, "u")
        assert [r.phone for r in records] == ["K"]

    def test_single_tier_file(self):
        text = textgrid_text([(0.0, 0.5, "K")], xmax=0.5, extra_tier=False)
        assert len(phone_records_from_textgrid(text, "u")) == 1

    def test_doubled_quote_escape(self):
        text = textgrid_text([(0.0, 0.5, 'A""B')], xmax=0.5)
        records = phone_records_from_textgrid(text, "u")
        assert records[0].phone == 'A"B'

    def test_whitespace_only_text_is_a_gap(self):
        text = textgrid_text([(0.0, 0.5, "  "), (0.5, 1.0, "K")], xmax=1.0)
        assert [r.phone for r in phone_records_from_textgrid(text, "u")] == ["K"]

    def test_custom_tier_name(self):
        text = textgrid_text([(0.0, 0.5, "K")], xmax=0.5, extra_tier=True)
        records = phone_records_from_textgrid(text, "u", tier_name="words")
        assert [r.phone for r in records] == ["speech"]


class TestErrors:
    def test_not_a_textgrid(self):
        with pytest.raises(MediaError, match="not a TextGrid"):
            phone_records_from_textgrid("hello\nworld\n", "u")

    def test_missing_phones_tier(self):
        text = textgrid_text([(0.0, 0.5, "K")], xmax=0.5)
        text = text.replace('"phones"', '"segments"')
        with pytest.raises(MediaError, match="no interval tier named 'phones'"):
            phone_records_from_textgrid(text, "u")

    def test_empty_interval_rejected(self):
        text = textgrid_text([(0.5, 0.5, "K")], xmax=0.5)
        with pytest.raises(MediaError, match="empty interval"):
            phone_records_from_textgrid(text, "u")

    def test_overlap_rejected(self):
        text = textgrid_text([(0.0, 0.6, "K"), (0.5, 1.0, "AH")], xmax=1.0)
        with pytest.raises(MediaError, match="overlap"):
            phone_records_from_textgrid(text, "u")

    def test_interval_missing_field(self):
        text = textgrid_text([(0.0, 0.5, "K")], xmax=0.5)
        text = "\n".join(
            line for line in text.splitlines() if "text =" not in line
        )
        with pytest.raises(MediaError, match="lacks text"):
            phone_records_from_textgrid(text, "u")

    def test_bad_number(self):
        text = textgrid_text([(0.0, 0.5, "K")], xmax=0.5)
        text = text.replace("xmin = 0.0 ", "xmin = zero ")
        with pytest.raises(MediaError, match="bad value"):
            phone_records_from_textgrid(text, "u")
