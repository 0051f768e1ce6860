import pytest

from patchline.lookup import (LookupFormatError, din_lookup, erg_lookup,
                              load_din_csv, load_erg_csv, match_ocr_text)

DEMO_KEYWORDS = ["DIN 00261998", "8.4%", "Sodium", "Bicarbonate", "50 mEq", "50 ml"]


@pytest.fixture(scope="module")
def erg(fixtures):
    return load_erg_csv(fixtures / "erg.csv")


@pytest.fixture(scope="module")
def din(fixtures):
    return load_din_csv(fixtures / "din.csv")


@pytest.fixture(scope="module")
def ocr_demo_raw(fixtures):
    return (fixtures / "ocr_demo_raw.txt").read_text(encoding="utf-8").strip()


def test_erg_fixture_entry(erg):
    entry = erg_lookup(erg, "1203")
    assert entry is not None
    assert entry.material == "Gasoline"
    assert entry.guide_number == "128"
    assert entry.guidance


def test_erg_absent_placard(erg):
    assert erg_lookup(erg, "0000") is None


@pytest.mark.parametrize("bad", ["12a3", "123", "12345", "", "12 3"])
def test_erg_malformed_number_is_format_error(erg, bad):
    with pytest.raises(LookupFormatError):
        erg_lookup(erg, bad)


def test_din_fixture_entry_with_prefix(din):
    entry = din_lookup(din, "DIN 00261998")
    assert entry is not None
    assert list(entry.keywords) == DEMO_KEYWORDS
    assert entry.drug == "Sodium Bicarbonate"


def test_din_absent(din):
    assert din_lookup(din, "00000000") is None


@pytest.mark.parametrize("bad", ["123", "DIN 123", "0026199X", ""])
def test_din_malformed_is_format_error(din, bad):
    with pytest.raises(LookupFormatError):
        din_lookup(din, bad)


def test_match_raw_fixture_scores_five_of_six(din, ocr_demo_raw):
    match = match_ocr_text(din, ocr_demo_raw)
    assert match.entry is not None and match.entry.din == "00261998"
    assert len(match.raw_metrics.found) == 5
    assert match.raw_metrics.missed == ["Bicarbonate"]
    assert match.raw_metrics.percent == 83.33


def test_match_rescoring_recovers_the_missed_keyword(din, ocr_demo_raw):
    match = match_ocr_text(din, ocr_demo_raw)
    assert len(match.rescored_metrics.found) == 6
    assert match.rescored_metrics.missed == []
    assert match.rescored_metrics.percent == 100.0
    assert "Bicarbonate" in match.rescored_text


def test_match_without_din_token_uses_keyword_hits(din, ocr_demo_raw):
    # strip the DIN so the fallback path picks the entry by keyword count
    text = ocr_demo_raw.replace("DIN 00261998", "")
    match = match_ocr_text(din, text)
    assert match.entry is not None and match.entry.din == "00261998"


def test_match_empty_text(din):
    match = match_ocr_text(din, "   ")
    assert match.entry is None
    assert match.raw_metrics is None


def test_match_gibberish_has_no_entry(din):
    match = match_ocr_text(din, "zz qq ww")
    assert match.entry is None


def test_rescoring_never_loses_keywords(din, ocr_demo_raw):
    for text in (ocr_demo_raw, ocr_demo_raw.lower(), "Sodium 50 mEq", "epinephrine 1 mg/10 ml"):
        match = match_ocr_text(din, text)
        if match.entry is None:
            continue
        assert len(match.rescored_metrics.found) >= len(match.raw_metrics.found)


def test_registries_reject_duplicates(tmp_path):
    path = tmp_path / "erg.csv"
    path.write_text("placard,guide,material,guidance\n"
                    "1203,128,A,x\n1203,111,B,y\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_erg_csv(path)
