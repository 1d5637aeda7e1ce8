import pytest
from utils.text import (
    format_complex,
    format_float,
    parse_bool,
    parse_key_value,
    parse_optional_float,
    split_list,
    strip_comment,
)


def test_strip_comment():
    assert strip_comment("grid.m = 512  # finer") == "grid.m = 512"
    assert strip_comment("   # only a comment") == ""


@pytest.mark.parametrize(
    "line, expected",
    [
        ("grid.m = 512", ("grid.m", "512")),
        ("optimizer.n_values=1, 3, 5", ("optimizer.n_values", "1, 3, 5")),
        ("run.kernel_file = out/kernel.json  # calibrated", ("run.kernel_file", "out/kernel.json")),
        ("trap.lambda3 =", ("trap.lambda3", "")),
        ("", None),
        ("# comment", None),
    ],
)
def test_parse_key_value(line, expected):
    assert parse_key_value(line) == expected


def test_parse_key_value_reports_line_number():
    with pytest.raises(ValueError, match="line 7"):
        parse_key_value("grid m 512", 7)


@pytest.mark.parametrize(
    "text, expected",
    [("true", True), ("On", True), (" 1 ", True), ("no", False), ("OFF", False)],
)
def test_parse_bool(text, expected):
    assert parse_bool(text) is expected


def test_parse_bool_rejects_other_words():
    with pytest.raises(ValueError):
        parse_bool("maybe")


def test_parse_optional_float():
    assert parse_optional_float("none") is None
    assert parse_optional_float("  ") is None
    assert parse_optional_float("-0.5") == -0.5
    with pytest.raises(ValueError):
        parse_optional_float("half")


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1, 3,5", ["1", "3", "5"]),
        ("[0.05, 5]", ["0.05", "5"]),
        ("(on, off)", ["on", "off"]),
        ("[]", []),
        ("2", ["2"]),
    ],
)
def test_split_list(text, expected):
    assert split_list(text) == expected


def test_number_formatting():
    assert format_float(0.1) == "0.1"
    assert format_float(1 / 3) == "0.333333333333"
    assert format_float(1e-6) == "1e-06"
    assert format_complex(0.5 - 0.25j) == "0.5-0.25j"
    assert format_complex(-1 + 0j) == "-1+0j"
