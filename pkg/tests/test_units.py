import pytest

from hspr import ConfigurationError, quantity_parser
from hspr.units import QuantityParser


@pytest.mark.parametrize(
    "text,meters",
    [
        ("100 nm", 100e-9),
        ("3.45 um", 3.45e-6),
        ("3.45 µm", 3.45e-6),
        ("16mm", 16e-3),
        ("1.5 cm", 1.5e-2),
        ("1.5e-6 m", 1.5e-6),
        ("  680nm ", 680e-9),
        ("-2 nm", -2e-9),
        ("0.5", 0.5),
    ],
)
def test_parse_quantity(text, meters):
    assert quantity_parser.parse(text) == pytest.approx(meters, rel=1e-12)


def test_numbers_are_meters():
    assert quantity_parser.parse(16e-3) == 16e-3
    assert quantity_parser.parse(2) == 2.0
    assert isinstance(quantity_parser.parse(2), float)


@pytest.mark.parametrize("value", ["16 parsecs", "nm", "", "1 2 nm", None])
def test_bad_quantity(value):
    with pytest.raises(ConfigurationError):
        quantity_parser.parse(value)


def test_bool_is_not_a_quantity():
    with pytest.raises(ConfigurationError):
        quantity_parser.parse(True)


def test_parse_is_cached():
    parser = QuantityParser()
    assert parser.parse("7 um") == pytest.approx(7e-6)
    assert len(parser._cached) == 1
    assert parser.parse("7 um") == pytest.approx(7e-6)
    assert len(parser._cached) == 1
