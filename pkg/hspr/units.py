"""Parse length quantities such as "100 nm" or "3.45 um" into meters"""
import hashlib
import numbers

from lark import Lark, v_args, Transformer
from lark.exceptions import LarkError

from .exceptions import ConfigurationError

# meters per unit
UNIT_SCALES = {
    "nm": 1e-9,
    "um": 1e-6,
    "µm": 1e-6,
    "mm": 1e-3,
    "cm": 1e-2,
    "m": 1.0,
}


@v_args(inline=True)
class QuantityTransformer(Transformer):
    """Lark transformer to turn a quantity tree into meters"""

    def quantity(self, number, unit=None):
        """Scale the number by its unit, meters if the unit is omitted"""
        scale = UNIT_SCALES[str(unit)] if unit is not None else 1.0
        return float(number) * scale


class QuantityParser:
    """Parser for length quantities

    Attributes:
        GRAMMER (str): The Lark grammer for a quantity
        TRANSFORMER (lark.Transformer): Transforms the tree into meters
    """

    GRAMMER = r"""
        ?start: quantity

        quantity: SIGNED_NUMBER [UNIT]

        // longer units first, the regex alternation is ordered
        UNIT: /nm|um|µm|mm|cm|m/

        %import common.SIGNED_NUMBER
        %import common.WS_INLINE
        %ignore WS_INLINE
    """
    TRANSFORMER = QuantityTransformer()

    def __init__(self):
        self._cached = {}
        self._lark = None

    def _parse(self, text):
        if self._lark is None:
            self._lark = Lark(self.GRAMMER, parser="lalr")
        tree = self._lark.parse(text.strip())
        return self.TRANSFORMER.transform(tree)

    def parse(self, value):
        """Parse a quantity into meters

        Args:
            value (str|int|float): "680 nm", "3.45 um", "16mm" or a plain
                number, which is taken as meters

        Returns:
            float: The length in meters

        Raises:
            ConfigurationError: If the text is not a length quantity
        """
        if isinstance(value, bool):
            raise ConfigurationError(f"Not a length quantity: {value!r}")
        if isinstance(value, numbers.Real):
            return float(value)
        if not isinstance(value, str):
            raise ConfigurationError(f"Not a length quantity: {value!r}")

        cache_key = hashlib.sha256(value.encode()).hexdigest()
        if cache_key in self._cached:
            return self._cached[cache_key]

        try:
            parsed = self._parse(value)
        except LarkError as ex:
            raise ConfigurationError(
                f"Not a length quantity: {value!r}"
            ) from ex

        self._cached[cache_key] = parsed
        return parsed


quantity_parser = QuantityParser()
