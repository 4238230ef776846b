"""
Utility functions for fracplace.
"""

import math
from typing import Iterable, List


def format_number(value: float, digits: int = 4) -> str:
    """
    Format a number with a fixed count of significant digits.

    Args:
        value: Number to format
        digits: Significant digits (4 for human output, 17 for machine output)

    Returns:
        Formatted number string
    """
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if math.isnan(value) or math.isinf(value):
        return str(value)
    text = f"{value:.{digits}g}"
    return "0" if text in ("-0", "0") else text


def format_vector(values: Iterable[float], digits: int = 4) -> str:
    """
    Format a vector as ``(a, b, c)``.

    Args:
        values: Numbers to format
        digits: Significant digits per entry

    Returns:
        Formatted vector string
    """
    return "(" + ", ".join(format_number(v, digits) for v in values) + ")"


def parse_number_list(text: str) -> List[float]:
    """
    Parse a comma separated list of numbers.

    Args:
        text: Text such as ``"0, 0.5,1"``

    Returns:
        Parsed numbers in input order

    Raises:
        ValueError: If any item is not a number
    """
    items = [item.strip() for item in text.split(",")]
    return [float(item) for item in items if item]

