"""Exact rational parsing and printing.

All arithmetic in this package runs on :class:`fractions.Fraction`, which is
always stored reduced with a positive denominator.  The two helpers here fix
the textual interchange format: a rational prints as a terminating decimal
whenever its reduced denominator is of the form 2^a * 5^b ("1026.048"), and
as "num/den" otherwise ("1/3").  Both forms, plus plain integers, parse back.
"""

from __future__ import annotations

import re
from fractions import Fraction

_RAT_RE = re.compile(r"^[+-]?(\d+(\.\d+)?|\.\d+|\d+/\d+)$")


def parse_rational(text: str) -> Fraction:
    """Parse "3", "-1.002" or "501/500" into an exact Fraction."""
    text = text.strip()
    if not _RAT_RE.match(text):
        raise ValueError(f"malformed rational: {text!r}")
    if "/" in text:
        num, den = text.split("/")
        if int(den) == 0:
            raise ValueError(f"malformed rational (zero denominator): {text!r}")
    return Fraction(text)


def format_rational(value: Fraction) -> str:
    """Render exactly: decimal when the denominator divides a power of ten."""
    value = Fraction(value)
    den = value.denominator
    if den == 1:
        return str(value.numerator)
    two, five = 0, 0
    while den % 2 == 0:
        den //= 2
        two += 1
    while den % 5 == 0:
        den //= 5
        five += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(two, five)
    scaled = value.numerator * 10**digits // value.denominator
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled)).rjust(digits + 1, "0")
    whole, frac = text[:-digits], text[-digits:]
    frac = frac.rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"
