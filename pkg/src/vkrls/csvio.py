"""Complex CSV: comma-separated tokens ``a``, ``a+bi`` or ``a-bi``.

Values are written with 17 significant digits, so a write/read cycle
reproduces every double exactly.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

_FLOAT = r"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?|inf|nan"
_TOKEN = re.compile(
    rf"^(?P<re>[+-]?(?:{_FLOAT}))(?:(?P<im>[+-](?:{_FLOAT}))i)?$|^(?P<pim>[+-]?(?:{_FLOAT}))i$",
    re.IGNORECASE,
)


class CSVParseError(ValueError):
    pass


def parse_token(tok: str) -> complex:
    m = _TOKEN.match(tok.strip())
    if m is None:
        raise CSVParseError(f"cannot parse {tok!r} as a complex number")
    if m.group("pim") is not None:
        return complex(0.0, float(m.group("pim")))
    im = m.group("im")
    return complex(float(m.group("re")), float(im) if im is not None else 0.0)


def format_number(z) -> str:
    z = complex(z)
    re_s = _fmt(z.real)
    if z.imag == 0 and not math.copysign(1.0, z.imag) < 0:
        return re_s
    im_s = _fmt(z.imag)
    if not im_s.startswith("-"):
        im_s = "+" + im_s
    return f"{re_s}{im_s}i"


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def loads(text: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([parse_token(t) for t in line.split(",")])
        except CSVParseError as exc:
            raise CSVParseError(f"line {lineno}: {exc}") from None
    if not rows:
        raise CSVParseError("no data")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise CSVParseError("rows have different lengths")
    return np.array(rows, dtype=complex)


def dumps(A) -> str:
    A = np.atleast_2d(np.asarray(A))
    return "".join(",".join(format_number(v) for v in row) + "\n" for row in A)


def read_matrix(path) -> np.ndarray:
    return loads(Path(path).read_text())


def read_vector(path) -> np.ndarray:
    A = read_matrix(path)
    if A.shape[0] != 1 and A.shape[1] != 1:
        raise CSVParseError(f"{path}: expected a single row or column, got {A.shape}")
    return A.ravel()


def write_matrix(path, A):
    Path(path).write_text(dumps(A))


def real_if_possible(A, what="matrix") -> np.ndarray:
    """Drop exactly-zero imaginary parts; raise if any are nonzero."""
    A = np.asarray(A)
    if np.any(A.imag != 0):
        raise CSVParseError(f"{what} must be real")
    return A.real.copy()
