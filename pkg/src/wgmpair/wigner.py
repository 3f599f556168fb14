"""Wigner 3j symbols and Gaunt coefficients.

Small angular momenta use the Racah sum in exact integer arithmetic, so the
only rounding is the final square root.  Above EXACT_J_LIMIT the factorials
grow too large to be practical and the symbol is taken from the three-term
recursion in j1 (Schulten & Gordon 1975), run forward from j1_min and
backward from j1_max and joined in the middle, then fixed by the
normalization sum over j1 and the known sign at j1_max.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError

EXACT_J_LIMIT = 60


def _triangle(j1, j2, j3) -> bool:
    return abs(j1 - j2) <= j3 <= j1 + j2


def _allowed(j1, j2, j3, m1, m2, m3) -> bool:
    if m1 + m2 + m3 != 0:
        return False
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return False
    return _triangle(j1, j2, j3)


@lru_cache(maxsize=4096)
def _racah(j1, j2, j3, m1, m2, m3) -> float:
    f = math.factorial
    pre = Fraction(f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3), f(j1 + j2 + j3 + 1))
    pre *= (f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3))
    kmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    kmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (f(k) * f(j3 - j2 + k + m1) * f(j3 - j1 + k - m2)
               * f(j1 + j2 - j3 - k) * f(j1 - k - m1) * f(j2 - k + m2))
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    sign = (-1) ** (j1 - j2 - m3) * (1 if total > 0 else -1)
    return sign * math.sqrt(total * total * pre)


def three_j_series(j2: int, j3: int, m2: int, m3: int) -> tuple[int, np.ndarray]:
    """All symbols (j1 j2 j3; -m2-m3 m2 m3) for allowed j1, via recursion.

    Returns (j1_min, values) with values[k] belonging to j1 = j1_min + k.
    """
    m1 = -m2 - m3
    jmin = max(abs(j2 - j3), abs(m1))
    jmax = j2 + j3
    count = jmax - jmin + 1
    if count <= 0 or abs(m2) > j2 or abs(m3) > j3:
        return jmin, np.zeros(0)
    if count == 1:
        return jmin, np.array([(-1) ** (j2 - j3 - m1) / math.sqrt(2 * jmin + 1)])

    def A(j):
        return math.sqrt(max(0.0, (j * j - (j2 - j3) ** 2) * ((j2 + j3 + 1) ** 2 - j * j)
                             * (j * j - m1 * m1)))

    def B(j):
        return -(2 * j + 1) * (j2 * (j2 + 1) * m1 - j3 * (j3 + 1) * m1 - j * (j + 1) * (m3 - m2))

    js = np.arange(jmin, jmax + 1)
    # Short series are run forward only; longer ones meet in the middle.
    mid = jmin + count // 2 if count > 8 else jmax

    fwd = np.zeros(count)
    fwd[0] = 1.0
    if jmin == 0:
        # j2 == j3 and m1 == 0: the j=0 recursion is empty, seed j=1 from the
        # closed forms (0 J J; 0 m -m) and (1 J J; 0 m -m).
        fwd[1] = m2 / math.sqrt(j2 * (j2 + 1)) if j2 > 0 else 0.0
        start = 1
    else:
        fwd[1] = -B(jmin) / (jmin * A(jmin + 1))
        start = 1
    for k in range(start, min(mid - jmin + 2, count - 1)):
        j = jmin + k
        fwd[k + 1] = -(B(j) * fwd[k] + (j + 1) * A(j) * fwd[k - 1]) / (j * A(j + 1))
        if abs(fwd[k + 1]) > 1e150:
            fwd[: k + 2] *= 1e-150

    if mid == jmax:
        out = fwd
        norm = math.sqrt(float(np.sum((2 * js + 1) * out * out)))
        out = out / norm
        sign = (-1) ** (j2 - j3 - m1)
        return jmin, out if np.sign(out[-1]) == sign else -out

    bwd = np.zeros(count)
    bwd[-1] = 1.0
    bwd[-2] = -B(jmax) / ((jmax + 1) * A(jmax))
    for k in range(count - 2, max(mid - jmin - 2, 0), -1):
        j = jmin + k
        bwd[k - 1] = -(B(j) * bwd[k] + j * A(j + 1) * bwd[k + 1]) / ((j + 1) * A(j))
        if abs(bwd[k - 1]) > 1e150:
            bwd[k - 1:] *= 1e-150

    # Join on a small window around mid by least squares.
    lo = max(mid - jmin - 2, 1)
    hi = min(mid - jmin + 2, count - 2)
    w = slice(lo, hi + 1)
    den = float(np.dot(fwd[w], fwd[w]))
    scale = float(np.dot(fwd[w], bwd[w])) / den if den > 0 else 0.0
    out = bwd.copy()
    out[:lo] = fwd[:lo] * scale
    norm = math.sqrt(float(np.sum((2 * js + 1) * out * out)))
    out /= norm
    sign = (-1) ** (j2 - j3 - m1)
    if np.sign(out[-1]) != sign:
        out = -out
    return jmin, out


def wigner_3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3j symbol for integer arguments."""
    if min(j1, j2, j3) < 0:
        raise DomainError("angular momenta must be non-negative")
    if not _allowed(j1, j2, j3, m1, m2, m3):
        return 0.0
    if max(j1, j2, j3) <= EXACT_J_LIMIT:
        return _racah(j1, j2, j3, m1, m2, m3)
    jmin, vals = three_j_series(j2, j3, m2, m3)
    return float(vals[j1 - jmin])


def _check_lm(l, m):
    if l < 0 or abs(m) > l:
        raise DomainError(f"invalid spherical harmonic indices l={l}, m={m}")


def gaunt(l1: int, m1: int, l2: int, m2: int, l3: int, m3: int) -> float:
    """Integral of Y_{l1 m1} Y_{l2 m2} Y*_{l3 m3} over the unit sphere."""
    for l, m in ((l1, m1), (l2, m2), (l3, m3)):
        _check_lm(l, m)
    if m1 + m2 != m3 or (l1 + l2 + l3) % 2 or not _triangle(l1, l2, l3):
        return 0.0
    pre = math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / (4 * math.pi))
    return ((-1) ** m3 * pre * wigner_3j(l1, l2, l3, 0, 0, 0)
            * wigner_3j(l1, l2, l3, m1, m2, -m3))
