"""Dense-tableau simplex on exact rationals.

Only the form needed here is supported: maximize ``c @ y`` subject to
``A @ y <= b`` and ``y >= 0`` with ``b >= 0``, so the slack basis is
feasible and no phase one is required. Bland's rule prevents cycling.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class UnboundedLP(ArithmeticError):
    pass


@dataclass(frozen=True)
class LPSolution:
    value: Fraction
    x: tuple[Fraction, ...]
    duals: tuple[Fraction, ...]


def maximize(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LPSolution:
    m, n = len(A), len(c)
    c = [Fraction(v) for v in c]
    b = [Fraction(v) for v in b]
    if any(v < 0 for v in b):
        raise ValueError("right-hand side must be non-negative")
    # rows: [A | I | b]; objective row holds reduced costs (-c for maximization)
    rows = [[Fraction(v) for v in A[i]] + [Fraction(int(i == j)) for j in range(m)] + [b[i]] for i in range(m)]
    obj = [-v for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]
    width = n + m
    while True:
        col = next((j for j in range(width) if obj[j] < 0), None)
        if col is None:
            break
        best = None
        for i in range(m):
            a = rows[i][col]
            if a > 0:
                ratio = rows[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise UnboundedLP("objective is unbounded")
        r = best[1]
        piv = rows[r][col]
        if piv != 1:
            rows[r] = [v / piv for v in rows[r]]
        prow = rows[r]
        for i in range(m):
            if i != r:
                f = rows[i][col]
                if f:
                    row = rows[i]
                    rows[i] = [row[j] - f * prow[j] for j in range(width + 1)]
        f = obj[col]
        obj = [obj[j] - f * prow[j] for j in range(width + 1)]
        basis[r] = col
    x = [Fraction(0)] * width
    for i, j in enumerate(basis):
        x[j] = rows[i][-1]
    return LPSolution(obj[-1], tuple(x[:n]), tuple(obj[n : n + m]))
