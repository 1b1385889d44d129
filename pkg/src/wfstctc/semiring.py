"""Log and tropical semirings over natural-log probabilities.

Weights are plain floats: ``0.0`` is probability one and ``-inf`` is
probability zero. Higher is more likely in both semirings.
"""

import math

NEG_INF = float("-inf")


def log_add(a: float, b: float) -> float:
    """Stable ``log(exp(a) + exp(b))`` with exact handling of ``-inf``."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def log_sum(values) -> float:
    total = NEG_INF
    for v in values:
        total = log_add(total, v)
    return total


class LogSemiring:
    zero = NEG_INF
    one = 0.0

    @staticmethod
    def plus(a: float, b: float) -> float:
        return log_add(a, b)

    @staticmethod
    def times(a: float, b: float) -> float:
        if a == NEG_INF or b == NEG_INF:
            return NEG_INF
        return a + b


class TropicalSemiring:
    """Max-plus (Viterbi) semiring in the log-probability domain."""

    zero = NEG_INF
    one = 0.0

    @staticmethod
    def plus(a: float, b: float) -> float:
        return a if a >= b else b

    @staticmethod
    def times(a: float, b: float) -> float:
        if a == NEG_INF or b == NEG_INF:
            return NEG_INF
        return a + b


def weights_close(a: float, b: float, tol: float = 1e-9) -> bool:
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= tol
