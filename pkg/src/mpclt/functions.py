"""Registry of C^4 test functions with analytic derivatives up to order four."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TestFunction:
    """A function with derivatives ``d1..d4`` on ``(domain_low, inf)``.

    ``low_inclusive`` says whether ``domain_low`` itself may be evaluated
    (needed for the atom at zero when ``y > 1``).
    """

    __test__ = False  # not a pytest class

    name: str
    eval: Fn
    d1: Fn
    d2: Fn
    d3: Fn
    d4: Fn
    domain_low: float = -math.inf
    low_inclusive: bool = False
    params: tuple = field(default=())

    def __call__(self, x):
        return self.eval(x)

    def derivative(self, order: int) -> Fn:
        if order == 0:
            return self.eval
        return (self.d1, self.d2, self.d3, self.d4)[order - 1]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if self.low_inclusive:
            return bool(np.all(x >= self.domain_low))
        return bool(np.all(x > self.domain_low))

    def validate_interval(self, lo: float, hi: float):
        """Reject intervals that touch the edge of the function's domain.

        The CLT needs ``f`` to be C^4 on an open set around ``[lo, hi]``.
        """
        if not lo > self.domain_low:
            raise DomainError(
                f"{self.name} is not C^4 on an open interval around [{lo}, {hi}] "
                f"(domain starts at {self.domain_low})"
            )


def _const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=np.result_type(x, float)), c)


def _poly(deg: int) -> TestFunction:
    derivs = []
    for k in range(5):
        if k > deg:
            derivs.append(_const(0.0))
        else:
            coef = math.perm(deg, k)
            p = deg - k
            derivs.append(
                (lambda c, q: (lambda x: c * np.asarray(x) ** q))(coef, p)
                if p > 0
                else _const(float(coef))
            )
    return TestFunction(f"poly{deg}", *derivs, params=(deg,))


def _power(r: float) -> TestFunction:
    if not r > 0:
        raise DomainError(f"power(r) needs r > 0, got {r}")
    coefs = [1.0]
    for k in range(4):
        coefs.append(coefs[-1] * (r - k))
    derivs = [(lambda c, q: (lambda x: c * np.asarray(x, dtype=float) ** q))(coefs[k], r - k) for k in range(5)]
    name = f"power({r:g})"
    return TestFunction(name, *derivs, domain_low=0.0, low_inclusive=True, params=(r,))


def _log() -> TestFunction:
    return TestFunction(
        "log",
        np.log,
        lambda x: 1.0 / np.asarray(x),
        lambda x: -1.0 / np.asarray(x) ** 2,
        lambda x: 2.0 / np.asarray(x) ** 3,
        lambda x: -6.0 / np.asarray(x) ** 4,
        domain_low=0.0,
    )


def _exp() -> TestFunction:
    return TestFunction("exp", np.exp, np.exp, np.exp, np.exp, np.exp)


_FIXED = {
    "poly1": lambda: _poly(1),
    "poly2": lambda: _poly(2),
    "poly3": lambda: _poly(3),
    "poly4": lambda: _poly(4),
    "log": _log,
    "exp": _exp,
}

_POWER_RE = re.compile(r"^power\(\s*([0-9.eE+-]+)\s*\)$")

NAMES = tuple(_FIXED) + ("power(r)",)


def builtin(name: str) -> TestFunction:
    """Look up a registry function by name, e.g. ``"poly2"``, ``"log"``, ``"power(2.5)"``."""
    name = name.strip()
    if name in _FIXED:
        return _FIXED[name]()
    m = _POWER_RE.match(name)
    if m:
        return _power(float(m.group(1)))
    raise DomainError(f"unknown test function {name!r}; known: {', '.join(NAMES)}")


def constant(c: float) -> TestFunction:
    z = _const(0.0)
    return TestFunction(f"const({c:g})", _const(float(c)), z, z, z, z, params=(c,))


def combine(terms, name=None) -> TestFunction:
    """Linear combination ``sum(coef * f)`` of ``(coef, TestFunction)`` pairs."""
    terms = list(terms)

    def lin(order):
        return lambda x: sum(c * f.derivative(order)(x) for c, f in terms)

    low = max(f.domain_low for _, f in terms)
    incl = all(f.low_inclusive or f.domain_low < low for _, f in terms)
    label = name or " + ".join(f"{c:g}*{f.name}" for c, f in terms)
    return TestFunction(label, *(lin(k) for k in range(5)), domain_low=low, low_inclusive=incl)


def check_derivatives(f: TestFunction, interval, points: int = 100) -> dict:
    """Compare ``d1..d4`` against central differences of the next-lower derivative.

    Uses the five-point stencil with a step scaled to ``|x|``. Returns the
    maximum deviation per order, measured relative to ``max(1, |d_k|)``.
    """
    lo, hi = map(float, interval)
    if not f.contains(lo):
        raise DomainError(f"interval [{lo}, {hi}] is outside the domain of {f.name}")
    x = np.linspace(lo, hi, points + 2)[1:-1]
    h = 1e-3 * np.maximum(1.0, np.abs(x))
    h = np.minimum(h, 0.5 * (x - f.domain_low)) if math.isfinite(f.domain_low) else h
    report = {}
    for k in range(1, 5):
        g = f.derivative(k - 1)
        fd = (g(x - 2 * h) - 8 * g(x - h) + 8 * g(x + h) - g(x + 2 * h)) / (12 * h)
        exact = np.asarray(f.derivative(k)(x), dtype=float)
        report[f"d{k}"] = float(np.max(np.abs(exact - fd) / np.maximum(1.0, np.abs(exact))))
    report["max"] = max(report.values())
    return report
