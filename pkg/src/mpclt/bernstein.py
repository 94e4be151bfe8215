"""Bernstein polynomial approximation after an affine rescaling.

A function on ``[a_l, b_r]`` is pulled back to the unit interval by
``u = L x + c`` which sends ``[a_l, b_r]`` onto ``[eps, 1 - eps]``. The
Bernstein sum samples the pulled-back function at ``k / m`` for all
``k = 0..m``, so the function must be defined on the preimage of ``[0, 1]``,
which is wider than ``[a_l, b_r]`` by ``eps / L`` on each side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError
from .functions import TestFunction

DEFAULT_EPS = 0.25


@dataclass(frozen=True)
class AffineMap:
    a_l: float
    b_r: float
    eps: float

    def __post_init__(self):
        if not self.a_l < self.b_r:
            raise DomainError(f"need a_l < b_r, got [{self.a_l}, {self.b_r}]")
        if not 0.0 < self.eps < 0.5:
            raise DomainError(f"eps must lie in (0, 1/2), got {self.eps}")

    @property
    def L(self) -> float:
        return (1.0 - 2.0 * self.eps) / (self.b_r - self.a_l)

    @property
    def c(self) -> float:
        return ((self.a_l + self.b_r) * self.eps - self.a_l) / (self.b_r - self.a_l)

    def forward(self, x):
        return self.L * x + self.c

    def inverse(self, u):
        return (u - self.c) / self.L

    @property
    def sample_range(self):
        """Preimage of ``[0, 1]``: where the approximated function is sampled."""
        return self.inverse(0.0), self.inverse(1.0)


def default_interval(a: float, b: float):
    """Endpoints ``0 < a_l < a < b < b_r`` bracketing the support."""
    width = b - a
    a_l = max(a / 2.0, a - 0.05 * width)
    if not a_l > 0:
        raise DomainError("support touches zero; no interval with a_l > 0 exists")
    return a_l, b + 0.05 * width


def fit_eps(f: TestFunction, a_l: float, b_r: float, eps: float = DEFAULT_EPS) -> float:
    """Largest ``eps' <= eps`` whose sampling range stays inside ``f``'s domain.

    Keeps the left sampling point at least halfway between the domain edge
    and ``a_l``.
    """
    if not math.isfinite(f.domain_low):
        return eps
    margin = 0.5 * (a_l - f.domain_low)
    if margin <= 0:
        raise DomainError(f"{f.name} is undefined at a_l={a_l}")
    # eps / L = eps (b_r - a_l) / (1 - 2 eps) <= margin
    return min(eps, margin / ((b_r - a_l) + 2.0 * margin))


def default_degree(n: int) -> int:
    """``floor(n ** (13/40))``; the matching strip half-width is ``m ** -0.5``."""
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    m = int(math.floor(n ** (13.0 / 40.0)))
    # guard the floor against n**0.325 landing a hair below an integer
    if (m + 1) ** 40 <= n**13:
        m += 1
    return m


def strip_halfwidth(m: int) -> float:
    return 1.0 / math.sqrt(m)


@dataclass(frozen=True, eq=False)
class BernsteinApprox:
    """Degree-``m`` polynomial in Bernstein form over ``map``.

    ``samples`` are the Bernstein coefficients; for :func:`build` these are
    the values ``f~(k/m)``.
    """

    m: int
    samples: np.ndarray
    map: AffineMap

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.shape != (self.m + 1,):
            raise DomainError(f"expected {self.m + 1} coefficients, got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def bound(self) -> float:
        """Max absolute coefficient (the constant ``M`` of the strip bound)."""
        return float(np.max(np.abs(self.samples)))

    def strip_bound(self) -> float:
        """``M exp(L^2 / eps)``, the limit of the strip bound as ``m`` grows."""
        return self.bound * math.exp(self.map.L**2 / self.map.eps)

    def __call__(self, x):
        if np.iscomplexobj(x):
            return evaluate_complex(self, x)
        return evaluate(self, x)

    def derivative(self) -> "BernsteinApprox":
        """Derivative with respect to ``x``, again in Bernstein form (degree ``m - 1``)."""
        if self.m == 0:
            return BernsteinApprox(0, np.zeros(1), self.map)
        coefs = self.m * self.map.L * np.diff(self.samples)
        return BernsteinApprox(self.m - 1, coefs, self.map)

    def __sub__(self, other):
        if other.m != self.m or other.map != self.map:
            raise DomainError("can only combine approximations of equal degree and map")
        return BernsteinApprox(self.m, self.samples - other.samples, self.map)

    def scaled(self, factor: float) -> "BernsteinApprox":
        return BernsteinApprox(self.m, factor * self.samples, self.map)


def _check_args(f, a_l, b_r, eps, m):
    if int(m) != m or m < 1:
        raise DomainError(f"degree m must be a positive integer, got {m}")
    amap = AffineMap(float(a_l), float(b_r), float(eps))
    lo, hi = amap.sample_range
    if not f.contains(lo):
        raise DomainError(
            f"{f.name} must be defined on the sampling range [{lo:.6g}, {hi:.6g}]; "
            "reduce eps (see fit_eps)"
        )
    return amap, np.arange(int(m) + 1) / int(m)


def build(f: TestFunction, a_l: float, b_r: float, eps: float, m: int) -> BernsteinApprox:
    """Bernstein approximation ``f_m`` of ``f`` on ``[a_l, b_r]``."""
    amap, nodes = _check_args(f, a_l, b_r, eps, m)
    samples = np.asarray(f(amap.inverse(nodes)), dtype=float)
    return BernsteinApprox(int(m), samples, amap)


def _h_tilde(f, amap, u):
    # u (1 - u) f~''(u), with f~'' = f'' / L^2 by the chain rule
    return u * (1.0 - u) * np.asarray(f.d2(amap.inverse(u)), dtype=float) / amap.L**2


def correction(f: TestFunction, a_l: float, b_r: float, eps: float, m: int) -> BernsteinApprox:
    """Bernstein approximation ``h_m`` of ``h(x) = u (1 - u) f~''(u)`` at ``u = L x + c``."""
    amap, nodes = _check_args(f, a_l, b_r, eps, m)
    return BernsteinApprox(int(m), _h_tilde(f, amap, nodes), amap)


def corrected(f: TestFunction, a_l: float, b_r: float, eps: float, m: int) -> BernsteinApprox:
    """Second-order approximation ``f_m - h_m / (2m)``, accurate to ``O(1/m^2)``.

    Both terms share degree and map, so the result is a single Bernstein
    polynomial with coefficients ``f~(k/m) - h~(k/m) / (2m)``.
    """
    amap, nodes = _check_args(f, a_l, b_r, eps, m)
    coefs = np.asarray(f(amap.inverse(nodes)), dtype=float) - _h_tilde(f, amap, nodes) / (2 * m)
    return BernsteinApprox(int(m), coefs, amap)


def _de_casteljau(coefs, u):
    u = np.asarray(u, dtype=float)
    flat = u.reshape(-1, 1)
    beta = np.broadcast_to(coefs, (flat.shape[0], coefs.size)).copy()
    for j in range(coefs.size - 1, 0, -1):
        beta[:, :j] = beta[:, :j] * (1.0 - flat) + beta[:, 1 : j + 1] * flat
    return beta[:, 0].reshape(u.shape)


def evaluate(approx: BernsteinApprox, x):
    """Evaluate at real ``x`` in ``[a_l, b_r]`` by de Casteljau's algorithm."""
    x = np.asarray(x, dtype=float)
    amap = approx.map
    tol = 1e-12 * (amap.b_r - amap.a_l)
    if np.any((x < amap.a_l - tol) | (x > amap.b_r + tol)):
        raise DomainError(f"x outside [{amap.a_l}, {amap.b_r}]")
    out = _de_casteljau(approx.samples, amap.forward(x))
    return out.item() if out.ndim == 0 else out


def evaluate_complex(approx: BernsteinApprox, z):
    """Evaluate on the strip ``Re z in [a_l, b_r]``, ``|Im z| <= 1/sqrt(m)``.

    Direct summation with log-binomial weights.
    """
    z = np.asarray(z, dtype=complex)
    amap = approx.map
    m = approx.m
    width = strip_halfwidth(max(m, 1))
    tol = 1e-12 * (amap.b_r - amap.a_l)
    if np.any((z.real < amap.a_l - tol) | (z.real > amap.b_r + tol)):
        raise DomainError(f"Re z outside [{amap.a_l}, {amap.b_r}]")
    if np.any(np.abs(z.imag) > width * (1 + 1e-12)):
        raise DomainError(f"|Im z| exceeds the strip half-width 1/sqrt(m) = {width:.6g}")
    u = amap.forward(z).reshape(-1, 1)
    k = np.arange(m + 1)
    logc = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
    basis = np.exp(logc + k * np.log(u) + (m - k) * np.log(1.0 - u))
    out = (basis @ approx.samples).reshape(z.shape)
    return out.item() if out.ndim == 0 else out
