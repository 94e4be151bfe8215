"""Limiting mean and covariance of linear spectral statistics.

Two independent routes are provided:

* real-line quadrature over the support ``[a, b]`` (``limiting_mean``,
  ``limiting_cov``), computed in the angle ``theta`` with
  ``x = 1 + y + 2 sqrt(y) cos(theta)`` so that the square-root edge
  behaviour disappears;
* contour integrals around the support of Bernstein approximations
  (``mean_contour``, ``cov_contour``), discretised with composite
  Gauss-Legendre panels on closed rectangles.

The fourth-moment mean term is implemented with the sign that reproduces the
exact finite-n identity ``E G_n(x^2) = y_n (kappa1 + kappa2)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import bernstein
from .errors import BranchError, DomainError, QuadratureError, SingularityError
from .functions import TestFunction
from .mp_core import MPModel, k_function, stieltjes_underline

_GL_ORDER = 16


@dataclass(frozen=True)
class MomentParams:
    """Fourth-moment parameters of the entry law.

    ``kappa1 = |E x^2|^2`` (1 for real entries, 0 for complex ones with
    ``E x^2 = 0``) and ``kappa2 = E|x|^4 - kappa1 - 2``.
    """

    kappa1: float = 1.0
    kappa2: float = 0.0

    def __post_init__(self):
        if self.kappa1 not in (0, 1):
            raise DomainError(f"kappa1 must be 0 or 1, got {self.kappa1}")
        if self.kappa2 < -2:
            raise DomainError(f"kappa2 must be >= -2, got {self.kappa2}")

    @classmethod
    def real_gaussian(cls):
        return cls(1.0, 0.0)

    @classmethod
    def complex_gaussian(cls):
        return cls(0.0, 0.0)


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    double_rel_tol: float = 1e-7
    max_subdivisions: int = 2000
    diagonal_exclusion: float = 1e-12

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.double_rel_tol) <= 0:
            raise DomainError("quadrature tolerances must be positive")


@dataclass(frozen=True)
class Contour:
    """Rectangle with vertices ``a_l +- i v`` and ``b_r +- i v``, counterclockwise."""

    a_l: float
    b_r: float
    v: float
    points_per_side: int = 640

    def __post_init__(self):
        if not (0 < self.a_l < self.b_r) or not self.v > 0:
            raise DomainError(f"invalid contour {self}")
        if self.points_per_side < _GL_ORDER:
            raise DomainError(f"points_per_side must be >= {_GL_ORDER}")

    def check_encloses(self, model: MPModel):
        if not (self.a_l < model.a and self.b_r > model.b):
            raise DomainError(
                f"contour [{self.a_l}, {self.b_r}] must strictly enclose the support "
                f"[{model.a}, {model.b}]"
            )

    def contains(self, other: "Contour") -> bool:
        return self.a_l < other.a_l and other.b_r < self.b_r and other.v < self.v

    def nodes(self):
        """Quadrature nodes ``z`` and complex weights ``dz``, in contour order.

        Vertical sides get panels in proportion to their length.
        """
        g, w = np.polynomial.legendre.leggauss(_GL_ORDER)
        panels = max(1, self.points_per_side // _GL_ORDER)
        width = self.b_r - self.a_l
        verts = [
            complex(self.a_l, -self.v),
            complex(self.b_r, -self.v),
            complex(self.b_r, self.v),
            complex(self.a_l, self.v),
        ]
        zs, ws = [], []
        for p0, p1 in zip(verts, verts[1:] + verts[:1]):
            n_pan = max(1, int(math.ceil(panels * abs(p1 - p0) / width)))
            edges = np.linspace(0.0, 1.0, n_pan + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
            half = 0.5 * np.diff(edges)[:, None]
            t = (mid + half * g).ravel()
            zs.append(p0 + (p1 - p0) * t)
            ws.append(((p1 - p0) * half * w).ravel())
        return np.concatenate(zs), np.concatenate(ws)


def default_contours(model: MPModel, m: int, points_per_side: int = 640):
    """Outer contour at height ``1/sqrt(m)`` and an enclosed inner one at half that."""
    a_l, b_r = bernstein.default_interval(model.a, model.b)
    v = bernstein.strip_halfwidth(m)
    outer = Contour(a_l, b_r, v, points_per_side)
    inner = Contour(0.5 * (a_l + model.a), 0.5 * (b_r + model.b), 0.5 * v, points_per_side)
    return outer, inner


# -- real-line route ---------------------------------------------------------


def _quad(func, lo, hi, q: QuadConfig, rel=None, diag=None):
    rel = q.rel_tol if rel is None else rel
    res = integrate.quad(
        func, lo, hi, epsabs=q.abs_tol, epsrel=rel, limit=q.max_subdivisions, full_output=1
    )
    val, err = res[0], res[1]
    if len(res) > 3:
        # ier != 0; accept roundoff-limited results that still met the tolerance
        target = max(q.abs_tol, rel * abs(val)) * 100
        if not err <= target:
            raise QuadratureError(
                f"quadrature did not converge on [{lo}, {hi}]: {res[3].splitlines()[0]}",
                achieved=err,
            )
    if diag is not None:
        diag["max_abs_err"] = max(diag.get("max_abs_err", 0.0), err)
    return val


def _theta_map(model: MPModel):
    y = model.y
    r = math.sqrt(y)

    def x_of(t):
        return 1.0 + y + 2.0 * r * math.cos(t)

    def jac(t):
        return 2.0 * r * math.sin(t)

    return x_of, jac


def _boundary_sbar(model: MPModel):
    """Scalar ``x -> s_(x + i0)`` for ``a <= x <= b``; same formula as mp_core, minus numpy overhead."""
    y, a, b = model.y, model.a, model.b

    def sbar(x):
        root = 1j * math.sqrt(max((x - a) * (b - x), 0.0))
        return -(1.0 - y) / x + y * 2.0 / (1.0 - y - x - root)

    return sbar


def _check_function(f: TestFunction, model: MPModel):
    f.validate_interval(model.a, model.b)


def _arg_monitor(model: MPModel, grid: int = 2001):
    # principal arg of 1 - y k^2 on an interior grid; flag jumps larger than pi
    t = np.linspace(0.0, np.pi, grid)[1:-1]
    x = 1.0 + model.y + 2.0 * math.sqrt(model.y) * np.cos(t)
    w = 1.0 - model.y * np.asarray(k_function(model, x)) ** 2
    if np.any(np.abs(w) == 0.0):
        raise SingularityError("1 - y k^2 vanishes inside the support")
    jumps = np.abs(np.diff(np.angle(w)))
    if np.any(jumps > np.pi):
        raise BranchError("arg(1 - y k^2) jumps across the branch cut; unwrap needed")


def limiting_mean(
    f: TestFunction, model: MPModel, mom: MomentParams, q: QuadConfig = QuadConfig(), diag=None
) -> float:
    """Mean of the Gaussian limit of ``G_n(f)``.

    ``kappa1/(2 pi) int f'(x) arg(1 - y k^2) dx
    + kappa2/pi int f(x) Im(y k^3 / (1 - y k^2)) dx`` over the support.
    """
    model.require_clt()
    if mom.kappa1 == 0 and mom.kappa2 == 0:
        return 0.0
    _check_function(f, model)
    y = model.y
    x_of, jac = _theta_map(model)
    sbar = _boundary_sbar(model)
    total = 0.0
    if mom.kappa1 != 0:
        _arg_monitor(model)

        def first(t):
            x = x_of(t)
            sb = sbar(x)
            k = sb / (sb + 1.0)
            return float(f.d1(x)) * cmath.phase(1.0 - y * k * k) * jac(t)

        total += mom.kappa1 / (2.0 * math.pi) * _quad(first, 0.0, math.pi, q, diag=diag)
    if mom.kappa2 != 0:

        def second(t):
            x = x_of(t)
            sb = sbar(x)
            k = sb / (sb + 1.0)
            den = 1.0 - y * k * k
            if den == 0:
                raise SingularityError("1 - y k^2 = 0")
            return float(f(x)) * (y * k**3 / den).imag * jac(t)

        total += mom.kappa2 / math.pi * _quad(second, 0.0, math.pi, q, diag=diag)
    return total


def limiting_cov(
    f: TestFunction,
    g: TestFunction,
    model: MPModel,
    mom: MomentParams,
    q: QuadConfig = QuadConfig(),
    diag=None,
) -> float:
    """Covariance ``c(f, g)`` of the Gaussian limit.

    The log kernel ``ln |(conj(s_(x1)) - s_(x2)) / (s_(x1) - s_(x2))|`` is
    integrable on the diagonal; the inner integral is split at the diagonal.
    The fourth-moment term factorises because
    ``Re[k1 k2 - conj(k1) k2] = -2 Im k1 Im k2``.
    """
    model.require_clt()
    _check_function(f, model)
    _check_function(g, model)
    x_of, jac = _theta_map(model)
    sbar = _boundary_sbar(model)
    rel = q.double_rel_tol
    total = 0.0

    # ln|...| = 2 * ln|conj(s1) - s2| - ... is symmetric in (x1, x2)
    if mom.kappa1 + 1 != 0:
        delta = q.diagonal_exclusion

        def inner(t2):
            x2 = x_of(t2)
            s2 = sbar(x2)

            def kern(t1):
                x1 = x_of(t1)
                s1 = sbar(x1)
                num = abs(s1.conjugate() - s2)
                den = abs(s1 - s2)
                if den == 0.0:
                    return 0.0
                return float(f.d1(x1)) * math.log(num / den) * jac(t1)

            left = _quad(kern, 0.0, t2 - delta, q, rel=rel, diag=diag) if t2 > delta else 0.0
            right = _quad(kern, t2 + delta, math.pi, q, rel=rel, diag=diag) if t2 < math.pi - delta else 0.0
            return (left + right) * float(g.d1(x2)) * jac(t2)

        total += (mom.kappa1 + 1) / (2 * math.pi**2) * _quad(inner, 0.0, math.pi, q, rel=rel, diag=diag)

    if mom.kappa2 != 0:

        def im_k(fn):
            def h(t):
                sb = sbar(x_of(t))
                return float(fn(x_of(t))) * (sb / (sb + 1.0)).imag * jac(t)

            return h

        jf = _quad(im_k(f.d1), 0.0, math.pi, q, diag=diag)
        jg = jf if g is f else _quad(im_k(g.d1), 0.0, math.pi, q, diag=diag)
        # -(kappa2 y / 2 pi^2) * (-2 jf jg)
        total += mom.kappa2 * model.y / math.pi**2 * jf * jg
    return total


def covariance_matrix(functions, model, mom, q: QuadConfig = QuadConfig(), diag=None):
    """Symmetric matrix of ``limiting_cov`` over a list of functions."""
    n = len(functions)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = limiting_cov(functions[i], functions[j], model, mom, q, diag)
    return out


def centering_integral(f: TestFunction, y_n: float, q: QuadConfig = QuadConfig()) -> float:
    """``int f dF_{y_n}``: the centre of ``G_n(f)`` at the finite ratio ``y_n = p/n``.

    Includes ``f(0) (1 - 1/y_n)`` when ``y_n > 1``.
    """
    model = MPModel(y_n)
    y = model.y
    r = math.sqrt(y)
    # for y = 1 the support starts at 0 but the density there is integrable
    probe = model.a if model.a > 0 else np.nextafter(0.0, 1.0)
    if not f.contains(probe):
        raise DomainError(f"{f.name} is undefined on the support [{model.a}, {model.b}]")

    def integrand(phi):
        # x = 1 + y - 2 sqrt(y) cos(phi); density dx = 2 sin^2(phi) / (pi x) dphi
        x = 1.0 + y - 2.0 * r * math.cos(phi)
        return float(f(x)) * math.sin(phi) ** 2 / x

    cont = 2.0 / math.pi * _quad(integrand, 0.0, math.pi, q)
    if y > 1.0:
        if not f.contains(0.0):
            raise DomainError(f"{f.name} is undefined at 0, where the atom of F_y sits")
        cont += float(f(0.0)) * model.atom
    return cont


# -- contour route -----------------------------------------------------------


def _check_strip(approx: bernstein.BernsteinApprox, c: Contour):
    amap = approx.map
    if c.a_l < amap.a_l or c.b_r > amap.b_r:
        raise DomainError("contour leaves the interval of the Bernstein approximation")
    if c.v > bernstein.strip_halfwidth(approx.m) * (1 + 1e-12):
        raise DomainError("contour exits the strip |Im z| <= 1/sqrt(m)")


def mean_contour(
    f_m: bernstein.BernsteinApprox, model: MPModel, mom: MomentParams, c: Contour, diag=None
) -> float:
    """``-(1/2 pi i) \\oint f_m(z) [M1(z) + M2(z)] dz`` on the closed contour.

    ``M1 = kappa1 y k^3 / (1 - y k^2)^2`` and ``M2 = kappa2 y k^3 / (1 - y k^2)``.
    """
    model.require_clt()
    c.check_encloses(model)
    _check_strip(f_m, c)
    if mom.kappa1 == 0 and mom.kappa2 == 0:
        return 0.0
    y = model.y
    z, w = c.nodes()
    k = np.asarray(k_function(model, z))
    den = 1.0 - y * k * k
    integrand = y * k**3 * (mom.kappa1 / den**2 + mom.kappa2 / den)
    total = -np.sum(f_m(z) * integrand * w) / (2j * np.pi)
    if diag is not None:
        diag["mean_imag_residue"] = abs(total.imag)
    return float(total.real)


def _tracked_log(ratio):
    """Logarithm continued along each row (the outer contour's order)."""
    logabs = np.log(np.abs(ratio))
    ang = np.angle(ratio)
    # reference: start each row on the principal branch, then continue
    unwrapped = np.unwrap(ang, axis=0)
    if np.any(np.abs(np.diff(unwrapped, axis=0)) > 0.5 * np.pi):
        raise BranchError("log kernel changes too fast along the contour; refine the grid")
    drift = unwrapped[-1] - unwrapped[0]
    if np.any(np.abs(drift) > np.pi):
        raise BranchError("log kernel winds around zero along a closed contour")
    return logabs + 1j * unwrapped


def cov_contour(
    f_m: bernstein.BernsteinApprox,
    g_m: bernstein.BernsteinApprox,
    model: MPModel,
    mom: MomentParams,
    c_outer: Contour,
    c_inner: Contour,
    diag=None,
) -> float:
    """``-(1/4 pi^2) \\oint\\oint f_m'(z1) g_m'(z2) Gamma(z1, z2) dz1 dz2``.

    ``Gamma = kappa2 y k1 k2 - (kappa1 + 1) ln(s_1 s_2 (z1 - z2) / (s_1 - s_2))``
    with ``z1`` on the outer and ``z2`` on the inner contour.
    """
    model.require_clt()
    for cc in (c_outer, c_inner):
        cc.check_encloses(model)
    if not c_outer.contains(c_inner):
        raise DomainError("the outer contour must strictly enclose the inner one")
    _check_strip(f_m, c_outer)
    _check_strip(g_m, c_inner)
    df, dg = f_m.derivative(), g_m.derivative()
    z1, w1 = c_outer.nodes()
    z2, w2 = c_inner.nodes()
    a1 = df(z1) * w1
    a2 = dg(z2) * w2
    if not (np.any(a1) and np.any(a2)):
        return 0.0
    y = model.y
    s1 = np.asarray(stieltjes_underline(model, z1))
    s2 = np.asarray(stieltjes_underline(model, z2))
    total = 0.0 + 0.0j
    if mom.kappa1 + 1 != 0:
        ratio = s1[:, None] * s2[None, :] * (z1[:, None] - z2[None, :]) / (s1[:, None] - s2[None, :])
        lg = _tracked_log(ratio)
        total += -(mom.kappa1 + 1) * (a1 @ lg @ a2)
    if mom.kappa2 != 0:
        k1 = s1 / (s1 + 1.0)
        k2 = s2 / (s2 + 1.0)
        total += mom.kappa2 * y * np.sum(a1 * k1) * np.sum(a2 * k2)
    total = -total / (4.0 * np.pi**2)
    if diag is not None:
        diag["cov_imag_residue"] = abs(total.imag)
    return float(total.real)
