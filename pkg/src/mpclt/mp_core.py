"""Marchenko-Pastur law and its Stieltjes transforms.

All evaluators accept scalars or numpy arrays and broadcast. Complex inputs
are treated as points off the real axis; the companion transform and ``k``
additionally accept *real* inputs, which are read as boundary values
``x + i0`` (on the support) or as plain real evaluations (off the support).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError


def support_edges(y):
    """Return the MP support edges ``((1 - sqrt(y))**2, (1 + sqrt(y))**2)``."""
    y = float(y)
    if not y > 0 or not math.isfinite(y):
        raise DomainError(f"aspect ratio must be positive and finite, got {y!r}")
    r = math.sqrt(y)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


@dataclass(frozen=True)
class MPModel:
    """Marchenko-Pastur law with aspect ratio ``y = p / n`` and unit scale."""

    y: float

    def __post_init__(self):
        support_edges(self.y)
        object.__setattr__(self, "y", float(self.y))

    @property
    def a(self) -> float:
        return support_edges(self.y)[0]

    @property
    def b(self) -> float:
        return support_edges(self.y)[1]

    @property
    def critical(self) -> bool:
        """True when ``y == 1``: the hard edge touches zero and the CLT does not apply."""
        return self.y == 1.0

    @property
    def atom(self) -> float:
        """Point mass at the origin (nonzero only for ``y > 1``)."""
        return max(0.0, 1.0 - 1.0 / self.y)

    def require_clt(self):
        """Raise unless the model is usable by the CLT formulas (``0 < y < 1``)."""
        if self.critical:
            raise DomainError("y = 1 is excluded from the CLT (hard edge at zero)")
        if self.y > 1:
            raise DomainError(
                f"limit formulas are implemented for y in (0, 1); got y={self.y}"
            )


def _as_model(model) -> MPModel:
    return model if isinstance(model, MPModel) else MPModel(model)


def _ret(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def density(model, x):
    """Absolutely continuous part of the MP density; zero outside ``(a, b)``.

    For ``y > 1`` the atom at the origin is *not* included; see :func:`cdf`.
    """
    model = _as_model(model)
    x = np.asarray(x, dtype=float)
    a, b, y = model.a, model.b, model.y
    inside = (x > a) & (x < b)
    xs = np.where(inside, x, 1.0 + y)
    val = np.sqrt(np.clip((xs - a) * (b - xs), 0.0, None)) / (2.0 * np.pi * xs * y)
    return _ret(np.where(inside, val, 0.0))


def _angle_of(model, x):
    # x = 1 + y - 2 sqrt(y) cos(phi), phi in [0, pi] runs from a to b
    y = model.y
    c = (1.0 + y - x) / (2.0 * math.sqrt(y))
    return np.arccos(np.clip(c, -1.0, 1.0))


def cdf(model, x):
    """Distribution function of the MP law, atom at zero included when ``y > 1``.

    Closed form obtained from the angular parametrisation of the support.
    """
    model = _as_model(model)
    x = np.asarray(x, dtype=float)
    y = model.y
    r = math.sqrt(y)
    phi = _angle_of(model, x)
    big = (1.0 + r) / abs(1.0 - r) if y != 1.0 else np.inf
    half = phi / 2.0
    # arctan(K tan(phi/2)) written with atan2 so that phi = pi is exact
    at = np.arctan2(big * np.sin(half), np.cos(half)) if y != 1.0 else np.where(phi > 0, np.pi / 2, 0.0)
    integral = np.sin(phi) / (2.0 * r) + (1.0 + y) * phi / (4.0 * y) - abs(1.0 - y) / (2.0 * y) * at
    cont = (2.0 / np.pi) * integral
    out = np.where(x < model.a, 0.0, np.where(x >= model.b, min(1.0, 1.0 / y), cont))
    out = out + np.where(x >= 0.0, model.atom, 0.0)
    return _ret(np.clip(out, 0.0, 1.0))


def _root(model, z):
    # sqrt((z-a)(z-b)) as a product of principal roots: analytic off [a, b],
    # ~ z at infinity, positive imaginary part in the upper half plane
    return np.sqrt(z - model.a) * np.sqrt(z - model.b)


def _s_from_root(model, z, root):
    # rationalised form of (1 - y - z + root) / (2 y z); avoids cancellation
    den = 1.0 - model.y - z - root
    with np.errstate(divide="ignore", invalid="ignore"):
        s = 2.0 / den
    if np.any(~np.isfinite(s)):
        raise SingularityError("Stieltjes transform has a pole at z = 0 for y >= 1")
    return s


def stieltjes_s(model, z):
    """Stieltjes transform of the MP law at ``z`` off the support.

    Raises :class:`DomainError` for real ``z`` strictly inside ``(a, b)``;
    use :func:`boundary_s` there.
    """
    model = _as_model(model)
    z = np.asarray(z, dtype=complex)
    on_cut = (z.imag == 0) & (z.real > model.a) & (z.real < model.b)
    if np.any(on_cut):
        raise DomainError("z lies on the support; use boundary_s for x + i0 limits")
    return _ret(_s_from_root(model, z, _root(model, z)))


def boundary_s(model, x):
    """Limit ``s(x + i0)`` for ``a < x < b``; imaginary part equals ``pi * density``."""
    model = _as_model(model)
    x = np.asarray(x, dtype=float)
    if np.any((x <= model.a) | (x >= model.b)):
        raise DomainError(f"boundary_s needs a < x < b = ({model.a}, {model.b})")
    root = 1j * np.sqrt((x - model.a) * (model.b - x))
    return _ret(_s_from_root(model, x, root))


def _s_real_line(model, x):
    # x + i0 limit on the whole real line (real-valued off the support)
    a, b = model.a, model.b
    prod = (x - a) * (x - b)
    mag = np.sqrt(np.abs(prod))
    root = np.where(x < a, -mag + 0j, np.where(x > b, mag + 0j, 1j * mag))
    return _s_from_root(model, x, root)


def _s_any(model, z):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return np.asarray(stieltjes_s(model, z))
    return _s_real_line(model, z.astype(float))


def stieltjes_underline(model, z):
    """Companion transform ``-(1 - y)/z + y s(z)`` of the ``n x n`` matrix ``X*X/n``.

    Real input is read as the boundary value ``x + i0``.
    """
    model = _as_model(model)
    z = np.asarray(z)
    if np.any(z == 0):
        raise SingularityError("companion transform has a pole at z = 0")
    s = _s_any(model, z)
    return _ret(-(1.0 - model.y) / z + model.y * s)


def k_function(model, z):
    """``k = s_ / (s_ + 1)`` where ``s_`` is the companion transform."""
    sb = np.asarray(stieltjes_underline(model, z))
    if np.any(sb == -1.0):
        raise SingularityError("companion transform equals -1; k is undefined")
    return _ret(sb / (sb + 1.0))
