"""Lorentz hyperboloid geometry in float64 with explicit guards.

Points live on the upper sheet ``{x : (x, x)_L = -1/c}`` of curvature ``-c``
and are stored as (space, time). These are the exact reference kernels; the
batched differentiable versions used for training are in
``verbspace.p2s.geometry`` and are tested against these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from verbspace.errors import (
    CurvatureMismatch,
    DegeneratePair,
    DimensionMismatch,
    MagnitudeOverflow,
    OriginAperture,
    OriginApex,
)

MAX_MAGNITUDE = 350.0
SERIES_CUTOFF = 1e-4
PAIR_EPS = 1e-12


@dataclass(frozen=True)
class Curvature:
    c: float = 1.0
    K: float = 0.1

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"curvature c must be positive, got {self.c}")
        if not self.K > 0:
            raise ValueError(f"aperture constant K must be positive, got {self.K}")


@dataclass(frozen=True, eq=False)
class LorentzPoint:
    space: np.ndarray
    time: float
    curv: Curvature

    @classmethod
    def from_space(cls, space, curv: Curvature) -> "LorentzPoint":
        space = np.asarray(space, dtype=np.float64)
        return cls(space, math.sqrt(1.0 / curv.c + float(space @ space)), curv)

    @classmethod
    def origin(cls, dim: int, curv: Curvature) -> "LorentzPoint":
        return cls(np.zeros(dim), 1.0 / math.sqrt(curv.c), curv)

    @property
    def dim(self) -> int:
        return self.space.shape[0]

    @property
    def space_norm(self) -> float:
        return float(np.linalg.norm(self.space))


def _check_pair(x: LorentzPoint, y: LorentzPoint) -> None:
    if x.curv.c != y.curv.c:
        raise CurvatureMismatch(f"{x.curv.c} != {y.curv.c}")
    if x.dim != y.dim:
        raise DimensionMismatch(f"{x.dim} != {y.dim}")


def lorentz_inner(x: LorentzPoint, y: LorentzPoint) -> float:
    _check_pair(x, y)
    return float(x.space @ y.space) - x.time * y.time


def sinhc(t: float) -> float:
    """sinh(t)/t, with a series below the cutoff."""
    if t < SERIES_CUTOFF:
        t2 = t * t
        return 1.0 + t2 / 6.0 + t2 * t2 / 120.0
    return math.sinh(t) / t


def exp_map0(v_space, curv: Curvature) -> LorentzPoint:
    """Exponential map at the hyperboloid vertex for a space-only tangent vector."""
    v = np.asarray(v_space, dtype=np.float64)
    t = math.sqrt(curv.c) * float(np.linalg.norm(v))
    if not t <= MAX_MAGNITUDE:
        raise MagnitudeOverflow(f"sqrt(c)*|v| = {t} exceeds {MAX_MAGNITUDE}")
    return LorentzPoint.from_space(sinhc(t) * v, curv)


def lorentz_distance(x: LorentzPoint, y: LorentzPoint) -> float:
    """Geodesic distance ``sqrt(1/c) * acosh(-c (x, y)_L)``.

    Near the diagonal the equivalent chord form
    ``(2/sqrt(c)) * asinh(sqrt(c) * |x - y|_L / 2)`` is used; ``acosh`` loses
    all precision for arguments close to 1.
    """
    _check_pair(x, y)
    c = x.curv.c
    z = -c * lorentz_inner(x, y)
    if z >= 2.0:
        return math.acosh(z) / math.sqrt(c)
    ds = x.space - y.space
    s2 = float(ds @ ds)
    # time difference without cancellation
    dt = (float(x.space @ x.space) - float(y.space @ y.space)) / (x.time + y.time)
    chord2 = max(s2 - dt * dt, 0.0)
    return 2.0 / math.sqrt(c) * math.asinh(math.sqrt(c * chord2) / 2.0)


def half_aperture(x: LorentzPoint) -> float:
    """Entailment-cone half aperture ``asin(2K / (sqrt(c) |x_space|))``, clamped."""
    norm = x.space_norm
    if norm == 0.0:
        raise OriginAperture("the vertex has no entailment cone")
    return math.asin(min(1.0, 2.0 * x.curv.K / (math.sqrt(x.curv.c) * norm)))


def exterior_angle(x: LorentzPoint, y: LorentzPoint) -> float:
    """Exterior angle at ``x`` of the triangle (origin, x, y), i.e. pi - angle(O x y)."""
    _check_pair(x, y)
    c = x.curv.c
    norm = x.space_norm
    if norm == 0.0:
        raise OriginApex("exterior angle is undefined at the vertex")
    inner = lorentz_inner(x, y)
    if not inner < -1.0 / c - PAIR_EPS:
        raise DegeneratePair("points coincide (within tolerance)")
    cxy = c * inner
    num = y.time + x.time * cxy
    # acos(num / den) with den = |x_space| sqrt(cxy^2 - 1) loses ~1e-8 near
    # theta = 0; the sine side is |x_space| sqrt(c) |y_perp|, where y_perp is the
    # part of y_space orthogonal to x_space, so atan2 keeps full precision.
    xhat = x.space / norm
    y_perp = y.space - (y.space @ xhat) * xhat
    sin_side = norm * math.sqrt(c) * float(np.linalg.norm(y_perp))
    return math.atan2(sin_side, num)


def entailment_violation(e: LorentzPoint, v: LorentzPoint) -> float:
    """How far ``v`` lies outside the entailment cone of ``e`` (0 when inside)."""
    return max(0.0, exterior_angle(e, v) - half_aperture(e))


def pairwise_distance(space: np.ndarray, c: float) -> np.ndarray:
    """All pairwise geodesic distances between points given by space rows.

    Same two-branch evaluation as :func:`lorentz_distance`; the diagonal is 0.
    """
    X = np.asarray(space, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    time = np.sqrt(1.0 / c + sq)
    z = -c * (X @ X.T - np.outer(time, time))
    D = np.arccosh(np.maximum(z, 1.0)) / math.sqrt(c)
    i, j = np.nonzero(z < 2.0)
    diff = X[i] - X[j]
    dt = (sq[i] - sq[j]) / (time[i] + time[j])
    chord2 = np.maximum(np.einsum("ij,ij->i", diff, diff) - dt * dt, 0.0)
    D[i, j] = 2.0 / math.sqrt(c) * np.arcsinh(np.sqrt(c * chord2) / 2.0)
    D = (D + D.T) / 2.0
    np.fill_diagonal(D, 0.0)
    return D
