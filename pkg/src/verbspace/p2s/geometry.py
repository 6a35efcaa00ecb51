"""Batched differentiable Lorentz kernels (torch) operating on space components."""

from __future__ import annotations

import math

import torch
from torch import Tensor

# floor on the squared chord; keeps the derivative finite at d = 0
CHORD_EPS = 1e-300
ANGLE_EPS = 1e-10


def exp_map0(v: Tensor, c: float) -> Tensor:
    """Space components of the exponential map at the vertex, along the last axis."""
    t = math.sqrt(c) * torch.linalg.vector_norm(v, dim=-1, keepdim=True)
    small = t < 1e-4
    t_safe = torch.where(small, torch.ones_like(t), t)
    ratio = torch.where(small, 1.0 + t * t / 6.0, torch.sinh(t_safe) / t_safe)
    return ratio * v


def time_component(x: Tensor, c: float) -> Tensor:
    return torch.sqrt(1.0 / c + (x * x).sum(-1))


def inner(x: Tensor, y: Tensor, c: float) -> Tensor:
    return (x * y).sum(-1) - time_component(x, c) * time_component(y, c)


def distance(x: Tensor, y: Tensor, c: float) -> Tensor:
    """Geodesic distance in the chord form ``(2/sqrt(c)) asinh(sqrt(c) |x - y|_L / 2)``.

    Equal to ``acosh(-c (x, y)_L) / sqrt(c)`` but exact near the diagonal,
    where acosh of an argument close to 1 is ill-conditioned.
    """
    ds = x - y
    nx, ny = (x * x).sum(-1), (y * y).sum(-1)
    dt = (nx - ny) / (time_component(x, c) + time_component(y, c))
    chord2 = torch.clamp((ds * ds).sum(-1) - dt * dt, min=CHORD_EPS)
    return 2.0 / math.sqrt(c) * torch.asinh(math.sqrt(c) * torch.sqrt(chord2) / 2.0)


def half_aperture(x: Tensor, c: float, K: float) -> Tensor:
    norm = torch.linalg.vector_norm(x, dim=-1)
    arg = 2.0 * K / (math.sqrt(c) * norm + ANGLE_EPS)
    return torch.asin(torch.clamp(arg, max=1.0 - ANGLE_EPS))


def exterior_angle(x: Tensor, y: Tensor, c: float) -> Tensor:
    x_time = time_component(x, c)
    cxy = c * ((x * y).sum(-1) - x_time * time_component(y, c))
    num = time_component(y, c) + x_time * cxy
    den = torch.linalg.vector_norm(x, dim=-1) * torch.sqrt(torch.clamp(cxy * cxy - 1.0, min=ANGLE_EPS))
    return torch.acos(torch.clamp(num / (den + ANGLE_EPS), -1.0 + ANGLE_EPS, 1.0 - ANGLE_EPS))


def entailment_violation(e: Tensor, v: Tensor, c: float, K: float) -> Tensor:
    return torch.relu(exterior_angle(e, v, c) - half_aperture(e, c, K))
