"""The differentiable torch kernels agree with the float64 reference kernel."""

import math

import numpy as np
import pytest
import torch

from verbspace import lorentz as lz
from verbspace.p2s import geometry as geo


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_exp_map_and_distance_agree(c):
    g = np.random.default_rng(0)
    curv = lz.Curvature(c)
    U, V = g.standard_normal((50, 5)), 1.5 * g.standard_normal((50, 5))
    xs = geo.exp_map0(torch.tensor(U), c).numpy()
    ys = geo.exp_map0(torch.tensor(V), c).numpy()
    d = geo.distance(torch.tensor(xs), torch.tensor(ys), c).numpy()
    for k in range(50):
        x, y = lz.exp_map0(U[k], curv), lz.exp_map0(V[k], curv)
        assert np.allclose(xs[k], x.space, rtol=1e-13)
        assert d[k] == pytest.approx(lz.lorentz_distance(x, y), rel=1e-10)


def test_angles_agree():
    g = np.random.default_rng(1)
    curv = lz.Curvature(1.0)
    for _ in range(50):
        x = lz.exp_map0(g.standard_normal(4), curv)
        y = lz.exp_map0(g.standard_normal(4), curv)
        tx_, ty = torch.tensor(x.space), torch.tensor(y.space)
        assert geo.half_aperture(tx_, 1.0, 0.1).item() == pytest.approx(lz.half_aperture(x), abs=1e-8)
        assert geo.exterior_angle(tx_, ty, 1.0).item() == pytest.approx(lz.exterior_angle(x, y), abs=1e-7)
        assert geo.entailment_violation(tx_, ty, 1.0, 0.1).item() == pytest.approx(
            lz.entailment_violation(x, y), abs=1e-7)


def test_exp_map_small_norm_series():
    v = torch.tensor([[1e-9, 0.0], [0.0, 0.0]], dtype=torch.float64, requires_grad=True)
    out = geo.exp_map0(v, 1.0)
    out.sum().backward()
    assert torch.all(torch.isfinite(v.grad))
    assert out[0, 0].item() == pytest.approx(1e-9, rel=1e-15)


def test_distance_gradient_finite_at_zero():
    x = torch.tensor([[0.3, 0.1]], dtype=torch.float64, requires_grad=True)
    geo.distance(x, x.detach(), 1.0).sum().backward()
    assert torch.all(torch.isfinite(x.grad))


def test_half_aperture_value():
    assert geo.half_aperture(torch.tensor([0.4, 0.0], dtype=torch.float64), 1.0, 0.1).item() == pytest.approx(
        math.pi / 6, abs=1e-9)
