import dataclasses
import math

import numpy as np
import pytest
import torch

from verbspace import synthetic as sy
from verbspace.errors import ConfigMismatch, DimensionMismatch, MissingPseudo
from verbspace.harmonize import NEG, POS, UNKNOWN
from verbspace.p2s import Checkpoint, HyperParams, fit, infer, model
from verbspace.p2s import geometry as geo
from verbspace.p2s.train import finetune, lr_at, train_phase

T = lambda a: torch.tensor(a, dtype=torch.float64)  # noqa: E731


def small_problem(seed=0, S=120, N=5, d=6, n=4, d_text=8):
    g = np.random.default_rng(seed)
    X = g.standard_normal((S, d))
    Y = g.choice([POS, NEG, UNKNOWN], size=(S, N), p=[0.3, 0.5, 0.2]).astype(np.int8)
    L = np.abs(g.standard_normal((N, d_text)))
    L /= np.linalg.norm(L, axis=1, keepdims=True)
    hp = HyperParams(d=d, n=n, d_text=d_text, epochs_phase1=3, batch_size=32, seed=seed)
    return X, Y, L, hp


def test_hyperparam_validation():
    with pytest.raises(ConfigMismatch):
        HyperParams(d=2, n=2, d_text=2, gamma=0.0)
    with pytest.raises(ConfigMismatch):
        HyperParams(d=2, n=2, d_text=2, omega=-1.0)
    hp = HyperParams(d=2, n=2, d_text=2)
    assert HyperParams.from_dict(hp.to_dict()) == hp


def test_disentangle_identity_heads():
    params = {"W": torch.eye(3, dtype=torch.float64).expand(4, 3, 3).clone(), "b": torch.zeros(4, 3, dtype=torch.float64)}
    v = T([[1.0, -2.0, 0.5]])
    out = model.disentangle(v, params)
    assert torch.equal(out, v.unsqueeze(1).expand(1, 4, 3))


def test_disentangle_hand_example():
    params = {"W": T([[[2.0, 0.0], [0.0, 1.0]]]), "b": T([[1.0, 0.0]])}
    assert model.disentangle(T([[1.0, 1.0]]), params).tolist() == [[[3.0, 1.0]]]
    with pytest.raises(DimensionMismatch):
        model.disentangle(T([[1.0, 1.0, 1.0]]), params)


@pytest.mark.parametrize("hidden", [0, 3])
def test_head_independence(hidden):
    X, Y, L, hp = small_problem()
    hp = dataclasses.replace(hp, hidden=hidden)
    params = model.init_params(hp, L.shape[0])
    x, Lt = T(X[:7]), T(L)
    _, _, before = model.forward(params, x, Lt, hp)
    j = 2
    for k in params:
        if params[k].ndim >= 2 and params[k].shape[0] == L.shape[0] and k != "P":
            params[k][j] += 0.5
    _, _, after = model.forward(params, x, Lt, hp)
    others = [i for i in range(L.shape[0]) if i != j]
    assert torch.equal(before[:, others], after[:, others])
    assert not torch.equal(before[:, j], after[:, j])


def test_shared_head_broadcasts():
    X, Y, L, hp = small_problem()
    hp = dataclasses.replace(hp, disentangle=False)
    params = model.init_params(hp, L.shape[0])
    assert params["W"].shape[0] == 1
    v = model.disentangle(T(X[:3]), params, L.shape[0])
    assert v.shape == (3, L.shape[0], hp.n)


def test_scale_initialization():
    hp = HyperParams(d=3, n=16, d_text=4)
    params = model.init_params(hp, 2)
    assert math.exp(params["log_w_img"].item()) == pytest.approx(0.25)
    assert math.exp(params["log_w_txt"].item()) == pytest.approx(0.25)


def test_node_scores_examples():
    assert torch.sigmoid(model.node_logits(T([[[0.3, 0.2]]]), T([[0.3, 0.2]]), 1.0, 7.0)).item() == pytest.approx(0.5)
    # a point at geodesic distance ln 3 from the origin
    v = geo.exp_map0(T([[[math.log(3.0), 0.0]]]), 1.0)
    s = model.node_scores(v, T([[0.0, 0.0]]), 1.0, 1.0).item()
    assert s == pytest.approx(0.25, rel=1e-12)
    far = model.node_scores(geo.exp_map0(T([[[2.0, 0.0]]]), 1.0), T([[0.0, 0.0]]), 1.0, 1.0).item()
    assert far < s < 0.5


def test_classification_loss_examples():
    ln2 = math.log(2.0)
    zero = T([[0.0]])
    assert model.classification_loss(zero, torch.tensor([[POS]])).item() == pytest.approx(ln2)
    assert model.classification_loss(zero, torch.tensor([[UNKNOWN]]), phase=1).item() == pytest.approx(ln2)
    assert model.classification_loss(T([[40.0]]), torch.tensor([[POS]])).item() < 1e-15
    soft = T([[0.25]])
    y = torch.tensor([[UNKNOWN]])
    got = model.classification_loss(zero, y, phase=2, soft=soft).item()
    assert got == pytest.approx(ln2)  # BCE at p = 0.5 is ln 2 for any target
    logit = T([[1.0]])
    want = -(0.25 * math.log(1 / (1 + math.exp(-1))) + 0.75 * math.log(1 - 1 / (1 + math.exp(-1))))
    assert model.classification_loss(logit, y, phase=2, soft=soft).item() == pytest.approx(want)
    with pytest.raises(MissingPseudo):
        model.classification_loss(zero, y, phase=2)
    with pytest.raises(MissingPseudo):
        model.classification_loss(zero, y, phase=2, soft=T([[float("nan")]]))


def test_hard_pseudo_threshold():
    y = torch.tensor([[UNKNOWN, UNKNOWN, POS]])
    soft = T([[0.3, 0.7, float("nan")]])
    assert model.targets(y, soft, 2, 0.5).tolist() == [[0.0, 1.0, 1.0]]
    assert model.targets(y, soft, 2).tolist() == [[0.3, 0.7, 1.0]]


def test_entailment_loss_examples():
    e = T([[0.4, 0.0]])
    v = T([[[math.sqrt(0.32), 1.0]]])  # exterior angle pi/2 at e, alpha = pi/6
    assert model.entailment_loss(v, e, torch.tensor([[POS]]), 1.0, 0.1).item() == pytest.approx(math.pi / 3, abs=1e-8)
    assert model.entailment_loss(v, e, torch.tensor([[NEG]]), 1.0, 0.1).item() == 0.0
    assert model.entailment_loss(v, e, torch.tensor([[UNKNOWN]]), 1.0, 0.1).item() == 0.0
    inside = geo.exp_map0(T([[[2.0, 0.0]]]), 1.0)
    e2 = geo.exp_map0(T([[1.0, 0.0]]), 1.0)
    assert model.entailment_loss(inside, e2, torch.tensor([[POS]]), 1.0, 0.1).item() == pytest.approx(0.0, abs=1e-4)


def test_total_loss():
    assert model.total_loss(T(1.0), T(2.0), 0.01).item() == pytest.approx(1.02)
    assert model.total_loss(T(1.0), T(2.0), 0.0).item() == 1.0


def test_phase1_unknown_equals_negative():
    X, Y, L, hp = small_problem()
    params = model.init_params(hp, L.shape[0])
    Yneg = np.where(Y == UNKNOWN, NEG, Y)
    a = model.batch_loss(params, T(X), T(L), torch.tensor(Y), hp)
    b = model.batch_loss(params, T(X), T(L), torch.tensor(Yneg), hp)
    assert a.item() == b.item()


def test_lr_schedule():
    assert lr_at(0, 100, 10, 1.0) == pytest.approx(0.1)
    assert lr_at(9, 100, 10, 1.0) == pytest.approx(1.0)
    assert lr_at(10, 100, 10, 1.0) == pytest.approx(1.0)
    assert lr_at(55, 100, 10, 1.0) == pytest.approx(0.5)
    assert lr_at(99, 100, 10, 1.0) < 1e-3


def test_fit_deterministic_and_phase2_zero_identity():
    X, Y, L, hp = small_problem()
    a = fit(X, Y, L, hp, fingerprint="f")
    b = fit(X, Y, L, hp, fingerprint="f")
    assert a.to_bytes() == b.to_bytes()
    c = fit(X, Y, L, dataclasses.replace(hp, epochs_phase2=0), fingerprint="f")
    assert c.to_bytes() == a.to_bytes()
    assert a.phase == 1


def test_phase2_runs_and_changes_parameters():
    X, Y, L, hp = small_problem()
    c2 = fit(X, Y, L, dataclasses.replace(hp, epochs_phase2=2))
    assert c2.phase == 2 and len(c2.metrics["loss_phase2"]) == 2
    c1 = fit(X, Y, L, hp)
    assert not np.array_equal(c1.params["W"], c2.params["W"])
    with pytest.raises(MissingPseudo):
        finetune(c1, X, Y, np.full(Y.shape, np.nan), dataclasses.replace(hp, epochs_phase2=1))


def test_fit_shape_checks():
    X, Y, L, hp = small_problem()
    with pytest.raises(ConfigMismatch):
        fit(X[:, :3], Y, L, hp)
    with pytest.raises(ConfigMismatch):
        fit(X, Y[:, :2], L, hp)


def test_infer_hand_computed():
    hp = HyperParams(d=2, n=2, d_text=2, gamma=2.0)
    params = {
        "W": np.stack([np.eye(2), 2 * np.eye(2)]),
        "b": np.zeros((2, 2)),
        "P": np.eye(2),
        "log_w_img": np.array(0.0),
        "log_w_txt": np.array(0.0),
    }
    ckpt = Checkpoint(hp, params, ("a", "b"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    x = np.array([[0.5, 0.0]])
    got = infer(x, ckpt)[0]

    def lift(v):
        v = np.asarray(v, float)
        r = np.linalg.norm(v)
        s = np.sinh(r) / r * v
        return s, np.sqrt(1 + s @ s)

    want = []
    for vi, ei in (([0.5, 0.0], [1.0, 0.0]), ([1.0, 0.0], [0.0, 1.0])):
        (vs, vt), (es, et) = lift(vi), lift(ei)
        want.append(1 / (1 + np.exp(2.0 * np.arccosh(vt * et - vs @ es))))
    assert np.allclose(got, want, rtol=1e-12)
    assert np.array_equal(infer(x, ckpt), infer(x, ckpt))
    with pytest.raises(DimensionMismatch):
        infer(np.zeros((1, 3)), ckpt)


def test_scores_in_half_open_interval():
    X, Y, L, hp = small_problem()
    s = infer(X, fit(X, Y, L, hp))
    assert s.min() > 0 and s.max() <= 0.5


def test_small_lr_loss_non_increasing():
    tax = sy.tree_taxonomy((3, 4))
    from verbspace import nodetext
    L = nodetext.node_features(tax, 256)
    flags = []
    for seed in range(5):
        means = sy.cluster_means(tax, 60, sy.SEPARATION, seed)
        X, Y, _ = sy.sample_dataset(tax, means, 600, seed)
        hp = HyperParams(d=60, n=16, d_text=256, lr=1e-3, warmup_epochs=0, seed=seed)
        params = model.init_params(hp, tax.N)
        hist = train_phase(params, X, Y, L, hp, phase=1, epochs=10)
        assert all(math.isfinite(h) for h in hist)
        flags.append(all(b <= a for a, b in zip(hist, hist[1:])))
        assert torch.exp(params["log_w_img"]) > 0 and torch.exp(params["log_w_txt"]) > 0
    assert sorted(flags)[2]  # median over seeds
