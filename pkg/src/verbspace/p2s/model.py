"""Physical-to-semantic scoring model and its losses.

Parameters are a flat ``dict[str, Tensor]`` (float64):

* ``W`` (H, n, d) and ``b`` (H, n): per-node affine heads, H = N when
  disentangled and H = 1 for the shared-representation variant. With a hidden
  layer the heads are ``W1, b1`` (H, h, d)/(H, h) and ``W2, b2`` (H, n, h)/(H, n)
  with a tanh in between.
* ``P`` (n, d_text): shared projection of node text features.
* ``log_w_img``, ``log_w_txt``: log of the pre-map scales; exponentiating keeps
  the scales positive.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from verbspace import rng
from verbspace.errors import ConfigMismatch, DimensionMismatch, MissingPseudo
from verbspace.harmonize import POS, UNKNOWN
from verbspace.p2s import geometry as geo


@dataclass(frozen=True)
class HyperParams:
    d: int
    n: int
    d_text: int
    c: float = 1.0
    K: float = 0.1
    gamma: float = 1.0
    omega: float = 0.01
    lr: float = 10.0
    momentum: float = 0.0
    warmup_epochs: int = 5
    epochs_phase1: int = 100
    epochs_phase2: int = 0
    lr_phase2: float | None = 1.0
    batch_size: int = 128
    hidden: int = 0
    disentangle: bool = True
    hard_pseudo_threshold: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigMismatch("gamma must be positive")
        if not self.omega >= 0:
            raise ConfigMismatch("omega must be non-negative")
        if not (self.c > 0 and self.K > 0 and self.lr > 0):
            raise ConfigMismatch("c, K and lr must be positive")
        if self.lr_phase2 is not None and not self.lr_phase2 > 0:
            raise ConfigMismatch("lr_phase2 must be positive")
        if min(self.d, self.n, self.d_text, self.batch_size) < 1 or self.hidden < 0:
            raise ConfigMismatch("dimensions and batch size must be positive")
        if min(self.epochs_phase1, self.epochs_phase2, self.warmup_epochs) < 0:
            raise ConfigMismatch("epoch counts must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def init_params(hp: HyperParams, N: int) -> dict[str, Tensor]:
    """Deterministic initialization from named streams of ``hp.seed``.

    Head weights are N(0, 1/fan_in) and the projection N(0, 1), so with unit
    feature rows and the sqrt(1/n) scales the lifted vectors start near unit norm.
    """
    H = N if hp.disentangle else 1
    g = rng.stream(hp.seed, "init/heads")
    params: dict[str, np.ndarray] = {}
    if hp.hidden:
        params["W1"] = g.standard_normal((H, hp.hidden, hp.d)) / math.sqrt(hp.d)
        params["b1"] = np.zeros((H, hp.hidden))
        params["W2"] = g.standard_normal((H, hp.n, hp.hidden)) / math.sqrt(hp.hidden)
        params["b2"] = np.zeros((H, hp.n))
    else:
        params["W"] = g.standard_normal((H, hp.n, hp.d)) / math.sqrt(hp.d)
        params["b"] = np.zeros((H, hp.n))
    params["P"] = rng.stream(hp.seed, "init/projection").standard_normal((hp.n, hp.d_text))
    params["log_w_img"] = np.array(math.log(math.sqrt(1.0 / hp.n)))
    params["log_w_txt"] = np.array(math.log(math.sqrt(1.0 / hp.n)))
    return {k: torch.tensor(v, dtype=torch.float64) for k, v in params.items()}


def disentangle(v_raw: Tensor, params: dict[str, Tensor], N: int | None = None) -> Tensor:
    """Node-specific representations ``v_i = f_i(v_raw)``: (B, d) -> (B, N, n).

    The shared variant (a single head) is broadcast to ``N`` nodes.
    """
    W = params["W1"] if "W1" in params else params["W"]
    if v_raw.shape[-1] != W.shape[-1]:
        raise DimensionMismatch(f"feature dim {v_raw.shape[-1]} != head input dim {W.shape[-1]}")
    if "W1" in params:
        h = torch.tanh(torch.einsum("khd,bd->bkh", params["W1"], v_raw) + params["b1"])
        v = torch.einsum("knh,bkh->bkn", params["W2"], h) + params["b2"]
    else:
        v = torch.einsum("knd,bd->bkn", params["W"], v_raw) + params["b"]
    if N is not None and v.shape[1] == 1 and N != 1:
        v = v.expand(-1, N, -1)
    return v


def node_embeddings(node_feats: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Pre-map node vectors (N, n) from the shared projection."""
    if node_feats.shape[-1] != params["P"].shape[-1]:
        raise DimensionMismatch(f"node feature dim {node_feats.shape[-1]} != {params['P'].shape[-1]}")
    return node_feats @ params["P"].T


def lift(v: Tensor, e: Tensor, params: dict[str, Tensor], c: float) -> tuple[Tensor, Tensor]:
    """Scale by the modality scalars and map both onto the hyperboloid."""
    v_h = geo.exp_map0(v * torch.exp(params["log_w_img"]), c)
    e_h = geo.exp_map0(e * torch.exp(params["log_w_txt"]), c)
    return v_h, e_h


def node_logits(v_h: Tensor, e_h: Tensor, c: float, gamma: float) -> Tensor:
    """``-gamma * d_L(v_i, e_i)`` for every sample and node: (B, N)."""
    return -gamma * geo.distance(v_h, e_h.unsqueeze(0), c)


def node_scores(v_h: Tensor, e_h: Tensor, c: float, gamma: float) -> Tensor:
    return torch.sigmoid(node_logits(v_h, e_h, c, gamma))


def targets(values: Tensor, soft: Tensor | None, phase: int, hard_threshold: float | None = None) -> Tensor:
    """BCE targets: phase 1 treats unknown as 0, phase 2 uses the pseudo labels."""
    if phase not in (1, 2):
        raise ValueError(f"phase must be 1 or 2, got {phase}")
    y = (values == POS).to(torch.float64)
    if phase == 1:
        return y
    unknown = values == UNKNOWN
    if soft is None or bool(torch.isnan(soft[unknown]).any()):
        raise MissingPseudo("phase 2 needs soft labels on every unknown entry")
    pseudo = soft
    if hard_threshold is not None:
        pseudo = (soft >= hard_threshold).to(torch.float64)
    return torch.where(unknown, pseudo, y)


def classification_loss(logits: Tensor, values: Tensor, phase: int = 1, soft: Tensor | None = None,
                        hard_threshold: float | None = None) -> Tensor:
    """Mean sigmoid binary cross-entropy over samples and nodes."""
    return F.binary_cross_entropy_with_logits(logits, targets(values, soft, phase, hard_threshold))


def entailment_loss(v_h: Tensor, e_h: Tensor, values: Tensor, c: float, K: float) -> Tensor:
    """Cone violation of ``v_i`` w.r.t. ``e_i`` averaged over certain positives
    of each sample (0 for samples without positives), then over the batch."""
    pos = (values == POS).to(torch.float64)
    viol = geo.entailment_violation(e_h.unsqueeze(0).expand_as(v_h), v_h, c, K)
    count = pos.sum(-1)
    per_sample = (viol * pos).sum(-1) / torch.clamp(count, min=1.0)
    return per_sample.mean()


def total_loss(l_cls: Tensor, l_ent: Tensor, omega: float) -> Tensor:
    return l_cls + omega * l_ent


def forward(params: dict[str, Tensor], x: Tensor, node_feats: Tensor, hp: HyperParams) -> tuple[Tensor, Tensor, Tensor]:
    """Lifted sample/node points and logits for a batch."""
    v = disentangle(x, params, node_feats.shape[0])
    e = node_embeddings(node_feats, params)
    v_h, e_h = lift(v, e, params, hp.c)
    return v_h, e_h, node_logits(v_h, e_h, hp.c, hp.gamma)


def batch_loss(params, x, node_feats, values, hp: HyperParams, phase: int = 1, soft=None) -> Tensor:
    v_h, e_h, logits = forward(params, x, node_feats, hp)
    l_cls = classification_loss(logits, values, phase, soft, hp.hard_pseudo_threshold)
    l_ent = entailment_loss(v_h, e_h, values, hp.c, hp.K)
    return total_loss(l_cls, l_ent, hp.omega)
