"""Two-phase training and inference.

Phase 1 trains with unknown labels taken as negatives. Phase 2 builds the
co-relation matrix from the phase-1 node embeddings, fills unknown entries
with soft pseudo labels and fine-tunes from the phase-1 parameters.

All randomness comes from named streams of ``hp.seed``; minibatches are
reduced in fixed batch-index order, so a run is bit-reproducible.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
import torch

from verbspace import augment, rng
from verbspace.errors import ConfigMismatch, DimensionMismatch, NonFiniteLoss
from verbspace.harmonize import PartialLabel
from verbspace.p2s import model
from verbspace.p2s.checkpoint import Checkpoint
from verbspace.p2s.model import HyperParams

log = logging.getLogger(__name__)


def stack_labels(labels: Sequence[PartialLabel]) -> tuple[np.ndarray, np.ndarray | None]:
    values = np.stack([lab.values for lab in labels]).astype(np.int8)
    if all(lab.soft is None for lab in labels):
        return values, None
    soft = np.stack([lab.soft if lab.soft is not None else np.full(values.shape[1], np.nan) for lab in labels])
    return values, soft


def lr_at(step: int, total: int, warmup: int, base: float) -> float:
    """Linear warmup to ``base`` then cosine decay towards 0."""
    if step < warmup:
        return base * (step + 1) / warmup
    span = max(total - warmup, 1)
    return base * 0.5 * (1.0 + math.cos(math.pi * (step - warmup) / span))


def _check_shapes(features, values, node_feats, hp: HyperParams):
    if features.ndim != 2 or features.shape[1] != hp.d:
        raise ConfigMismatch(f"features have shape {features.shape}, expected (S, {hp.d})")
    if node_feats.ndim != 2 or node_feats.shape[1] != hp.d_text:
        raise ConfigMismatch(f"node features have shape {node_feats.shape}, expected (N, {hp.d_text})")
    if values.shape != (features.shape[0], node_feats.shape[0]):
        raise ConfigMismatch(f"labels have shape {values.shape}, expected {(features.shape[0], node_feats.shape[0])}")


def train_phase(
    params: dict[str, torch.Tensor],
    features: np.ndarray,
    values: np.ndarray,
    node_feats: np.ndarray,
    hp: HyperParams,
    phase: int,
    epochs: int,
    soft: np.ndarray | None = None,
) -> list[float]:
    """Run ``epochs`` of SGD in place on ``params``; returns mean loss per epoch."""
    _check_shapes(features, values, node_feats, hp)
    X = torch.as_tensor(np.asarray(features, dtype=np.float64))
    Y = torch.as_tensor(np.asarray(values, dtype=np.int64))
    L = torch.as_tensor(np.asarray(node_feats, dtype=np.float64))
    Ysoft = None if soft is None else torch.as_tensor(np.asarray(soft, dtype=np.float64))
    S = X.shape[0]
    steps = math.ceil(S / hp.batch_size)
    total, warmup = epochs * steps, min(hp.warmup_epochs, epochs) * steps
    for p in params.values():
        p.requires_grad_(True)
    base_lr = hp.lr if phase == 1 or hp.lr_phase2 is None else hp.lr_phase2
    opt = torch.optim.SGD(list(params.values()), lr=base_lr, momentum=hp.momentum)
    history = []
    step = 0
    for epoch in range(epochs):
        order = torch.as_tensor(rng.stream(hp.seed, f"shuffle/phase{phase}/epoch-{epoch}").permutation(S))
        running = 0.0
        for start in range(0, S, hp.batch_size):
            idx = order[start : start + hp.batch_size]
            for group in opt.param_groups:
                group["lr"] = lr_at(step, total, warmup, base_lr)
            opt.zero_grad()
            loss = model.batch_loss(params, X[idx], L, Y[idx], hp, phase, None if Ysoft is None else Ysoft[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"phase {phase}, epoch {epoch}, step {step}: loss {loss.item()}")
            loss.backward()
            opt.step()
            running += loss.item() * len(idx)
            step += 1
        history.append(running / S)
        log.debug("phase %d epoch %d loss %.6f", phase, epoch, history[-1])
    for p in params.values():
        p.requires_grad_(False)
    return history


def lifted_node_embeddings(params: dict[str, torch.Tensor], node_feats: np.ndarray, c: float) -> np.ndarray:
    """Space components of the node points on the hyperboloid, (N, n)."""
    with torch.no_grad():
        L = torch.as_tensor(np.asarray(node_feats, dtype=np.float64))
        e = model.node_embeddings(L, params) * torch.exp(params["log_w_txt"])
        return model.geo.exp_map0(e, c).numpy()


def make_pseudo_labels(ckpt: Checkpoint, values: np.ndarray) -> tuple[np.ndarray, augment.CorrelationMatrix]:
    """Soft labels for the unknown entries of ``values`` from a trained checkpoint."""
    params = {k: torch.as_tensor(v) for k, v in ckpt.params.items()}
    space = lifted_node_embeddings(params, ckpt.node_features, ckpt.hp.c)
    corr = augment.correlation(ckpt.node_features, space, ckpt.hp.c)
    soft = np.stack([augment.pseudo_labels(row, corr.C) for row in values]) if len(values) else np.zeros((0, ckpt.N))
    return soft, corr


def _to_checkpoint(params, hp, node_ids, node_feats, fingerprint, phase, metrics, config) -> Checkpoint:
    return Checkpoint(
        hp=hp,
        params={k: v.detach().numpy().copy() for k, v in params.items()},
        node_ids=tuple(node_ids),
        node_features=np.asarray(node_feats, dtype=np.float64),
        fingerprint=fingerprint,
        phase=phase,
        metrics=metrics,
        config=config or {},
    )


def fit(
    features: np.ndarray,
    values: np.ndarray,
    node_feats: np.ndarray,
    hp: HyperParams,
    node_ids: Sequence[str] | None = None,
    fingerprint: str = "",
    config: dict | None = None,
) -> Checkpoint:
    """Phase 1 assume-negative training, then phase 2 if ``hp.epochs_phase2 > 0``."""
    node_ids = tuple(node_ids) if node_ids is not None else tuple(str(k) for k in range(len(node_feats)))
    if len(node_ids) != len(node_feats):
        raise ConfigMismatch(f"{len(node_ids)} node ids for {len(node_feats)} node feature rows")
    params = model.init_params(hp, len(node_ids))
    hist1 = train_phase(params, features, values, node_feats, hp, phase=1, epochs=hp.epochs_phase1)
    ckpt = _to_checkpoint(params, hp, node_ids, node_feats, fingerprint, 1, {"loss_phase1": hist1}, config)
    if hp.epochs_phase2 > 0:
        soft, _ = make_pseudo_labels(ckpt, np.asarray(values))
        ckpt = finetune(ckpt, features, values, soft)
    return ckpt


def finetune(ckpt: Checkpoint, features: np.ndarray, values: np.ndarray, soft: np.ndarray,
             hp: HyperParams | None = None) -> Checkpoint:
    """Phase 2: continue from ``ckpt`` with certain labels plus soft pseudo labels."""
    hp = hp or ckpt.hp
    params = {k: torch.tensor(v) for k, v in ckpt.params.items()}
    hist2 = train_phase(params, features, values, ckpt.node_features, hp, phase=2, epochs=hp.epochs_phase2, soft=soft)
    metrics = dict(ckpt.metrics, loss_phase2=hist2)
    return _to_checkpoint(params, hp, ckpt.node_ids, ckpt.node_features, ckpt.fingerprint, 2, metrics, ckpt.config)


def infer(features: np.ndarray, ckpt: Checkpoint) -> np.ndarray:
    """Node probabilities ``sigmoid(-gamma * d_L)`` for each feature row, (S, N)."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != ckpt.hp.d:
        raise DimensionMismatch(f"features have dim {X.shape[1]}, checkpoint expects {ckpt.hp.d}")
    params = {k: torch.as_tensor(v) for k, v in ckpt.params.items()}
    with torch.no_grad():
        _, _, logits = model.forward(params, torch.as_tensor(X), torch.as_tensor(ckpt.node_features), ckpt.hp)
        return torch.sigmoid(logits).numpy()
