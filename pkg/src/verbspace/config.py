"""Run configuration: one JSON object, unknown keys rejected."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from verbspace import nodetext
from verbspace.errors import ConfigMismatch
from verbspace.p2s.model import HyperParams


@dataclass(frozen=True)
class RunConfig:
    taxonomy_path: str | None = None
    d: int = 60
    n: int = 16
    d_text: int = 256
    c: float = 1.0
    K: float = 0.1
    gamma: float = 1.0
    omega: float = 0.01
    lr: float = 10.0
    lr_phase2: float | None = 1.0
    momentum: float = 0.0
    batch_size: int = 128
    warmup_epochs: int = 5
    epochs_phase1: int = 100
    epochs_phase2: int = 0
    hidden: int = 0
    disentangle: bool = True
    hard_pseudo_threshold: float | None = None
    rare_threshold: int = 10
    fps: float = 3.0
    seed: int = 0
    ancestor_closure: bool = False
    unknown_eval_policy: str = "negative"
    summary_budget: int = nodetext.TOKEN_BUDGET
    textrank_window: int = nodetext.WINDOW

    def __post_init__(self):
        checks = [
            (self.fps > 0, "fps must be positive"),
            (self.rare_threshold >= 0, "rare_threshold must be >= 0"),
            (self.summary_budget >= 1, "summary_budget must be >= 1"),
            (self.textrank_window >= 2, "textrank_window must be >= 2"),
            (self.unknown_eval_policy in ("negative", "exclude"), "unknown_eval_policy must be 'negative' or 'exclude'"),
            (0.0 <= self.momentum < 1.0, "momentum must be in [0, 1)"),
            (self.hard_pseudo_threshold is None or 0.0 <= self.hard_pseudo_threshold <= 1.0,
             "hard_pseudo_threshold must be in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigMismatch(msg)
        self.hyperparams()  # validates the model fields

    def hyperparams(self) -> HyperParams:
        names = {f.name for f in fields(HyperParams)}
        return HyperParams(**{k: v for k, v in asdict(self).items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigMismatch("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigMismatch(f"unknown config keys: {', '.join(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigMismatch(str(exc)) from exc


def load_config(path) -> RunConfig:
    """Read a JSON config; relative ``taxonomy_path`` resolves against the file."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigMismatch(f"{path}: {exc}") from exc
    cfg = RunConfig.from_dict(data)
    if cfg.taxonomy_path and not Path(cfg.taxonomy_path).is_absolute():
        cfg = replace(cfg, taxonomy_path=str(Path(path).parent / cfg.taxonomy_path))
    return cfg
