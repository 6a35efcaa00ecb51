"""Physical-to-semantic mapping: disentangled heads aligned to node embeddings
on the Lorentz hyperboloid."""

from verbspace.p2s.checkpoint import Checkpoint
from verbspace.p2s.model import HyperParams
from verbspace.p2s.train import finetune, fit, infer, make_pseudo_labels, stack_labels
from verbspace.p2s.transfer import TransferHead, fit_transfer_head, predict_actions

__all__ = ["Checkpoint", "HyperParams", "finetune", "fit", "infer", "make_pseudo_labels", "stack_labels",
           "TransferHead", "fit_transfer_head", "predict_actions"]
