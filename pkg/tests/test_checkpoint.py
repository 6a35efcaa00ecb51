import numpy as np
import pytest

from verbspace.errors import FingerprintMismatch
from verbspace.p2s import Checkpoint, HyperParams
from verbspace.p2s.checkpoint import MalformedCheckpoint


def make():
    g = np.random.default_rng(0)
    hp = HyperParams(d=3, n=2, d_text=4, epochs_phase2=2, hard_pseudo_threshold=0.5)
    params = {"W": g.standard_normal((2, 2, 3)), "b": np.zeros((2, 2)), "P": g.standard_normal((2, 4)),
              "log_w_img": np.array(-0.3), "log_w_txt": np.array(0.1)}
    return Checkpoint(hp, params, ("a", "root"), g.random((2, 4)), "abc", 2, {"loss_phase1": [0.5, 0.25]}, {"seed": 0})


def test_roundtrip_bit_exact(tmp_path):
    ck = make()
    ck.save(tmp_path / "c.ck")
    back = Checkpoint.load(tmp_path / "c.ck")
    assert back.hp == ck.hp and back.node_ids == ck.node_ids and back.phase == 2
    assert back.metrics == ck.metrics and back.config == ck.config
    for k, v in ck.params.items():
        assert np.array_equal(back.params[k], v) and back.params[k].shape == v.shape
    assert np.array_equal(back.node_features, ck.node_features)
    assert back.to_bytes() == ck.to_bytes()


def test_bytes_stable_across_instances():
    assert make().to_bytes() == make().to_bytes()


def test_fingerprint_check():
    ck = make()
    ck.check_fingerprint("abc")
    with pytest.raises(FingerprintMismatch):
        ck.check_fingerprint("xyz")


def test_malformed():
    with pytest.raises(MalformedCheckpoint):
        Checkpoint.from_bytes(b"garbage")
    import safetensors.numpy as st
    with pytest.raises(MalformedCheckpoint):
        Checkpoint.from_bytes(st.save({"x": np.zeros(1)}, metadata={"format": "other"}))
