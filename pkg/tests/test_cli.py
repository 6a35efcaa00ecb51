import json
import subprocess
import sys

import pytest

from verbspace import cli
from verbspace import taxonomy as tx

from conftest import DATA


def run(*argv):
    return cli.main([str(a) for a in argv])


def run_proc(*argv):
    return subprocess.run([sys.executable, "-m", "verbspace.cli", *map(str, argv)], capture_output=True)


def test_prompt_golden_bytes(verbs_path):
    proc = run_proc("taxonomy", "prompt", "touch-20-1", "--taxonomy", verbs_path)
    assert proc.returncode == 0
    assert proc.stdout == (DATA / "prompt_touch-20-1.txt").read_bytes()


def test_validate_and_show(verbs_path, tmp_path, capsys):
    assert run("taxonomy", "validate", "--taxonomy", verbs_path) == 0
    assert run("taxonomy", "show", "--taxonomy", verbs_path) == 0
    out = capsys.readouterr().out
    assert "nodes: 10" in out and "leaves: 4" in out
    cyclic = tmp_path / "cyc.json"
    cyclic.write_text(json.dumps({"format_version": 1, "nodes": [{"id": "A", "parent": "B"}, {"id": "B", "parent": "A"}]}))
    assert run("taxonomy", "validate", "--taxonomy", cyclic) == 2
    assert "CyclicTaxonomy" in capsys.readouterr().err


def test_exit_codes(verbs_path, tmp_path):
    assert run("taxonomy") == 1
    assert run("nonsense") == 1
    assert run("taxonomy", "prompt", "--taxonomy", verbs_path) == 1
    assert run("taxonomy", "prompt", "no-such-node", "--taxonomy", verbs_path) == 2
    assert run("taxonomy", "validate", "--taxonomy", tmp_path / "missing.json") == 3
    bad = tmp_path / "c.json"
    bad.write_text('{"epochs": 3}')
    assert run("taxonomy", "validate", "--config", bad, "--taxonomy", verbs_path) == 2


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def accepted(dataset, cls, node):
    votes = [["a", "accept"], ["b", "accept"], ["c", "reject"]]
    return {"dataset": dataset, "class_label": cls,
            "candidates": [{"node": node, "similarity": 1.0, "status": "accepted", "verdicts": votes}]}


def test_ingest_clip_six_frames(verbs_path, tmp_path):
    manifest = write_jsonl(tmp_path / "m.jsonl", [
        {"sample_id": "clip1", "dataset": "kin", "modality": "video-clip", "classes": ["wiping"], "duration": 2.0}])
    mapping = write_jsonl(tmp_path / "map.jsonl", [accepted("kin", "wiping", "wipe-10.4"),
                                                   accepted("kin", "hugging", "touch-20-1")])
    out = tmp_path / "labels.jsonl"
    assert run("ingest", "--manifest", manifest, "--mapping", mapping, "--taxonomy", verbs_path, "--out", out) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(recs) == 6
    assert [r["sample_id"] for r in recs] == [f"clip1/{k}" for k in range(6)]
    assert recs[0] == {"neg": ["touch-20-1"], "pos": ["wipe-10.4"], "sample_id": "clip1/0", "timestamp": 0.0}
    first = out.read_bytes()
    assert run("ingest", "--manifest", manifest, "--mapping", mapping, "--taxonomy", verbs_path, "--out", out) == 0
    assert out.read_bytes() == first


def test_ingest_unmapped(verbs_path, tmp_path):
    manifest = write_jsonl(tmp_path / "m.jsonl", [
        {"sample_id": "i", "dataset": "kin", "modality": "image", "classes": ["juggling"]}])
    mapping = write_jsonl(tmp_path / "map.jsonl", [accepted("kin", "wiping", "wipe-10.4")])
    args = ["ingest", "--manifest", manifest, "--mapping", mapping, "--taxonomy", verbs_path, "--out", tmp_path / "o"]
    assert run(*args) == 2
    assert run(*args, "--allow-unmapped") == 0


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert run("synth", "--out", d, "--train", 300, "--test", 120, "--remove", 0.4, "--seed", 1) == 0
    cfg = d / "config.json"
    cfg.write_text(json.dumps({"taxonomy_path": "taxonomy.json", "epochs_phase1": 4, "epochs_phase2": 2}))
    base = d / "base.json"
    base.write_text(json.dumps({"taxonomy_path": "taxonomy.json", "epochs_phase1": 4}))
    return d


def test_pipeline(corpus):
    d = corpus
    common = ["--config", d / "config.json"]
    assert run("train", "--config", d / "base.json", "--features", d / "train.pgea",
               "--labels", d / "train.labels.jsonl", "--out", d / "p1.ck") == 0
    assert run("augment", *common, "--checkpoint", d / "p1.ck", "--labels", d / "train.labels.jsonl",
               "--out", d / "aug.jsonl") == 0
    recs = [json.loads(line) for line in (d / "aug.jsonl").read_text().splitlines()]
    assert all(0.0 <= v <= 1.0 for r in recs for v in r["soft"].values())
    assert run("train", *common, "--init", d / "p1.ck", "--features", d / "train.pgea", "--labels", d / "aug.jsonl",
               "--out", d / "p2.ck") == 0
    for ck in ("p1", "p2"):
        assert run("eval", *common, "--checkpoint", d / f"{ck}.ck", "--features", d / "test.pgea",
                   "--labels", d / "test.labels.jsonl", "--train-labels", d / "train.labels.jsonl",
                   "--out", d / f"{ck}.report.json") == 0
        rep = json.loads((d / f"{ck}.report.json").read_text())
        assert set(rep) >= {"map_full", "map_rare", "map_nonrare", "per_node"}
        assert len(rep["per_node"]) == 12
    assert run("infer", *common, "--checkpoint", d / "p2.ck", "--features", d / "test.pgea", "--out", d / "s.pgea") == 0
    from verbspace import fileio
    ids, S = fileio.read_features(d / "s.pgea")
    assert S.shape == (120, 16) and ids[0] == "test-00000"
    # phase-2 fine-tuning needs augmented labels
    assert run("train", *common, "--init", d / "p1.ck", "--features", d / "train.pgea",
               "--labels", d / "train.labels.jsonl", "--out", d / "x.ck") == 2


def test_phase2_zero_matches_baseline(corpus):
    d = corpus
    for name, cfg in (("a", "base.json"), ("b", "base.json")):
        assert run("train", "--config", d / cfg, "--features", d / "train.pgea", "--labels", d / "train.labels.jsonl",
                   "--out", d / f"{name}.ck") == 0
    assert (d / "a.ck").read_bytes() == (d / "b.ck").read_bytes()


def test_reruns_byte_identical_across_processes(corpus):
    d = corpus
    outs = []
    for k in range(2):
        args = ["train", "--config", d / "config.json", "--features", d / "train.pgea",
                "--labels", d / "train.labels.jsonl", "--out", d / f"r{k}.ck"]
        assert run_proc(*args).returncode == 0
        rep = run_proc("eval", "--config", d / "config.json", "--checkpoint", d / f"r{k}.ck",
                       "--features", d / "test.pgea", "--labels", d / "test.labels.jsonl")
        assert rep.returncode == 0
        outs.append(((d / f"r{k}.ck").read_bytes(), rep.stdout))
    assert outs[0] == outs[1]
    assert json.loads(outs[0][1])["map_full"] > 0


def test_seed_changes_output(corpus):
    d = corpus
    args = ["train", "--config", d / "base.json", "--features", d / "train.pgea", "--labels", d / "train.labels.jsonl"]
    assert run(*args, "--out", d / "s0.ck") == 0
    assert run(*args, "--out", d / "s9.ck", "--seed", 9) == 0
    assert (d / "s0.ck").read_bytes() != (d / "s9.ck").read_bytes()


def test_fingerprint_mismatch_aborts(corpus, verbs_path):
    d = corpus
    args = ["train", "--config", d / "base.json", "--features", d / "train.pgea", "--labels", d / "train.labels.jsonl",
            "--out", d / "f.ck"]
    assert run(*args) == 0
    other = d / "other.json"
    t = tx.load_taxonomy(d / "taxonomy.json")
    doc = json.loads(tx.serialize_taxonomy(t))
    doc["nodes"][0]["gloss"] = "changed"
    other.write_text(json.dumps(doc))
    assert run("infer", "--taxonomy", other, "--checkpoint", d / "f.ck", "--features", d / "test.pgea",
               "--out", d / "never.pgea") == 2
    assert not (d / "never.pgea").exists()
