import json

import numpy as np
import pytest

from seqlab import cli, datagen
from seqlab.labels import Vocabulary
from seqlab.trainer import read_jsonl


@pytest.fixture
def dataset(tmp_path):
    spec = datagen.GenSpec(n_frames=20, snr=10.0, seed=0)
    datagen.save_dataset(tmp_path / "train", spec, datagen.generate(spec, 8))
    datagen.save_dataset(tmp_path / "eval", spec,
                         datagen.generate(spec, 4, start=100))
    return tmp_path


def test_convert(tmp_path):
    vocab = Vocabulary(["speech", "car"])
    vocab.to_json(tmp_path / "vocab.json")
    (tmp_path / "strong.tsv").write_text(
        "clip1\t0.50\t2.00\tspeech\nclip1\t1.00\t1.50\tcar\n")
    out = tmp_path / "seq.jsonl"
    rc = cli.run(["convert", "--in", str(tmp_path / "strong.tsv"),
                  "--vocab", str(tmp_path / "vocab.json"),
                  "--out", str(out), "--weak"])
    assert rc == 0
    rec = read_jsonl(out)[0]
    assert rec["clip"] == "clip1"
    assert rec["sequential"] == ["onset:speech", "onset:car", "offset:car",
                                 "offset:speech"]
    assert rec["weak"] == ["car", "speech"]


def test_convert_bad_tsv_exit_2(tmp_path):
    Vocabulary(["a"]).to_json(tmp_path / "vocab.json")
    (tmp_path / "bad.tsv").write_text("clip\t2.00\t1.00\ta\n")
    rc = cli.run(["convert", "--in", str(tmp_path / "bad.tsv"),
                  "--vocab", str(tmp_path / "vocab.json"),
                  "--out", str(tmp_path / "o.jsonl")])
    assert rc == 2


def test_missing_args_exit_1():
    assert cli.run(["convert"]) == 1
    assert cli.run([]) == 1


def test_gen_and_loss(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"n_frames": 10, "seed": 1}))
    rc = cli.run(["gen", "--out", str(tmp_path / "ds"), "--n", "3",
                  "--config", str(cfg)])
    assert rc == 0
    spec, clips = datagen.load_dataset(tmp_path / "ds")
    assert spec.n_frames == 10 and len(clips) == 3

    post = np.array([[0.1], [0.9], [0.2]])
    np.save(tmp_path / "post.npy", post)
    Vocabulary(["a"]).to_json(tmp_path / "vocab.json")
    (tmp_path / "target.json").write_text('["onset:a", "offset:a"]')
    rc = cli.run(["loss", "--kind", "ctl", "--post",
                  str(tmp_path / "post.npy"), "--labels",
                  str(tmp_path / "target.json"), "--vocab",
                  str(tmp_path / "vocab.json"),
                  "--grad-out", str(tmp_path / "grad.npy")])
    assert rc == 0
    assert np.load(tmp_path / "grad.npy").shape == (3, 1)


def test_train_deterministic_and_checkpoint(dataset, tmp_path):
    cfgpath = tmp_path / "cfg.json"
    cfgpath.write_text(json.dumps({"epochs": 2}))
    args = ["train", "--data", str(dataset / "train"),
            "--eval-data", str(dataset / "eval"),
            "--config", str(cfgpath), "--seed", "1"]
    assert cli.run(args + ["--out", str(tmp_path / "run1.jsonl"),
                           "--ckpt", str(tmp_path / "model")]) == 0
    assert cli.run(args + ["--out", str(tmp_path / "run2.jsonl")]) == 0
    assert (tmp_path / "run1.jsonl").read_bytes() == \
        (tmp_path / "run2.jsonl").read_bytes()
    records = read_jsonl(tmp_path / "run1.jsonl")
    assert records[0]["kind"] == "config"
    assert records[0]["combo"] == "strong+weak+seq"
    assert "segment_f1" in records[-1]
    from seqlab.model import ToyModel
    m = ToyModel.load(str(tmp_path / "model"))
    assert m.n_classes == 4


def test_train_mt(dataset, tmp_path):
    cfgpath = tmp_path / "cfg.json"
    cfgpath.write_text(json.dumps({"epochs": 1, "rampup_steps": 2}))
    rc = cli.run(["train-mt", "--labeled", str(dataset / "train"),
                  "--unlabeled", str(dataset / "eval"),
                  "--eval-data", str(dataset / "eval"),
                  "--config", str(cfgpath),
                  "--out", str(tmp_path / "mt.jsonl")])
    assert rc == 0
    records = read_jsonl(tmp_path / "mt.jsonl")
    kinds = {r["kind"] for r in records}
    assert kinds == {"config", "step", "epoch"}


def test_eval_json(tmp_path, capsys):
    Vocabulary(["a"]).to_json(tmp_path / "vocab.json")
    (tmp_path / "ref.tsv").write_text("c\t0.00\t2.00\ta\n")
    (tmp_path / "pred.tsv").write_text("c\t0.00\t2.00\ta\n")
    rc = cli.run(["eval", "--ref", str(tmp_path / "ref.tsv"),
                  "--pred", str(tmp_path / "pred.tsv"),
                  "--vocab", str(tmp_path / "vocab.json")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["segment"]["macro_f1"] == 1.0
    assert out["event"]["macro_f1"] == 1.0
    assert out["peak_cluster"] == 1.0


def test_report_emits_all_seven_rows(tmp_path, capsys):
    # one real run log, one failed (no eval records): the table still lists
    # every label combination
    from seqlab.trainer import write_jsonl
    write_jsonl(tmp_path / "ok.jsonl", [
        {"kind": "config", "combo": "strong"},
        {"kind": "epoch", "epoch": 0, "event_f1": 0.5, "segment_f1": 0.75},
    ])
    write_jsonl(tmp_path / "failed.jsonl", [
        {"kind": "config", "combo": "weak"},
    ])
    rc = cli.run(["report", "--runs", str(tmp_path / "ok.jsonl"),
                  str(tmp_path / "failed.jsonl"), "--json"])
    assert rc == 0
    table = json.loads(capsys.readouterr().out)
    assert set(table) >= set(cli.LABEL_COMBOS)
    assert table["strong"]["median_segment_f1"] == 0.75
    assert table["weak"] == {"runs": 1, "failed": 1, "median_event_f1": None,
                             "median_segment_f1": None}
    rc = cli.run(["report", "--runs", str(tmp_path / "ok.jsonl")])
    assert rc == 0
    text = capsys.readouterr().out
    for combo in cli.LABEL_COMBOS:
        assert combo in text
