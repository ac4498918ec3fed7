import json

import pytest

from objcap import cli, trainer
from objcap.corpus import load_dataset


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = root / "spec.json"
    spec.write_text(json.dumps(
        {"num_scenes": 4, "seed": 9, "num_frames": 10}))
    out = root / "data"
    assert cli.main(["synth", "--spec", str(spec), "--out", str(out)]) == 0
    return spec, out


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, synth_dir):
    _, data = synth_dir
    root = tmp_path_factory.mktemp("train")
    cfg = root / "run.cfg"
    trainer.save_config(trainer.TrainConfig(
        epochs=3, T_s=6, feature_dim=16, embed_dim=16, hidden_dim=24,
        attn_dim=12, enh_hidden=24, seed=2), cfg)
    out = root / "run"
    assert cli.main(["train", "--config", str(cfg), "--data", str(data),
                     "--out", str(out)]) == 0
    return cfg, out


def test_synth_outputs(synth_dir):
    spec, out = synth_dir
    objects = load_dataset(out / "dataset.jsonl")
    assert objects
    for vid in {o.video_id for o in objects}:
        assert (out / f"{vid}.ovcr").exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 9
    assert str(spec) in manifest["input_hashes"]


def test_synth_determinism(tmp_path, synth_dir, capsys):
    spec, out = synth_dir
    out2 = tmp_path / "again"
    code, _, _ = run(capsys, "synth", "--spec", str(spec),
                     "--out", str(out2))
    assert code == 0
    assert ((out / "dataset.jsonl").read_bytes()
            == (out2 / "dataset.jsonl").read_bytes())
    vid = load_dataset(out / "dataset.jsonl")[0].video_id
    assert ((out / f"{vid}.ovcr").read_bytes()
            == (out2 / f"{vid}.ovcr").read_bytes())


def test_seed_precedence(tmp_path, synth_dir, capsys, monkeypatch):
    spec, _ = synth_dir
    monkeypatch.setenv("OVC_SEED", "33")
    out_env = tmp_path / "env"
    run(capsys, "synth", "--spec", str(spec), "--out", str(out_env))
    assert json.loads((out_env / "run_manifest.json").read_text())["seed"] == 33

    out_flag = tmp_path / "flag"
    run(capsys, "synth", "--spec", str(spec), "--out", str(out_flag),
        "--seed", "44")
    assert json.loads(
        (out_flag / "run_manifest.json").read_text())["seed"] == 44


def test_train_outputs(train_dir):
    _, out = train_dir
    assert (out / "checkpoint.ovck").exists()
    assert (out / "log.csv").read_text().startswith("epoch,")
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "train"
    ckpt = trainer.load_checkpoint(out / "checkpoint.ovck")
    assert ckpt.epoch == 3


def test_eval_command(train_dir, synth_dir, tmp_path, capsys):
    _, run_dir = train_dir
    _, data = synth_dir
    out = tmp_path / "eval"
    code, stdout, _ = run(capsys, "eval",
                          "--ckpt", str(run_dir / "checkpoint.ovck"),
                          "--data", str(data), "--out", str(out))
    assert code == 0
    report = json.loads(stdout)
    assert set(report) >= {"b1", "b4", "meteor", "rouge_l", "cider_d",
                           "de_accuracy"}
    assert json.loads((out / "report.json").read_text()) == report


def test_generate_command(train_dir, synth_dir, capsys):
    _, run_dir = train_dir
    _, data = synth_dir
    oid = load_dataset(data / "dataset.jsonl")[0].object_id
    code, stdout, _ = run(capsys, "generate",
                          "--ckpt", str(run_dir / "checkpoint.ovck"),
                          "--data", str(data), "--object", oid)
    assert code == 0
    assert stdout.strip()  # some caption text

    code, _, stderr = run(capsys, "generate",
                          "--ckpt", str(run_dir / "checkpoint.ovck"),
                          "--data", str(data), "--object", "nope")
    assert code == 2
    assert "not found" in stderr


def test_generate_beam_mode(train_dir, synth_dir, capsys):
    _, run_dir = train_dir
    _, data = synth_dir
    oid = load_dataset(data / "dataset.jsonl")[0].object_id
    code, stdout, _ = run(capsys, "generate",
                          "--ckpt", str(run_dir / "checkpoint.ovck"),
                          "--data", str(data), "--object", oid,
                          "--mode", "beam", "--beam-width", "2")
    assert code == 0
    assert stdout.strip()


def test_score_command(tmp_path, capsys):
    cand = tmp_path / "cand.jsonl"
    ref = tmp_path / "ref.jsonl"
    cand.write_text(json.dumps(
        {"object_id": "a", "caption": "the red car moves right"}) + "\n")
    ref.write_text(json.dumps(
        {"object_id": "a", "caption": "the red car moves right"}) + "\n")
    code, stdout, _ = run(capsys, "score", "--cand", str(cand),
                          "--ref", str(ref))
    assert code == 0
    report = json.loads(stdout)
    assert report["b4"] == pytest.approx(1.0)
    assert report["rouge_l"] == pytest.approx(1.0)

    other = tmp_path / "other.jsonl"
    other.write_text(json.dumps(
        {"object_id": "zzz", "caption": "nothing shared"}) + "\n")
    code, _, stderr = run(capsys, "score", "--cand", str(cand),
                          "--ref", str(other))
    assert code == 2
    assert "shared" in stderr


def test_ablate_command(synth_dir, tmp_path, capsys):
    _, data = synth_dir
    cfg = tmp_path / "ab.cfg"
    trainer.save_config(trainer.TrainConfig(
        epochs=2, T_s=6, feature_dim=8, embed_dim=8, hidden_dim=12,
        attn_dim=8, enh_hidden=12), cfg)
    out = tmp_path / "ab"
    code, stdout, _ = run(capsys, "ablate", "--config", str(cfg),
                          "--data", str(data), "--seeds", "1",
                          "--test-videos", "1", "--out", str(out))
    assert code == 0
    rows = json.loads(stdout)
    assert [r["row"] for r in rows] == [n for n, _ in trainer.ABLATION_LADDER]
    full = json.loads((out / "ablation.json").read_text())
    assert len(full) == 6 and full[0]["seeds"] == 1


def test_error_exit_code(tmp_path, capsys):
    code, _, stderr = run(capsys, "eval", "--ckpt",
                          str(tmp_path / "missing.ovck"),
                          "--data", str(tmp_path))
    assert code == 1
    assert "error:" in stderr


def test_bad_config_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    code, _, stderr = run(capsys, "train", "--config", str(cfg),
                          "--data", str(tmp_path), "--out",
                          str(tmp_path / "o"))
    assert code == 1
    assert "nonsense" in stderr
