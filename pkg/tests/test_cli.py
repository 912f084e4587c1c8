import json

import pytest

from d2sm.cli import build_parser, main
from d2sm.tensorio import read_tensor


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen-data", "--count", "8", "--holdout", "4", "--height", "16", "--width", "16",
                 "--sigma", "0.1", "--seed", "2", "--out", str(root)]) == 0
    return root


def test_gen_data_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        code, out, _ = run(capsys, "gen-data", "--count", "3", "--holdout", "1", "--height", "8",
                           "--width", "8", "--seed", "4", "--out", str(tmp_path / name))
        assert code == 0 and json.loads(out)["count"] == 3
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_grad_check(capsys):
    code, out, _ = run(capsys, "grad-check", "--n", "6", "--d", "8", "--seed", "1", "--variant", "kl")
    res = json.loads(out)
    assert code == 0 and res["max_rel_err"] <= 1e-3 and res["ok"]


def test_extract_and_divergence_identity(dataset, tmp_path, capsys):
    code, out, _ = run(capsys, "extract", "--manifest", str(dataset), "--seed", "0",
                       "--out", str(tmp_path / "f"))
    assert code == 0 and json.loads(out)["splits"] == {"train": 8, "test": 4}
    feats = tmp_path / "f" / "train_clean.d2t"
    assert read_tensor(feats).shape == (8, 16)
    code, out, _ = run(capsys, "divergence", "--a", str(feats), "--b", str(feats), "--variant", "kl")
    res = json.loads(out)
    assert code == 0 and res["n"] == 8 and abs(res["value"]) <= 1e-9
    code, out, _ = run(capsys, "divergence", "--a", str(tmp_path / "f" / "train_noisy.d2t"),
                       "--b", str(feats), "--variant", "js")
    assert code == 0 and json.loads(out)["value"] > 0


def test_extract_reproducible(dataset, tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "extract", "--manifest", str(dataset), "--seed", "3", "--out", str(tmp_path / name))
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_divergence_patch_mode(dataset, tmp_path, capsys):
    a = dataset / "noisy" / "00000.d2t"
    b = dataset / "clean" / "00000.d2t"
    code, out, _ = run(capsys, "divergence", "--a", str(a), "--b", str(b), "--variant", "kl",
                       "--patch-size", "8", "--stride", "4")
    res = json.loads(out)
    assert code == 0 and res["n"] == 9 and res["value"] >= -1e-9
    code, _, err = run(capsys, "divergence", "--a", str(a), "--b", str(b))
    assert code == 1 and err.startswith("error:")


def test_train_and_eval(dataset, tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(f"dataset = {dataset}\nsteps = 4\nbatch_size = 4\npatch_size = 8\nstride = 4\n"
                   "eval_every = 2\nlambda = 0.1\nvariant = kl\n")
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "train", "--config", str(cfg), "--out", str(tmp_path / name))
        assert code == 0
        outs.append(json.loads(out))
    assert outs[0]["records"] == 2
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    code, out, _ = run(capsys, "eval", "--checkpoint", str(tmp_path / "a" / "checkpoint"),
                       "--dataset", str(dataset))
    rec = json.loads(out)
    assert code == 0 and rec["step"] == 4 and rec["mode"] == "patch"
    assert rec["psnr"] == pytest.approx(outs[0]["final"]["psnr"], abs=0)


def test_train_flags_override_config(dataset, tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--dataset", str(dataset), "--steps", "2", "--batch-size", "2",
                       "--mode", "batch", "--variant", "none", "--eval-every", "1",
                       "--patch-size", "8", "--stride", "8", "--out", str(tmp_path / "o"))
    assert code == 0 and json.loads(out)["records"] == 2
    assert "mode = batch" in (tmp_path / "o" / "config.txt").read_text()


def test_validation_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.d2t"
    bad.write_bytes(b"XXXX\x01\x01\x02\x00\x00\x00" + bytes(8))
    code, _, err = run(capsys, "divergence", "--a", str(bad), "--b", str(bad))
    assert code == 1 and err.startswith("error:") and err.count("\n") == 1
    code, _, err = run(capsys, "train", "--steps", "1")
    assert code == 1 and "dataset" in err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["grad-check", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


@pytest.mark.parametrize("sub", ["gen-data", "extract", "divergence", "grad-check", "train", "eval"])
def test_help_lists_flags(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main([sub, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    parser = build_parser()
    subparser = parser._subparsers._group_actions[0].choices[sub]
    for action in subparser._actions:
        for opt in action.option_strings:
            assert opt in out
