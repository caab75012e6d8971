import hashlib
import json
import os

import pytest

from hlab.cli import load_config, main
from hlab.errors import ExperimentConfigError


def write_config(tmp_path, name="exp.json", **overrides):
    cfg = {
        "family": {"family": "prime-field", "lo": 101, "hi": 181},
        "cover": ["exists z. z*z = x - y"],
        "avoid": ["x = z"],
        "mu": 0.49,
        "seed": 7,
        "mode": "strict",
        "out_dir": str(tmp_path / "default-out"),
        "extension_samples": 100,
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def digest_tree(out_dir):
    found = {}
    for root, _, files in os.walk(out_dir):
        for f in files:
            p = os.path.join(root, f)
            rel = os.path.relpath(p, out_dir)
            found[rel] = hashlib.sha256(open(p, "rb").read()).hexdigest()
    return found


class TestLoadConfig:
    def test_happy_path(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.mu == 0.49
        assert cfg.cover[0].params == ("y",)

    def test_unknown_top_level_key(self, tmp_path):
        path = write_config(tmp_path, bogus=1)
        with pytest.raises(ExperimentConfigError):
            load_config(path)

    def test_unknown_family_key(self, tmp_path):
        path = write_config(tmp_path, family={"family": "prime-field", "low": 3})
        with pytest.raises(ExperimentConfigError):
            load_config(path)

    def test_unknown_family_tag(self, tmp_path):
        path = write_config(tmp_path, family={"family": "octonions", "lo": 3, "hi": 5})
        with pytest.raises(ExperimentConfigError):
            load_config(path)

    def test_bad_formula_rejected_before_work(self, tmp_path):
        path = write_config(tmp_path, cover=["exists z. z*z = x -"])
        with pytest.raises(Exception):
            load_config(path)

    def test_bad_mode(self, tmp_path):
        path = write_config(tmp_path, mode="yolo")
        with pytest.raises(ExperimentConfigError):
            load_config(path)

    def test_formula_object_form(self, tmp_path):
        path = write_config(
            tmp_path,
            cover=[{"text": "exists z. z*z = x - y", "object": "x", "params": ["y"]}],
        )
        cfg = load_config(path)
        assert cfg.cover[0].params == ("y",)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ExperimentConfigError):
            load_config(str(path))

    def test_bad_value_type(self, tmp_path):
        path = write_config(tmp_path, threads="many")
        with pytest.raises(ExperimentConfigError):
            load_config(path)

    def test_bad_mu_range(self, tmp_path):
        path = write_config(tmp_path, mu=1.5)
        with pytest.raises(ExperimentConfigError):
            load_config(path)


class TestCommands:
    def test_profile(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["profile", "--config", cfg, "--out", out]) == 0
        profiles = json.loads(open(os.path.join(out, "profiles.json")).read())
        assert len(profiles) == 2  # cover formula and avoid formula
        assert abs(profiles[0]["E"][0] - 0.5) < 0.02

    def test_profile_counts_csv(self, tmp_path):
        cfg = write_config(tmp_path, emit_counts=True, family={"family": "prime-field", "lo": 5, "hi": 13})
        out = str(tmp_path / "out")
        assert main(["profile", "--config", cfg, "--out", out]) == 0
        lines = open(os.path.join(out, "counts.csv")).read().splitlines()
        assert lines[0] == "formula,size,params,count,class"
        assert len(lines) > 4

    def test_build(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["build", "--config", cfg, "--out", out]) == 0
        payload = json.loads(open(os.path.join(out, "build.json")).read())
        assert payload["builds"], "some structures must pass the threshold"
        for report in payload["builds"]:
            assert report["all_passed"]
            h_file = os.path.join(out, "hsets", f"h_{report['size']}.txt")
            lines = open(h_file).read().split()
            assert [int(v) for v in lines] == report["h"]

    def test_sequence(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["sequence", "--config", cfg, "--out", out]) == 0
        series = open(os.path.join(out, "coarse_dim.csv")).read().splitlines()
        assert series[0] == "size,h_size,ratio"
        plan = json.loads(open(os.path.join(out, "plan.json")).read())
        assert plan["entries"]

    def test_axioms(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["axioms", "--config", cfg, "--out", out]) == 0
        payload = json.loads(open(os.path.join(out, "axioms.json")).read())
        assert payload["reports"]
        assert all(r["passed"] for r in payload["reports"])
        assert not os.path.exists(os.path.join(out, "failures.csv"))

    def test_lovely_pair(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"family": "quadratic-extension-field", "values": [3, 5, 7, 11, 13]},
            cover=[],
            avoid=[],
        )
        out = str(tmp_path / "out")
        assert main(["lovely-pair", "--config", cfg, "--out", out]) == 0
        lines = open(os.path.join(out, "lovely_pair.csv")).read().splitlines()
        assert lines[0] == "p,q,phi_count,q_over_4,deviation,violations"
        assert len(lines) == 6
        assert all(line.endswith(",0") for line in lines[1:])

    def test_lovely_pair_sweep_flag(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"family": "quadratic-extension-field", "values": [5]},
            cover=[],
            avoid=[],
            sweep_a1=True,
        )
        out = str(tmp_path / "out")
        assert main(["lovely-pair", "--config", cfg, "--out", out]) == 0
        lines = open(os.path.join(out, "lovely_pair.csv")).read().splitlines()
        assert len(lines) == 1 + (25 - 5)  # every non-subfield choice of a1

    def test_axioms_failure_exit_code(self, tmp_path):
        # five shift formulas on a tiny group swallow whole solution sets:
        # the extension check must fail and the command must exit 1
        cfg = write_config(
            tmp_path,
            family={"family": "cyclic-group", "lo": 9, "hi": 40},
            cover=["!(x = y)"],
            avoid=["x = z", "x = z + 1", "x = z + 2", "x = z + 3", "x = z + 4"],
            mu=0.4,
            mode="best_effort",
            extension_samples=60,
        )
        out = str(tmp_path / "out")
        assert main(["axioms", "--config", cfg, "--out", out]) == 1
        assert os.path.exists(os.path.join(out, "axioms.json"))
        assert os.path.exists(os.path.join(out, "failures.csv"))


class TestExitCodes:
    def test_unknown_key_is_config_error(self, tmp_path):
        cfg = write_config(tmp_path, bogus=1)
        assert main(["profile", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["profile", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2

    def test_lovely_pair_p2_guard(self, tmp_path):
        cfg = write_config(
            tmp_path,
            family={"family": "quadratic-extension-field", "values": [2, 3, 5]},
            cover=[],
            avoid=[],
        )
        assert main(["lovely-pair", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_build_needs_avoid_formula(self, tmp_path):
        cfg = write_config(tmp_path, avoid=[])
        assert main(["build", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_coarse_dim_only_for_sequence(self, tmp_path):
        cfg = write_config(tmp_path, mode="coarse-dim")
        assert main(["build", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_sequence_rejects_best_effort(self, tmp_path):
        cfg = write_config(tmp_path, mode="best_effort")
        assert main(["sequence", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_sequence_coarse_dim_mode(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["sequence", "--config", cfg, "--out", out, "--mode", "coarse-dim"]) == 0
        assert os.path.exists(os.path.join(out, "coarse_dim.csv"))

    def test_no_partial_files_on_config_error(self, tmp_path):
        cfg = write_config(tmp_path, bogus=1)
        out = tmp_path / "o"
        main(["profile", "--config", cfg, "--out", str(out)])
        assert not out.exists() or not any(out.iterdir())

    def test_no_tmp_remnants_on_success(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert main(["build", "--config", cfg, "--out", out]) == 0
        leftovers = [f for f in digest_tree(out) if f.endswith(".tmp")]
        assert leftovers == []


class TestDeterminism:
    @pytest.mark.parametrize("command", ["profile", "build", "sequence", "axioms"])
    def test_threads_and_reruns_byte_identical(self, tmp_path, command):
        cfg = write_config(tmp_path, family={"family": "prime-field", "lo": 101, "hi": 151})
        outs = [str(tmp_path / f"o{i}") for i in range(3)]
        assert main([command, "--config", cfg, "--out", outs[0], "--threads", "1"]) == 0
        assert main([command, "--config", cfg, "--out", outs[1], "--threads", "8"]) == 0
        assert main([command, "--config", cfg, "--out", outs[2], "--threads", "1"]) == 0
        d0, d1, d2 = (digest_tree(o) for o in outs)
        assert d0 == d1 == d2
        assert d0, "reports were written"

    def test_seed_changes_extension_sampling(self, tmp_path):
        cfg = write_config(tmp_path, family={"family": "prime-field", "lo": 101, "hi": 131})
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(["axioms", "--config", cfg, "--out", out_a, "--seed", "1"]) == 0
        assert main(["axioms", "--config", cfg, "--out", out_b, "--seed", "2"]) == 0
        a = json.loads(open(os.path.join(out_a, "axioms.json")).read())
        b = json.loads(open(os.path.join(out_b, "axioms.json")).read())
        assert a["reports"][0]["seed"] != b["reports"][0]["seed"]
