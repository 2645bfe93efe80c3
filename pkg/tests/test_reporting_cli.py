import json
from pathlib import Path

import numpy as np
import pytest

from clickadapt import (
    AdaptationConfig,
    ClickSegmenter,
    ModelSpec,
    SyntheticDomainSpec,
    generate_domain,
    run_stream,
)
from clickadapt.cli import main
from clickadapt.reporting import build_summary, write_report, write_report_csv

CFG = AdaptationConfig(rng_seed=0, click_budget=3)


def tiny_report(seed=0, k=2):
    data = generate_domain(
        SyntheticDomainSpec(family="multi-blob", count=2, seed=230)
        if k == 2
        else SyntheticDomainSpec(family="ellipses", num_classes=3, count=2, seed=230)
    )
    model = ClickSegmenter(ModelSpec(num_classes=k), seed=seed)
    return run_stream(data, model, CFG.frozen())


class TestReporting:
    def test_csv_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report_csv(tiny_report(), a)
        write_report_csv(tiny_report(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_csv_schema(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(tiny_report(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "scenario,seed,image_id,t,dice_mean,dice_1"
        assert len(lines) == 1 + 2 * 3  # 2 images x 3 clicks

    def test_csv_union_column_for_multiclass(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(tiny_report(k=3), path)
        header = path.read_text().splitlines()[0]
        assert header.endswith("dice_1,dice_2,dice_union")

    def test_summary_fields(self):
        summary = build_summary(tiny_report())
        assert summary["v"] == 1
        assert set(summary["mean_dice_at_t"]) == {"1", "2", "3"}
        assert summary["updates"]["total"] == 0
        assert summary["clicks_to_target"]["cap"] == 3
        assert "update_mean_s" in summary["timings"]

    def test_write_report_creates_both(self, tmp_path):
        csv_path, json_path = write_report(tiny_report(), tmp_path / "out")
        assert csv_path.exists() and json_path.exists()
        json.loads(json_path.read_text())


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """gen-data + a 2-epoch pretrain once for all CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    src = root / "src_data"
    tgt = root / "tgt_data"
    ckpt = root / "model.ckpt"
    assert main(["gen-data", "--out", str(src), "--family", "multi-blob",
                 "--count", "8", "--seed", "3"]) == 0
    assert main(["gen-data", "--out", str(tgt), "--family", "multi-blob",
                 "--count", "3", "--seed", "4", "--domain-tag", "target",
                 "--shift", "invert", "--shift", "noise:0.05"]) == 0
    assert main(["pretrain", "--data", str(src), "--out", str(ckpt),
                 "--epochs", "2", "--seed", "0"]) == 0
    return root, src, tgt, ckpt


class TestCli:
    def test_gen_data_layout(self, cli_workspace):
        _, src, _, _ = cli_workspace
        manifest = json.loads((src / "manifest.json").read_text())
        assert manifest["num_classes"] == 2
        assert len(manifest["ids"]) == 8
        assert (src / "images" / f"{manifest['ids'][0]}.png").exists()
        assert (src / "masks" / f"{manifest['ids'][0]}.png").exists()

    def test_evaluate_and_adapt(self, cli_workspace):
        root, _, tgt, ckpt = cli_workspace
        out_eval = root / "eval_out"
        assert main(["evaluate", "--data", str(tgt), "--checkpoint", str(ckpt),
                     "--out", str(out_eval), "--clicks", "3", "--seed", "1"]) == 0
        summary = json.loads((out_eval / "summary.json").read_text())
        assert summary["updates"]["total"] == 0

        out_adapt = root / "adapt_out"
        saved = root / "adapted.ckpt"
        assert main(["adapt", "--data", str(tgt), "--checkpoint", str(ckpt),
                     "--out", str(out_adapt), "--clicks", "3", "--seed", "1",
                     "--save-params", str(saved)]) == 0
        summary = json.loads((out_adapt / "summary.json").read_text())
        assert summary["updates"]["total"] > 0
        assert saved.exists()

    def test_repeat_run_byte_identical(self, cli_workspace):
        root, _, tgt, ckpt = cli_workspace
        out1, out2 = root / "det1", root / "det2"
        args = ["adapt", "--data", str(tgt), "--checkpoint", str(ckpt),
                "--clicks", "3", "--seed", "7"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_scenario_command(self, cli_workspace):
        root, _, tgt, ckpt = cli_workspace
        out = root / "noisy_out"
        assert main(["scenario", "--kind", "noisy-clicks", "--data", str(tgt),
                     "--checkpoint", str(ckpt), "--out", str(out),
                     "--clicks", "3", "--seed", "2",
                     "--noise-kind", "fraction", "--noise-value", "0.4"]) == 0
        assert (out / "report.csv").exists()

    def test_ablate_command(self, cli_workspace):
        root, _, tgt, ckpt = cli_workspace
        out = root / "ablate_out"
        assert main(["ablate", "--data", str(tgt), "--checkpoint", str(ckpt),
                     "--out", str(out), "--clicks", "3", "--seed", "5"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert "frozen" in summary["rows"] and "all_on" in summary["rows"]
        assert summary["rows"]["frozen"]["updates"]["total"] == 0
        csv_lines = (out / "report.csv").read_text().splitlines()
        scenarios = {line.split(",")[0] for line in csv_lines[1:]}
        assert len(scenarios) == 8

    def test_config_file_merge(self, cli_workspace, tmp_path):
        root, _, tgt, ckpt = cli_workspace
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "data": str(tgt), "checkpoint": str(ckpt),
            "click_budget": 3, "rng_seed": 9,
        }))
        out = tmp_path / "out"
        assert main(["evaluate", "--config", str(config), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["rng_seed"] == 9
        assert summary["config"]["click_budget"] == 3

    def test_missing_required_option_is_config_error(self, cli_workspace):
        _, _, tgt, ckpt = cli_workspace
        assert main(["evaluate", "--data", str(tgt), "--checkpoint", str(ckpt)]) == 2

    def test_bad_config_file_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_missing_checkpoint_is_config_error(self, cli_workspace, tmp_path):
        _, _, tgt, _ = cli_workspace
        assert main(["evaluate", "--data", str(tgt),
                     "--checkpoint", str(tmp_path / "nope.ckpt"),
                     "--out", str(tmp_path / "out")]) == 2

    def test_class_mismatch_is_config_error(self, cli_workspace, tmp_path):
        root, _, _, ckpt = cli_workspace
        k3 = tmp_path / "k3_data"
        assert main(["gen-data", "--out", str(k3), "--family", "ellipses",
                     "--classes", "3", "--count", "2", "--seed", "5"]) == 0
        assert main(["evaluate", "--data", str(k3), "--checkpoint", str(ckpt),
                     "--out", str(tmp_path / "out")]) == 2

    def test_argparse_error_exits_2(self):
        assert main(["scenario", "--kind", "nonsense"]) == 2
