import json
from dataclasses import replace

import numpy as np
import pytest

from psqe.cli import main
from psqe.enhance import TrainConfig
from psqe.expansion import ExpansionConfig
from psqe.pipeline import PipelineConfig, run_pipeline
from psqe.synth import SynthConfig


def tiny_config(rng_seed=42, **overrides):
    cfg = PipelineConfig(
        synth=SynthConfig(n_pairs=40, dim_visual=8, dim_attr=4, dim_rel=4,
                          noise_visual=0.15, noise_attr=0.1, noise_rel=0.1,
                          cluster_count=3, mean_degree=4.0, rng_seed=rng_seed),
        n_init=15,
        train=TrainConfig(epochs=8, hidden_dim=8, rng_seed=rng_seed),
        expansion=ExpansionConfig(eta=0.5),
        rng_seed=rng_seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


def strip_timing(record_text):
    data = json.loads(record_text)
    data.pop("timing_seconds", None)
    return json.dumps(data, sort_keys=True)


class TestRunPipeline:
    def test_skipping_both_stages_passes_stage1_through(self):
        record = run_pipeline(tiny_config(skip_stage2=True, skip_stage3=True))
        assert record.stage_seeds["s3"].as_pair_set() == \
            record.stage_seeds["s1"].as_pair_set()
        assert record.loss_trace == []

    def test_every_stage_is_one_to_one(self):
        record = run_pipeline(tiny_config())
        for seeds in record.stage_seeds.values():
            assert seeds.check_one_to_one()

    def test_skip_mic_yields_superset_stage2(self):
        full = run_pipeline(tiny_config())
        loose = run_pipeline(tiny_config(skip_mic=True))
        assert full.stage_seeds["s2"].as_pair_set() <= \
            loose.stage_seeds["s2"].as_pair_set()

    def test_warm_start_folds_baseline_into_stage1(self):
        warm = run_pipeline(tiny_config(warm_start_uvp=True,
                                        skip_stage2=True, skip_stage3=True))
        s0 = warm.stage_seeds["s0"].as_pair_set()
        assert s0 <= warm.stage_seeds["s1"].as_pair_set()

    def test_fixed_n_truncates_by_score(self):
        record = run_pipeline(tiny_config(fixed_n=5))
        final = record.stage_seeds["s3"]
        assert len(final) == 5
        scores = [p.score for p in final.pairs]
        assert scores == sorted(scores, reverse=True)

    def test_drop_modality_changes_outputs(self):
        full = run_pipeline(tiny_config())
        dropped = run_pipeline(tiny_config(drop_modality="visual"))
        assert full.stage_seeds["s1"].as_pair_set() != \
            dropped.stage_seeds["s1"].as_pair_set() or \
            full.ranking.hits1 != dropped.ranking.hits1

    def test_outputs_written(self, tmp_path):
        out = tmp_path / "run"
        run_pipeline(tiny_config(out_dir=str(out)))
        for name in ("seeds_s0.txt", "seeds_s1.txt", "seeds_s2.txt",
                     "seeds_s3.txt", "record.json", "loss.csv",
                     "expansion.csv", "loss.png", "stages.png"):
            assert (out / name).exists(), name

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_pipeline(tiny_config(out_dir=str(out1)))
        run_pipeline(tiny_config(out_dir=str(out2)))
        for name in ("seeds_s0.txt", "seeds_s1.txt", "seeds_s2.txt",
                     "seeds_s3.txt", "loss.csv", "expansion.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
        assert strip_timing((out1 / "record.json").read_text()) == \
            strip_timing((out2 / "record.json").read_text())

    def test_config_json_round_trip(self):
        cfg = tiny_config(drop_modality="rel", fixed_n=7)
        clone = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert clone == cfg

    def test_stage_coverage_monotone_on_shipped_preset(self):
        from psqe.presets import imbalanced_config
        record = run_pipeline(imbalanced_config(rng_seed=42))
        c1 = record.stage_quality["s1"].coverage
        c2 = record.stage_quality["s2"].coverage
        c3 = record.stage_quality["s3"].coverage
        assert c3 >= c2 >= c1


class TestCli:
    def test_run_with_config_file(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config().to_dict()))
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "record.json").exists()

    def test_theory_check_success(self, tmp_path, capsys):
        assert main(["theory-check", "--batches", "25"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["bound_violations"] == 0

    def test_missing_manifest_is_data_error(self, tmp_path, capsys):
        rc = main(["evaluate", "--kg1", "absent/manifest.json",
                   "--kg2", "absent/manifest.json",
                   "--seeds", "nothing.txt", "--out", str(tmp_path)])
        assert rc == 1
        assert "absent/manifest.json" in capsys.readouterr().err

    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["run", "--config", "absent.json",
                     "--out", str(tmp_path)]) == 2

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as err:
            main(["run", "--frobnicate"])
        assert err.value.code == 2

    def test_synth_seed_evaluate_chain(self, tmp_path):
        synth_cfg = tmp_path / "synth.json"
        synth_cfg.write_text(json.dumps({
            "n_pairs": 30, "dim_visual": 6, "dim_attr": 3, "dim_rel": 3,
            "cluster_count": 3, "mean_degree": 4.0, "rng_seed": 5}))
        data = tmp_path / "data"
        assert main(["synth", "--config", str(synth_cfg), "--out", str(data)]) == 0
        seeds = tmp_path / "seeds.txt"
        assert main(["seed", "--strategy", "uvp-multimodal",
                     "--kg1", str(data / "kg1" / "manifest.json"),
                     "--kg2", str(data / "kg2" / "manifest.json"),
                     "--count", "10", "--out", str(seeds)]) == 0
        evald = tmp_path / "eval"
        assert main(["evaluate", "--kg1", str(data / "kg1" / "manifest.json"),
                     "--kg2", str(data / "kg2" / "manifest.json"),
                     "--seeds", str(seeds), "--truth", str(data / "truth.txt"),
                     "--out", str(evald)]) == 0
        report = json.loads((evald / "report.json").read_text())
        assert report["precision"] == 1.0  # zero-noise chain
        assert (evald / "coverage.png").exists()

    def test_seed_psqe_strategy(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config().to_dict()))
        seeds = tmp_path / "seeds.txt"
        assert main(["seed", "--strategy", "psqe", "--config", str(cfg_path),
                     "--out", str(seeds)]) == 0
        assert seeds.exists()

    def test_compare_types_writes_reports(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config().to_dict()))
        out = tmp_path / "cmp"
        assert main(["compare-types", "--config", str(cfg_path),
                     "--runs", "1", "--out", str(out)]) == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        assert lines[0] == "strategy,precision,coverage,hits1,hits10,mrr,rng_seed"
        assert len(lines) == 4  # header + three strategies
        assert (out / "comparison.png").exists()
