"""Command-line interface.

Exit codes: 0 success, 1 data error (bad/missing inputs), 2 config error
(including unknown flags, which argparse reports with usage text).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, DataError
from .kg import AlignmentMap, load_kg, save_kg
from .pipeline import PipelineConfig, run_pipeline
from .presets import PRESETS, get_preset
from .similarity import ModalityWeights, SeedSet, cosine_sim_matrix, fused_features, \
    fused_sim, uvp_seeds
from .synth import SynthConfig, synth_generate

SEED_STRATEGIES = ("uvp-visual", "uvp-multimodal", "psqe")


def _pipeline_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_json(args.config)
    elif getattr(args, "preset", None):
        cfg = get_preset(args.preset)
    else:
        raise ConfigError("provide --config or --preset")
    if getattr(args, "rng_seed", None) is not None:
        cfg = replace(cfg, rng_seed=args.rng_seed)
        if cfg.synth is not None:
            cfg = replace(cfg, synth=replace(cfg.synth, rng_seed=args.rng_seed))
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=str(args.out))
    if getattr(args, "fixed_n", None) is not None:
        cfg = replace(cfg, fixed_n=args.fixed_n)
    if getattr(args, "warm_start_uvp", False):
        cfg = replace(cfg, warm_start_uvp=True)
    return cfg


def cmd_synth(args) -> int:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if "sparse_noise_scale" in raw:
            raw["sparse_noise_scale"] = tuple(raw["sparse_noise_scale"])
        try:
            cfg = SynthConfig(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad synth config: {exc}") from exc
    else:
        pipe = get_preset(args.preset or "zero-noise")
        cfg = pipe.synth
    if args.rng_seed is not None:
        cfg = replace(cfg, rng_seed=args.rng_seed)
    kg1, kg2, truth = synth_generate(cfg)
    out = Path(args.out)
    m1 = save_kg(kg1, out / "kg1")
    m2 = save_kg(kg2, out / "kg2")
    truth.save(out / "truth.txt")
    print(f"wrote {m1}")
    print(f"wrote {m2}")
    print(f"wrote {out / 'truth.txt'} ({len(truth)} pairs)")
    return 0


def cmd_seed(args) -> int:
    if args.strategy not in SEED_STRATEGIES:
        raise ConfigError(f"strategy must be one of {SEED_STRATEGIES}")
    if args.strategy == "psqe":
        if args.config or args.preset:
            cfg = _pipeline_config(args)
        else:
            if not (args.kg1 and args.kg2):
                raise ConfigError("psqe strategy needs --config/--preset or --kg1/--kg2")
            cfg = PipelineConfig(kg1_manifest=args.kg1, kg2_manifest=args.kg2,
                                 n_init=args.count)
        if args.kg1 and args.kg2:
            cfg = replace(cfg, synth=None, kg1_manifest=args.kg1,
                          kg2_manifest=args.kg2)
        # --out names the seeds file here, not a pipeline output directory
        record = run_pipeline(replace(cfg, out_dir=None))
        seeds = record.final_seeds
    else:
        if not (args.kg1 and args.kg2):
            raise ConfigError(f"{args.strategy} needs --kg1 and --kg2")
        kg1, kg2 = load_kg(args.kg1), load_kg(args.kg2)
        if args.strategy == "uvp-visual":
            sim = cosine_sim_matrix(kg1.visual, kg2.visual)
        else:
            sim = fused_sim(kg1, kg2, _weights(args))
        seeds = uvp_seeds(sim, args.count)
    seeds.save(args.out)
    print(f"wrote {args.out} ({len(seeds)} pairs)")
    return 0


def _weights(args) -> ModalityWeights:
    if getattr(args, "weights", None):
        parts = [float(x) for x in args.weights.split(",")]
        if len(parts) != 3:
            raise ConfigError("--weights expects three comma-separated values")
        return ModalityWeights(*parts)
    return ModalityWeights()


def cmd_train(args) -> int:
    from .enhance import TrainConfig, save_params, train
    kg1, kg2 = load_kg(args.kg1), load_kg(args.kg2)
    seeds = SeedSet.load(args.seeds)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                      hidden_dim=args.hidden_dim, tau=args.tau,
                      rng_seed=args.rng_seed if args.rng_seed is not None else 42)
    result = train(kg1, kg2, seeds, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_params(result.params, out)
    with open(out / "loss.csv", "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(result.losses):
            fh.write(f"{epoch},{loss!r}\n")
    from .figures import render_loss_curve
    if result.losses:
        render_loss_curve(result.losses, out / "loss.png")
    print(f"wrote {out / 'params.json'} (final loss "
          f"{result.losses[-1] if result.losses else float('nan')})")
    return 0


def cmd_expand(args) -> int:
    from .enhance import forward, load_params
    from .expansion import ExpansionConfig, expand, recheck, write_audit_csv
    kg1, kg2 = load_kg(args.kg1), load_kg(args.kg2)
    seeds = SeedSet.load(args.seeds)
    phi1, phi2 = fused_features(kg1), fused_features(kg2)
    enh1 = enh2 = None
    if args.params:
        params = load_params(args.params)
        enh1 = forward(kg1, params).concat
        enh2 = forward(kg2, params).concat
    cfg = ExpansionConfig(eta=args.eta, max_new=args.max_new)
    expanded, audit = expand(seeds, cfg, kg1, kg2, phi1, phi2, enh1, enh2)
    final = recheck(expanded, phi1, phi2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    final.save(out / "seeds_expanded.txt")
    write_audit_csv(out / "expansion.csv", audit)
    print(f"wrote {out / 'seeds_expanded.txt'} "
          f"({len(seeds)} -> {len(expanded)} -> {len(final)} pairs)")
    return 0


def cmd_evaluate(args) -> int:
    from .figures import render_coverage_components
    from .metrics import graph_coverage
    kg1, kg2 = load_kg(args.kg1), load_kg(args.kg2)
    seeds = SeedSet.load(args.seeds)
    truth = AlignmentMap.load(args.truth) if args.truth else None
    report = graph_coverage(seeds, kg1, kg2, truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    with open(out / "report.csv", "w") as fh:
        fh.write("n_seeds,precision,coverage,s_a,s_f,edge_covered,g_edge,g_n\n")
        fh.write(f"{report.n_seeds},{report.precision},{report.coverage},"
                 f"{report.s_a},{report.s_f},{report.edge_covered},"
                 f"{report.g_edge},{report.g_n}\n")
    render_coverage_components(report, out / "coverage.png")
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_theory_check(args) -> int:
    from .theory import run_theory_checks
    report = run_theory_checks(n_batches=args.batches,
                               rng_seed=args.rng_seed if args.rng_seed is not None else 42)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0 if report["bound_violations"] == 0 else 1


def cmd_compare_types(args) -> int:
    from .figures import render_type_comparison
    from .metrics import type_comparison, write_comparison_csv
    cfg = _pipeline_config(args)
    if cfg.synth is None:
        raise ConfigError("compare-types needs a config with a synth section")
    rows = []
    base_seed = cfg.rng_seed
    for run in range(args.runs):
        rows.extend(type_comparison(
            cfg.synth, cfg.n_init, train_cfg=cfg.train, weights=cfg.weights,
            expansion_cfg=cfg.expansion, rng_seed=base_seed + run,
            cluster_range=cfg.cluster_range))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_comparison_csv(out / "comparison.csv", rows)
    payload = [{"strategy": r.strategy, "rng_seed": r.rng_seed,
                "precision": r.quality.precision, "coverage": r.quality.coverage,
                "hits1": r.ranking.hits1, "hits10": r.ranking.hits10,
                "mrr": r.ranking.mrr} for r in rows]
    (out / "comparison.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")
    render_type_comparison(rows, out / "comparison.png")
    print(f"wrote {out / 'comparison.csv'} ({len(rows)} rows)")
    return 0


def cmd_run(args) -> int:
    cfg = _pipeline_config(args)
    if cfg.out_dir is None:
        env_out = os.environ.get("PSQE_OUT_DIR")
        if env_out:
            cfg = replace(cfg, out_dir=env_out)
    if cfg.out_dir is None:
        raise ConfigError("run needs --out, out_dir in the config, "
                          "or the PSQE_OUT_DIR environment variable")
    record = run_pipeline(cfg)
    counts = {name: len(s) for name, s in record.stage_seeds.items()}
    print(json.dumps({
        "chosen_k": record.chosen_k,
        "seed_counts": counts,
        "ranking": record.ranking.to_dict() if record.ranking else None,
        "out_dir": cfg.out_dir,
    }, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psqe",
        description="Three-stage pseudo-seed generation and evaluation "
                    "for unsupervised multimodal entity alignment.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_opts(p, out_required=True):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="named built-in configuration")
        p.add_argument("--rng-seed", dest="rng_seed", type=int, default=None)
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic aligned graph pair")
    add_config_opts(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("seed", help="generate pseudo seeds with one strategy")
    p.add_argument("--strategy", required=True, choices=SEED_STRATEGIES)
    p.add_argument("--kg1", help="manifest of graph 1")
    p.add_argument("--kg2", help="manifest of graph 2")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--weights", help="visual,attr,rel fusion weights")
    p.add_argument("--config", help="pipeline config JSON (psqe strategy)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--rng-seed", dest="rng_seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output seeds file")
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("train", help="train the feature enhancer on seeds")
    p.add_argument("--kg1", required=True)
    p.add_argument("--kg2", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=2000)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=300)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--rng-seed", dest="rng_seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("expand", help="neighborhood expansion plus recheck")
    p.add_argument("--kg1", required=True)
    p.add_argument("--kg2", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--params", help="trained enhancer directory")
    p.add_argument("--eta", type=float, default=0.8)
    p.add_argument("--max-new", dest="max_new", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("evaluate", help="precision and graph-coverage report")
    p.add_argument("--kg1", required=True)
    p.add_argument("--kg2", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--truth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("theory-check", help="randomized bound/gradient checks")
    p.add_argument("--batches", type=int, default=1000)
    p.add_argument("--rng-seed", dest="rng_seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory_check)

    p = sub.add_parser("compare-types", help="Type I/II/III strategy comparison")
    add_config_opts(p)
    p.add_argument("--runs", type=int, default=10)
    p.set_defaults(func=cmd_compare_types)

    p = sub.add_parser("run", help="full three-stage pipeline")
    add_config_opts(p, out_required=False)  # PSQE_OUT_DIR may supply it
    p.add_argument("--fixed-n", dest="fixed_n", type=int, default=None,
                   help="truncate the final seed set to this size by score")
    p.add_argument("--warm-start-uvp", dest="warm_start_uvp",
                   action="store_true",
                   help="feed the greedy baseline seeds into stage one")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
