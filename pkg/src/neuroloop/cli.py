"""Command-line entry point: train, benchmark, budget, serve, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import metrics
from .config import ConfigError, RunConfig, load_config
from .elm import load_model, save_model
from .engine import ClosedLoopEngine, SessionMode
from .metrics import BudgetSpec, budget, chance_trial_success_log10, summarize
from .task import read_records_jsonl, write_records_jsonl

log = logging.getLogger("neuroloop")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _setup_logging() -> None:
    level = os.environ.get("NEUROLOOP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _engine(cfg: RunConfig, realtime: bool = False, session_id: str = "session") -> ClosedLoopEngine:
    return ClosedLoopEngine(
        encoder_params=cfg.encoder,
        feature_config=cfg.features,
        trial_config=cfg.task,
        master_seed=cfg.seed,
        realtime=realtime,
        session_id=session_id,
    )


def _resolve_out(cfg: RunConfig, args) -> Path:
    out = args.out or cfg.out_dir or "neuroloop-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _session_manifest(cfg: RunConfig, mode: str, trials: int, p: float | None,
                      model_path: str | None, log_path: str) -> dict:
    return {
        "seed": cfg.seed,
        "mode": mode,
        "trials": trials,
        "p": p,
        "decoder_model_path": model_path,
        "encoder_params": {
            "channels": cfg.channels,
            "baseline_hz": cfg.encoder.baseline_hz,
            "modulation_hz": cfg.encoder.modulation_hz,
            "deterministic": cfg.encoder.deterministic,
            "reaction_lag_ticks": cfg.encoder.reaction_lag_ticks,
        },
        "feature_params": {
            "channels": cfg.channels,
            "window_s": cfg.features.window_s,
            "decoder_hz": cfg.tick_hz,
        },
        "trial_log_path": log_path,
    }


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    out = _resolve_out(cfg, args)
    engine = _engine(cfg, realtime=args.realtime)
    model = cfg.build_decoder()
    state = engine.train_pipeline(model, plan=cfg.plan or None)

    manifest = {"config": cfg.to_json(), "sessions": []}
    plan = cfg.plan or engine.default_training_plan()
    for i, (session, records) in enumerate(zip(plan, state.session_records), start=1):
        log_path = f"session_{i}.jsonl"
        with open(out / log_path, "w") as fp:
            write_records_jsonl(records, fp)
        model_path = "m_int.json" if session.mode is not SessionMode.PASSIVE else None
        manifest["sessions"].append(
            _session_manifest(
                cfg, session.mode.value, session.trials,
                session.assist_p if session.mode is SessionMode.ASSISTED else None,
                model_path, log_path,
            )
        )
        n_success = sum(r.succeeded for r in records)
        print(f"session {i} ({session.mode.value}): {n_success}/{len(records)} succeeded")

    save_model(state.m_int, out / "m_int.json")
    save_model(state.m_f, out / "m_f.json")
    manifest["models"] = {"m_int": "m_int.json", "m_f": "m_f.json"}
    with open(out / "train_manifest.json", "w") as fp:
        json.dump(manifest, fp, indent=2)
        fp.write("\n")
    print(f"models and logs written to {out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _load_run_config(args)
    out = _resolve_out(cfg, args)
    model = load_model(args.model)
    engine = _engine(cfg, realtime=args.realtime)
    trials = args.trials or cfg.benchmark_trials
    hand, neural = engine.run_benchmark(model, trials=trials)

    with open(out / "hand.jsonl", "w") as fp:
        write_records_jsonl(hand, fp)
    with open(out / "neural.jsonl", "w") as fp:
        write_records_jsonl(neural, fp)

    summary = summarize(hand, neural, decoder_hz=cfg.tick_hz)
    _write_summary(summary, cfg, hand, neural, out)

    manifest = {
        "config": cfg.to_json(),
        "sessions": [
            _session_manifest(cfg, "hand_scripted", trials, None, str(args.model), "hand.jsonl"),
            _session_manifest(cfg, "neural", trials, None, str(args.model), "neural.jsonl"),
        ],
    }
    with open(out / "benchmark_manifest.json", "w") as fp:
        json.dump(manifest, fp, indent=2)
        fp.write("\n")

    hand_rate = summary.overall["hand"].success_rate
    neural_rate = summary.overall["neural"].success_rate
    print(f"hand:   {summary.overall['hand'].n_success}/{trials} succeeded ({hand_rate:.0%})")
    print(f"neural: {summary.overall['neural'].n_success}/{trials} succeeded ({neural_rate:.0%})")
    if summary.success_rate_ratio is not None:
        print(f"success-rate ratio (neural/hand): {summary.success_rate_ratio:.3f}")
    print(f"summary written to {out}")
    return EXIT_OK


def _write_summary(summary, cfg: RunConfig, hand, neural, out: Path) -> None:
    doc = metrics.summary_to_json(summary)
    doc["chance"] = {
        "n_classes": 4,
        "match_fraction": 0.7,
        "n_steps": cfg.task.max_ticks,
        "log10_probability": chance_trial_success_log10(4, 0.7, cfg.task.max_ticks),
        "probability": metrics.chance_trial_success(4, 0.7, cfg.task.max_ticks),
    }
    with open(out / "summary.json", "w") as fp:
        json.dump(doc, fp, indent=2)
        fp.write("\n")
    with open(out / "summary.csv", "w", newline="") as fp:
        csv.writer(fp).writerows(metrics.summary_to_csv_rows(summary))
    with open(out / "durations.csv", "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["mode", "trial_id", "direction", "outcome", "duration_s", "match_fraction"])
        for mode, records in (("hand", hand), ("neural", neural)):
            for r in records:
                mf = r.match_fraction()
                writer.writerow(
                    [
                        mode, r.trial_id, r.direction.wire_name, r.outcome.value,
                        repr(r.duration_ticks / cfg.tick_hz),
                        "" if mf != mf else repr(mf),
                    ]
                )


def cmd_report(args) -> int:
    cfg = _load_run_config(args) if args.config else RunConfig()
    out = _resolve_out(cfg, args)
    with open(args.hand) as fp:
        hand = read_records_jsonl(fp)
    with open(args.neural) as fp:
        neural = read_records_jsonl(fp)
    summary = summarize(hand, neural, decoder_hz=cfg.tick_hz)
    _write_summary(summary, cfg, hand, neural, out)
    print(f"report written to {out}")
    return EXIT_OK


def cmd_budget(args) -> int:
    spec = BudgetSpec(
        electrodes=args.electrodes,
        sampling_hz=args.fs,
        adc_bits=args.bits,
        dof=args.dof,
        cmd_bits=args.cmd_bits,
        cmd_rate_hz=args.cmd_rate,
        feature_nw_per_channel=args.feature_nw,
        decoder_uw=args.decoder_uw,
    )
    result = budget(spec)
    ratio = (
        "n/a"
        if result["raw_bps"] == 0 or result["decoded_bps"] == 0
        else f"{result['raw_bps'] / result['decoded_bps']:.0f}x"
    )
    print(f"{'raw data rate':<22}{result['raw_bps']:>14,.0f} bps")
    print(f"{'decoded data rate':<22}{result['decoded_bps']:>14,.0f} bps")
    print(f"{'rate ratio raw/dec':<22}{ratio:>14}")
    print(f"{'feature power':<22}{result['feature_uw']:>14.2f} uW")
    print(f"{'decoder power':<22}{spec.decoder_uw:>14.2f} uW")
    print(f"{'total added power':<22}{result['total_added_uw']:>14.2f} uW")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    cfg = _load_run_config(args)
    host, _, port = args.bind.rpartition(":")
    serve(cfg, host=host or "127.0.0.1", port=int(port), realtime=args.realtime,
          out_dir=args.out or cfg.out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuroloop",
        description="Closed-loop spike-decoding simulator: train a decoder, "
        "benchmark neural vs scripted-hand control, or serve a live session.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run config JSON")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--realtime", action="store_true", help="pace ticks to wall clock")

    p = sub.add_parser("train", help="run the training paradigm, write models and logs")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("benchmark", help="run hand vs neural sessions and summarize")
    common(p)
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--trials", type=int, default=None, help="trials per mode")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("report", help="summarize existing trial logs")
    common(p, config_required=False)
    p.add_argument("--hand", required=True, help="hand-mode trial log (JSONL)")
    p.add_argument("--neural", required=True, help="neural-mode trial log (JSONL)")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("budget", help="implant bandwidth and power arithmetic")
    p.add_argument("--electrodes", type=int, default=100)
    p.add_argument("--fs", type=float, default=20_000.0)
    p.add_argument("--bits", type=int, default=12)
    p.add_argument("--dof", type=int, default=6)
    p.add_argument("--cmd-bits", type=int, default=10)
    p.add_argument("--cmd-rate", type=float, default=50.0)
    p.add_argument("--feature-nw", type=float, default=40.0)
    p.add_argument("--decoder-uw", type=float, default=0.71)
    p.set_defaults(fn=cmd_budget)

    p = sub.add_parser("serve", help="serve a live session over WebSocket")
    common(p)
    p.add_argument("--bind", default="127.0.0.1:8090")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failures exit nonzero with a message
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
