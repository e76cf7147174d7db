"""Command-line front end.

Subcommands: gen (synthetic corpus), train, eval, trace, score (file-based
WER/WDR/WAR), oracle-check (brute-force and finite-difference self-tests).
--json switches machine-readable output on stdout; exit codes are 0 on
success, 1 on validation/usage problems, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .corpus import CorpusConfig, generate_corpus, save_corpus
from .ctc import ctc_loss_and_gradient, greedy_decode, min_path_length
from .ctc_oracle import oracle_path_probability
from .errors import (
    ConfigError,
    GlossrecError,
    InfeasibleAlignmentError,
    InvalidInputError,
    OracleLimitError,
    SequenceTooShortError,
)
from .losses import LossConfig
from .metrics import (
    MetricsReport,
    align_triplet,
    corpus_report,
    read_sentence_file,
    render_triplet,
    wer,
)
from .training import (
    RunConfig,
    evaluate_checkpoint,
    train,
    trace_sentence,
    write_trace_csv,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _pct(x: float) -> str:
    return "inf" if x == float("inf") else f"{100.0 * x:.2f}%"


# ----- gen -----------------------------------------------------------------


def _add_gen(sub):
    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--vocab-size", type=int, default=10)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--noise-std", type=float, default=0.3)
    p.add_argument("--train-count", type=int, default=200)
    p.add_argument("--dev-count", type=int, default=40)
    p.add_argument("--test-count", type=int, default=40)
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=_cmd_gen)


def _cmd_gen(args) -> int:
    config = CorpusConfig(
        vocab_size=args.vocab_size,
        feature_dim=args.feature_dim,
        noise_std=args.noise_std,
        train_count=args.train_count,
        dev_count=args.dev_count,
        test_count=args.test_count,
        seed=args.seed,
    )
    manifest = save_corpus(generate_corpus(config), args.out)
    if args.json:
        print(json.dumps(manifest, sort_keys=True))
    else:
        print(f"corpus written to {args.out}")
        print(f"counts: {manifest['counts']}")
        print(f"content hash: {manifest['content_hash']}")
    return 0


# ----- train ----------------------------------------------------------------


def load_run_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    run = dict(data.get("run", {}))
    loss = data.get("loss", {})
    if loss:
        run["loss"] = LossConfig(**loss)
    try:
        return RunConfig.from_dict(run)
    except TypeError as err:
        raise ConfigError(f"{path}: {err}") from None


def _add_train(sub):
    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--corpus", help="corpus directory (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-ratio", type=float)
    p.add_argument("--variant")
    p.add_argument("--channels", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--no-ve", action="store_true", help="disable the VE term")
    p.add_argument("--no-va", action="store_true", help="disable the VA term")
    p.set_defaults(func=_cmd_train)


def _cmd_train(args) -> int:
    config = load_run_config(args.config) if args.config else RunConfig()
    overrides = {
        "corpus": args.corpus,
        "out_dir": args.out,
        "epochs": args.epochs,
        "lr": args.lr,
        "lr_ratio": args.lr_ratio,
        "variant": args.variant,
        "channels": args.channels,
        "hidden": args.hidden,
        "seed": args.seed,
    }
    d = config.to_dict()
    d.update({k: v for k, v in overrides.items() if v is not None})
    loss = dict(d["loss"])
    if args.alpha is not None:
        loss["alpha"] = args.alpha
    if args.tau is not None:
        loss["tau"] = args.tau
    if args.no_ve:
        loss["enable_ve"] = False
    if args.no_va:
        loss["enable_va"] = False
    d["loss"] = loss
    config = RunConfig.from_dict(d)
    if not config.corpus:
        raise ConfigError("no corpus given (use --corpus or the config file)")

    result = train(config)
    summary = {
        "out_dir": config.out_dir,
        "checkpoints": result.checkpoint_paths,
        "skipped_sentences": result.skipped_sentences,
        "final_epoch": result.epoch_rows[-1],
    }
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        last = result.epoch_rows[-1]
        print(f"trained {config.epochs} epochs; checkpoints: {result.checkpoint_paths}")
        print(
            f"final train loss {last['train_total']:.4f}, "
            f"train WER {_pct(last['train_wer'])}, "
            f"dev WER (primary) {_pct(last['dev_wer_p'])}, "
            f"dev WER (auxiliary) {_pct(last['dev_wer_a'])}"
        )
    return 0


# ----- eval -----------------------------------------------------------------


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default="dev", choices=("train", "dev", "test"))
    p.add_argument("--out", help="also write the JSON report to this path")
    p.set_defaults(func=_cmd_eval)


def _print_report(report: MetricsReport) -> None:
    t = report.totals
    print(f"sentences: {t['num_sentences']}, reference tokens: {t['num_ref']}")
    print(f"WER  primary {_pct(t['wer_p'])}   auxiliary {_pct(t['wer_a'])}")
    print(
        f"WER* primary {_pct(t['wer_star_p'])}   auxiliary {_pct(t['wer_star_a'])}"
    )
    print(
        f"WDR {_pct(t['wdr'])}   WAR {_pct(t['war'])}   "
        f"dWER* {_pct(t['delta_wer_star'])}"
    )


def _cmd_eval(args) -> int:
    report = evaluate_checkpoint(args.checkpoint, args.corpus, args.split)
    payload = json.dumps(report.to_dict(), sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    if args.json:
        print(payload)
    else:
        _print_report(report)
    return 0


# ----- trace ----------------------------------------------------------------


def _add_trace(sub):
    p = sub.add_parser("trace", help="per-frame diagnostic trace of one sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--sentence-id", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=_cmd_trace)


def _cmd_trace(args) -> int:
    rows = trace_sentence(args.checkpoint, args.corpus, args.sentence_id)
    write_trace_csv(rows, args.out)
    if args.json:
        print(json.dumps({"rows": len(rows), "out": args.out}, sort_keys=True))
    else:
        print(f"wrote {len(rows)} trace rows to {args.out}")
    return 0


# ----- score ----------------------------------------------------------------


def _add_score(sub):
    p = sub.add_parser("score", help="score hypothesis files against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp-p", required=True, help="primary hypothesis file")
    p.add_argument("--hyp-a", help="optional auxiliary hypothesis file")
    p.set_defaults(func=_cmd_score)


def _matched_ids(ref: dict, hyp: dict, name: str) -> list[str]:
    missing = sorted(set(ref) - set(hyp))
    extra = sorted(set(hyp) - set(ref))
    if missing or extra:
        raise InvalidInputError(
            f"{name}: utterance ids do not match reference "
            f"(missing {missing[:5]}, extra {extra[:5]})"
        )
    return list(ref)


def _cmd_score(args) -> int:
    refs = read_sentence_file(args.ref)
    hyps_p = read_sentence_file(args.hyp_p)
    ids = _matched_ids(refs, hyps_p, args.hyp_p)

    if args.hyp_a is None:
        rows = []
        total_err = 0
        total_ref = 0
        for sid in ids:
            r = wer(refs[sid], hyps_p[sid])
            total_err += r.num_errors
            total_ref += r.num_ref
            rows.append(
                {
                    "id": sid,
                    "num_ref": r.num_ref,
                    "wer": r.rate,
                    "sub": r.num_sub,
                    "del": r.num_del,
                    "ins": r.num_ins,
                }
            )
        aggregate = {
            "num_sentences": len(rows),
            "num_ref": total_ref,
            "wer": total_err / total_ref if total_ref else 0.0,
        }
        if args.json:
            print(
                json.dumps(
                    {"schema_version": 1, "aggregate": aggregate, "sentences": rows},
                    sort_keys=True,
                )
            )
        else:
            for row in rows:
                print(
                    f"{row['id']}: WER {_pct(row['wer'])} "
                    f"(sub {row['sub']}, del {row['del']}, ins {row['ins']})"
                )
            print(f"corpus WER {_pct(aggregate['wer'])} over {total_ref} tokens")
        return 0

    hyps_a = read_sentence_file(args.hyp_a)
    _matched_ids(refs, hyps_a, args.hyp_a)
    report = corpus_report([(sid, refs[sid], hyps_a[sid], hyps_p[sid]) for sid in ids])
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        for sid in ids:
            triplet = align_triplet(refs[sid], hyps_a[sid], hyps_p[sid])
            print(f"--- {sid}")
            print(render_triplet(triplet))
        print()
        _print_report(report)
    return 0


# ----- oracle-check ---------------------------------------------------------


def _add_oracle_check(sub):
    p = sub.add_parser(
        "oracle-check",
        help="run the brute-force and finite-difference self-test suites",
    )
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=12345)
    p.set_defaults(func=_cmd_oracle_check)


def _random_ctc_instance(rng, max_T=8, max_glosses=3, max_len=3):
    num_glosses = int(rng.integers(1, max_glosses + 1))
    while True:
        n = int(rng.integers(0, max_len + 1))
        labeling = [int(rng.integers(1, num_glosses + 1)) for _ in range(n)]
        lo = min_path_length(labeling)
        if lo <= max_T:
            T = int(rng.integers(max(lo, 1), max_T + 1))
            return rng.normal(size=(T, num_glosses + 1)) * 2.0, labeling


def _cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    suites = []

    worst = 0.0
    for _ in range(args.instances):
        logits, labeling = _random_ctc_instance(rng)
        p_dp = float(np.exp(-ctc_loss_and_gradient(logits, labeling)[0]))
        p_brute = oracle_path_probability(logits, labeling)
        worst = max(worst, abs(p_dp - p_brute) / max(p_brute, 1e-300))
    suites.append(("ctc-vs-brute-force", worst <= 1e-9, f"max rel err {worst:.2e}"))

    worst = 0.0
    step = 1e-5
    for _ in range(max(args.instances // 10, 5)):
        logits, labeling = _random_ctc_instance(rng, max_T=6)
        _, grad = ctc_loss_and_gradient(logits, labeling)
        fd = np.zeros_like(grad)
        for t in range(logits.shape[0]):
            for k in range(logits.shape[1]):
                bump = logits.copy()
                bump[t, k] += step
                hi = ctc_loss_and_gradient(bump, labeling)[0]
                bump[t, k] -= 2 * step
                lo = ctc_loss_and_gradient(bump, labeling)[0]
                fd[t, k] = (hi - lo) / (2 * step)
        scale = max(np.abs(grad).max(), np.abs(fd).max(), 1e-8)
        worst = max(worst, np.abs(grad - fd).max() / scale)
    suites.append(
        ("ctc-gradient-vs-finite-differences", worst <= 1e-4, f"max rel err {worst:.2e}")
    )

    ok = 0
    for _ in range(args.instances):
        logits, _ = _random_ctc_instance(rng)
        decoded = greedy_decode(logits)
        ok += decoded == greedy_decode(logits)
    suites.append(
        ("greedy-decode-determinism", ok == args.instances, f"{ok}/{args.instances}")
    )

    all_pass = all(passed for _, passed, _ in suites)
    if args.json:
        print(
            json.dumps(
                {
                    "suites": [
                        {"name": n, "passed": p, "detail": d} for n, p, d in suites
                    ],
                    "passed": all_pass,
                },
                sort_keys=True,
            )
        )
    else:
        for name, passed, detail in suites:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return 0 if all_pass else 2


# ----- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glossrec", description=__doc__)
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen(sub)
    _add_train(sub)
    _add_eval(sub)
    _add_trace(sub)
    _add_score(sub)
    _add_oracle_check(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (
        ConfigError,
        InvalidInputError,
        OracleLimitError,
        SequenceTooShortError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (GlossrecError, InfeasibleAlignmentError, OSError) as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
