"""Command-line bindings over the pipeline modules.

Exit codes: 0 success, 1 contract errors (bad values, violated
preconditions), 2 usage errors (unknown flags, missing files).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import augment as augment_mod
from . import classify as classify_mod
from . import ctc, decode_lm, nn_core, orders, report_metrics
from .nlu_extract import extract_fields, load_lexicons
from .service import fixtures_dir


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(2)
    return p


def cmd_decode(args) -> int:
    fp = ctc.load_frame_probs(_require_file(args.frames))
    lm = decode_lm.NgramLm.load(_require_file(args.lm)) if args.lm else None
    cfg = decode_lm.DecodeConfig(args.beam, args.alpha, args.beta)
    transcript, score = decode_lm.beam_decode(fp, lm, cfg)
    print(json.dumps({"transcript": transcript, "score": score}))
    return 0


def cmd_extract(args) -> int:
    text = _require_file(args.transcript).read_text(encoding="utf-8")
    lexicons = load_lexicons(args.lexicons) if args.lexicons else None
    form = extract_fields(text, lexicons)
    print(json.dumps(form.to_dict(), indent=2))
    return 0


def cmd_classify(args) -> int:
    if args.model:
        params = classify_mod.load_params(_require_file(args.model))
    else:
        corpus = classify_mod.LabeledCorpus.load_ndjson(
            fixtures_dir() / "classifier_corpus.ndjson")
        params, _ = classify_mod.train_classifier(
            corpus, classify_mod.CnnConfig(seed=7),
            nn_core.TrainConfig(learning_rate=0.5, epochs=500, seed=7))
    label, probs = classify_mod.classify(args.text, params)
    print(json.dumps({
        "label": label,
        "probabilities": {l: round(float(p), 6) for l, p in zip(params.labels, probs)},
    }))
    return 0


def cmd_train_classifier(args) -> int:
    corpus_path = args.corpus or str(fixtures_dir() / "classifier_corpus.ndjson")
    corpus = classify_mod.LabeledCorpus.load_ndjson(_require_file(corpus_path))
    params, trajectory = classify_mod.train_classifier(
        corpus, classify_mod.CnnConfig(seed=args.seed),
        nn_core.TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=args.seed))
    classify_mod.save_params(args.out, params)
    accuracy = classify_mod.training_accuracy(corpus, params)
    print(f"trained {args.epochs} epochs; final loss {trajectory[-1]:.6f}; "
          f"training accuracy {accuracy:.3f}; saved to {args.out}")
    return 0


def cmd_train_lm(args) -> int:
    corpus_path = args.corpus or str(fixtures_dir() / "lm_corpus.txt")
    lines = [l.strip() for l in _require_file(corpus_path).read_text(
        encoding="utf-8").splitlines() if l.strip()]
    lm = decode_lm.train_lm(lines, n=args.n, k=args.k)
    lm.save(args.out)
    print(f"trained order-{args.n} model on {len(lines)} sentences; "
          f"vocabulary {lm.vocab_size}; saved to {args.out}")
    return 0


def cmd_train_orders(args) -> int:
    records_path = args.records or str(fixtures_dir() / "orders_records.csv")
    records = orders.load_records_csv(_require_file(records_path))
    model = orders.train_orders(
        records, nn_core.TrainConfig(learning_rate=args.lr, epochs=args.epochs))
    orders.save_model(args.out, model)
    accuracy = orders.training_accuracy(records, model)
    print(f"trained on {len(records)} records; catalog {list(model.catalog)}; "
          f"training accuracy {accuracy:.3f}; saved to {args.out}")
    return 0


def cmd_augment(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        print(f"error: no such directory: {in_dir}", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wavs = sorted(in_dir.glob("*.wav"))
    if not wavs:
        print(f"error: no .wav files under {in_dir}", file=sys.stderr)
        return 1
    plan = augment_mod.AugmentPlan(expansion_factor=args.factor, seed=args.seed)
    originals = [augment_mod.read_wav(p) for p in wavs]
    manifest = []
    counters: dict = {}
    for waveform, tag in augment_mod.expand_corpus(originals, plan):
        stem = wavs[tag.source].stem
        counters[(stem, tag.transform)] = counters.get((stem, tag.transform), 0) + 1
        name = f"{stem}__{tag.transform}{counters[(stem, tag.transform)]}.wav"
        augment_mod.write_wav(out_dir / name, waveform)
        manifest.append({"file": name, "source": wavs[tag.source].name,
                         "transform": tag.transform, "parameter": tag.parameter})
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {len(manifest)} augmented files to {out_dir}")
    return 0


def cmd_score_table3(args) -> int:
    gold_path = args.gold or str(fixtures_dir() / "table3_gold.json")
    with open(_require_file(gold_path), encoding="utf-8") as fh:
        gold_rows = json.load(fh)
    from .nlu_extract import PatchForm

    results = []
    for i, row in enumerate(gold_rows, 1):
        predicted = extract_fields(row["transcript"])
        gold_form = PatchForm.from_dict(row["fields"])
        correct, total = report_metrics.score_extraction(predicted, gold_form)
        results.append((correct, total))
        print(f"row {i}: {correct}/{total}")
    accuracy = report_metrics.aggregate_accuracy(results)
    print(f"aggregate accuracy: {accuracy}%")
    return 0 if accuracy >= 93.3 else 1


def cmd_table2_report(args) -> int:
    directory = Path(args.fixtures) if args.fixtures else fixtures_dir()
    for column in ("existing", "proposed", "ideal"):
        profile = report_metrics.load_workflow_profile(
            _require_file(directory / f"table2_{column}.json"))
        print(f"{column}: {report_metrics.workflow_totals(profile)} min")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(host=args.host, port=args.port, simulated_clock=args.simulated_clock,
          log_dir=args.data_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchline",
                                     description="paramedic transcript pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="beam-decode a frame-probability lattice")
    p.add_argument("--frames", required=True)
    p.add_argument("--lm")
    p.add_argument("--beam", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("extract", help="extract patch-form fields from a transcript")
    p.add_argument("--transcript", required=True)
    p.add_argument("--lexicons")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("classify", help="classify a sentence")
    p.add_argument("--text", required=True)
    p.add_argument("--model")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("train-classifier", help="train the sentence classifier")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("train-lm", help="train the n-gram language model")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=float, default=1.0)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train-orders", help="train the standing-order recommender")
    p.add_argument("--records")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=0.5)
    p.set_defaults(func=cmd_train_orders)

    p = sub.add_parser("augment", help="expand a WAV corpus with noise/speed/gain")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--factor", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("score-table3", help="score extraction against the gold set")
    p.add_argument("--gold")
    p.set_defaults(func=cmd_score_table3)

    p = sub.add_parser("table2-report", help="print the workflow timing totals")
    p.add_argument("--fixtures")
    p.set_defaults(func=cmd_table2_report)

    p = sub.add_parser("serve", help="run the incident-session HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8099)
    p.add_argument("--simulated-clock", action="store_true")
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
