"""Command-line interface: train, predict, ppl, plot, experiment."""

from __future__ import annotations

import argparse
import sys

from .data import Vocabulary
from .experiment import ExperimentConfig, run_experiment
from .model import ModelConfig
from .plots import render_all
from .predict import perplexity_eval, predict_to_file
from .train import DEFAULT_STEPS, TrainConfig, bits, load_checkpoint, save_checkpoint, train


def cmd_train(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    model_config = ModelConfig(
        use_positions=not args.no_positions,
        vocab_size=len(vocab),
        max_positions=args.max_positions,
        dropout=args.dropout,
        vocab_sha256=vocab.sha256,
    )
    train_config = TrainConfig(
        k=args.k,
        steps=args.steps,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )
    result = train(model_config, train_config, args.corpus, vocab, log_every=args.log_every)
    save_checkpoint(args.out, result, model_config, train_config)
    print(
        f"trained {'np' if args.no_positions else 'bert'} variant for {result.steps} steps, "
        f"final masked loss {result.final_loss:.4f} nats ({bits(result.final_loss):.4f} bits)"
    )
    return 0


def cmd_predict(args) -> int:
    model, _, _, _ = load_checkpoint(args.checkpoint)
    vocab = Vocabulary.load(args.vocab)
    count = predict_to_file(model, vocab, args.manifest, args.out)
    print(f"wrote {count} predictions to {args.out}")
    return 0


def cmd_ppl(args) -> int:
    model, _, train_config, _ = load_checkpoint(args.checkpoint)
    vocab = Vocabulary.load(args.vocab)
    k = args.k if args.k is not None else train_config.k
    value = perplexity_eval(model, vocab, args.corpus, k=k, seed=args.seed)
    print(f"perplexity at k={k}: {value:.4f}")
    return 0


def cmd_plot(args) -> int:
    scores = {}
    for item in args.scores or []:
        name, _, path = item.partition("=")
        if not path:
            raise SystemExit(f"--scores expects name=path, got {item!r}")
        scores[name] = path
    written = render_all(args.sweep, scores, args.out_dir)
    print("\n".join(str(p) for p in written))
    return 0


def cmd_experiment(args) -> int:
    config = ExperimentConfig(
        grammar_path=args.grammar,
        out_dir=args.out_dir,
        ks=tuple(args.k),
        steps=args.steps,
        seed=args.seed,
        threshold=args.threshold,
        train_size=args.train_size,
        eval_size=args.eval_size,
    )
    paths = run_experiment(config, log_every=args.log_every)
    print(f"scores: {', '.join(str(p) for p in paths.scores.values())}")
    print(f"figures: {', '.join(str(p) for p in paths.figures)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlmtrainer",
        description="Train and evaluate masked-prediction encoders with/without position embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one variant at one mask count")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--max-positions", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--no-positions", action="store_true", help="train the position-free variant")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="export predictions for an evaluation manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ppl", help="single-gold-token perplexity on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--k", type=int, default=None, help="defaults to the training mask count")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ppl)

    p = sub.add_parser("plot", help="render figures from sweep/score CSVs")
    p.add_argument("--sweep", required=True)
    p.add_argument("--scores", nargs="*", help="name=score_csv pairs")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("experiment", help="full sweep: references, training, scoring, figures")
    p.add_argument("grammar", help="grammar file (forwarded to the reference pipeline)")
    p.add_argument("--k", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.97)
    p.add_argument("--train-size", type=int, default=20000)
    p.add_argument("--eval-size", type=int, default=2000)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
