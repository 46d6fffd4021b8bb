"""Desk-scale learning check: copy-with-doubling over an 8-letter alphabet.

Trains each variant at batch 1 until train accuracy reaches the target (or the
epoch cap), then reports epochs, wall time and dev accuracy of the
dev-selected state.

    python scripts/copy_task.py --variants mono0 mono1 hard0 soft
"""

from __future__ import annotations

import argparse
import json
from dataclasses import asdict

from hardmono.config import ModelConfig, VariantKind
from hardmono.synthetic import doubling_splits, fit_to_accuracy


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--variants", nargs="+", default=["mono0", "mono1", "hard0", "soft"], choices=[v.value for v in VariantKind])
    p.add_argument("--train-size", type=int, default=200)
    p.add_argument("--dev-size", type=int, default=50)
    p.add_argument("--d-hidden", type=int, default=64)
    p.add_argument("--d-char", type=int, default=32)
    p.add_argument("--d-tag", type=int, default=8)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--target", type=float, default=0.99)
    p.add_argument("--max-epochs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print one JSON object per variant")
    args = p.parse_args(argv)

    train, dev = doubling_splits(args.train_size, args.dev_size, args.seed)
    for variant in args.variants:
        config = ModelConfig(
            variant=variant, d_hidden=args.d_hidden, d_tag=args.d_tag, d_char=args.d_char,
            dropout=args.dropout, seed=args.seed,
        )
        fit, _ = fit_to_accuracy(config, train, dev, args.target, args.max_epochs)
        if args.json:
            print(json.dumps(asdict(fit)), flush=True)
        else:
            print(
                f"{fit.variant:<6} epochs {fit.epochs:>3}  train acc {fit.train_accuracy:.3f}  "
                f"dev acc {fit.dev_accuracy:.3f}  {fit.seconds:.0f}s  {'reached' if fit.reached else 'NOT reached'}",
                flush=True,
            )


if __name__ == "__main__":
    main()
