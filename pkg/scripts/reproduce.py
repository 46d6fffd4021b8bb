"""Full training/evaluation pipeline over the four variants.

Given train/dev/test files for one task, trains every requested variant at
the default hyperparameters (d_h 400, tag embedding 40, character embedding
200, two encoder layers, dropout 0.4, window 4, Adam 1e-3 halved on dev NLL
until it drops below 1e-5, clipping at 5), decodes the test set greedily and
writes a summary table.

    python scripts/reproduce.py --task inflection \
        --train data/train.tsv --dev data/dev.tsv --test data/test.tsv \
        --out-dir runs/inflection

``--subsample 0.01`` keeps a seeded 1% of every split (at least one line) for
a quick end-to-end run.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from hardmono.cli import EXIT_OK
from hardmono.cli import main as cli_main
from hardmono.config import VariantKind


def subsample(src: Path, dst: Path, fraction: float, rng: np.random.Generator) -> int:
    lines = [line for line in src.read_text(encoding="utf-8").split("\n") if line.strip()]
    if fraction < 1.0:
        k = max(1, int(round(fraction * len(lines))))
        keep = np.sort(rng.choice(len(lines), size=k, replace=False))
        lines = [lines[i] for i in keep]
    dst.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--task", choices=["inflection", "g2p", "transliteration"], required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--variants", nargs="+", default=[v.value for v in VariantKind], choices=[v.value for v in VariantKind])
    p.add_argument("--subsample", type=float, default=1.0, help="fraction of each split to keep")
    p.add_argument("--max-epochs", type=int, default=1000, help="safety cap; the LR floor normally ends training")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not 0.0 < args.subsample <= 1.0:
        p.error("--subsample must lie in (0, 1]")

    out = Path(args.out_dir)
    data = out / "data"
    data.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    paths = {}
    for split in ("train", "dev", "test"):
        paths[split] = data / f"{split}.tsv"
        n = subsample(Path(getattr(args, split)), paths[split], args.subsample, rng)
        print(f"{split}: {n} lines")

    rows = []
    for variant in args.variants:
        run = out / variant
        start = time.perf_counter()
        code = cli_main([
            "train", "--task", args.task, "--variant", variant,
            "--train", str(paths["train"]), "--dev", str(paths["dev"]), "--test", str(paths["test"]),
            "--max-epochs", str(args.max_epochs), "--seed", str(args.seed), "--out-dir", str(run),
        ])
        if code != EXIT_OK:
            print(f"{variant}: training failed with exit code {code}", file=sys.stderr)
            return code
        report = json.loads((run / "test_metrics.json").read_text(encoding="utf-8"))
        rows.append({"variant": variant, "seconds": round(time.perf_counter() - start, 1), **report})

    cols = ["variant", "accuracy", "wer", "per", "mfs", "mld", "count", "seconds"]
    table = ["\t".join(cols)] + ["\t".join(str(r[c]) for c in cols) for r in rows]
    (out / "summary.tsv").write_text("\n".join(table) + "\n", encoding="utf-8")
    print("\n".join(table))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
