#!/usr/bin/env python3
"""Write corpus files: the bundled demo corpus and/or a seeded synthetic one.

Examples:
    python scripts/make_corpus.py demo.jsonl
    python scripts/make_corpus.py --synthetic 500 --seed 7 big.jsonl
"""

import argparse

from trialbench.dataset import save_database
from trialbench.demo import demo_snapshot, synthetic_snapshot


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="output JSONL path")
    parser.add_argument("--synthetic", type=int, metavar="N", default=None,
                        help="write N synthetic reviews instead of the demo corpus")
    parser.add_argument("--seed", type=int, default=20210131)
    args = parser.parse_args()

    snapshot = synthetic_snapshot(args.synthetic, args.seed) if args.synthetic else demo_snapshot()
    save_database(snapshot, args.output)
    r, m, s = snapshot.counts
    print(f"wrote {args.output}: {r} reviews, {m} meta-analyses, {s} studies")


if __name__ == "__main__":
    main()
