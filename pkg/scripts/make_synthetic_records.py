"""Write a synthetic cohort of record CSVs for the command-line pipeline.

    python3 scripts/make_synthetic_records.py --out data/synth --subjects 10 --beats 300
"""
import argparse
from pathlib import Path

from viscoptt.synth import BpLaw, synth_subject, viscous_share


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/synth")
    ap.add_argument("--subjects", type=int, default=10)
    ap.add_argument("--beats", type=int, default=300)
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--fs", type=float, default=125.0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    law = BpLaw()
    for i in range(args.subjects):
        sid = f"s{i:03d}"
        sub = synth_subject(sid, args.beats, seed=args.seed + i, law=law, fs=args.fs)
        sub.dump(out / f"{sid}.csv")
        print(f"{sid}: {args.beats} beats, viscous share {viscous_share(law, sub.truth):.2f}")


if __name__ == "__main__":
    main()
