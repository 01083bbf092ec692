"""STOI at 0 dB for the noisy input, the baseline enhancer and BPC-conditioned enhancers.

    python3 demos/stoi_trends.py [--seed 0] [--criterion manner] [--epochs 15]

One seed takes several minutes on a single CPU core.
"""
import argparse

from bpse.cli import run_se_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--criterion", default="manner", choices=["manner", "place"])
    ap.add_argument("--epochs", type=int, default=15)
    args = ap.parse_args()
    res = run_se_experiment(args.seed, criterion=args.criterion, se_epochs=args.epochs,
                            log=lambda e, tr, va: print(f"  epoch {e:3d}  train {tr:.4f}  valid {va:.4f}"))
    print(res["report"].to_table())


if __name__ == "__main__":
    main()
