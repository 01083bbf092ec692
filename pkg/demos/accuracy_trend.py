"""Frame accuracy of monophone and manner-class acoustic models on noisy synthetic speech.

    python3 demos/accuracy_trend.py [--seeds 0 1 2]
"""
import argparse

from bpse.cli import run_accuracy_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    res = run_accuracy_experiment(seeds=tuple(args.seeds), criteria=("mono", "manner", "place"))
    print(f"{'criterion':<10}" + "".join(f"{snr:>10g} dB" for snr in (-5.0, 0.0)))
    for crit, by_snr in res["mean"].items():
        print(f"{crit:<10}" + "".join(f"{by_snr[snr]:>13.3f}" for snr in (-5.0, 0.0)))


if __name__ == "__main__":
    main()
