"""``bpse`` command line: one subcommand per pipeline stage, all sharing a run directory.

Run-directory layout::

    config.json                      resolved experiment config (written by prepare)
    data/manifest.json, data/audio/  mixtures
    partition-<crit>.json            cluster
    am-<crit>.ckpt (+ -history.csv, -accuracy.csv, -confusion.csv)
    ae-<crit>.ckpt / ae-gt-<crit>.ckpt (+ -history.csv)
    se-baseline.ckpt / se-bpse-<crit>.ckpt / se-gt-<crit>.ckpt (+ -history.csv)
    report-stoi.csv, report-stoi.txt, report-stoi-scores.csv
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from ..bpc import CRITERIA, ConfusionMatrix, Partition
from ..dsp import read_wav, write_wav
from ..enhance import PredictedBppg, SeModel, enhance_utterance
from ..errors import BpseError, ConfigError, DependencyError, UsageError
from ..metrics import aggregate, write_report, write_scores_csv
from ..phonetic import AcousticModel, AutoEncoder
from . import experiments as ex
from .config import ExperimentConfig, load_config
from .data import build_dataset, read_dataset, write_dataset

log = logging.getLogger("bpse")

EXIT_OK, EXIT_CONFIG, EXIT_DEPENDENCY, EXIT_DATA = 0, 2, 3, 4


class Run:
    """Paths and lazily loaded artefacts of one run directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out_dir)
        self.tag = cfg.criterion_tag
        self._ds = None
        self.cache = ex.FeatureCache()

    def path(self, name: str) -> Path:
        return self.dir / name

    def need(self, name: str, stage: str, explicit=None) -> Path:
        """Path of a required artefact; ``explicit`` is a user-supplied path taken as given."""
        p = Path(explicit) if explicit else self.path(name)
        if not p.exists():
            raise DependencyError(f"{p} not found; run `bpse {stage}` first")
        return p

    @property
    def dataset(self):
        if self._ds is None:
            self._ds = read_dataset(self.need("data/manifest.json", "prepare"))
        return self._ds

    def partition(self) -> Partition:
        p = self.path(f"partition-{self.tag}.json")
        if p.exists():
            return Partition.from_json(p.read_text())
        if self.cfg.criterion == "data_driven":
            raise DependencyError(f"{p} not found; run `bpse cluster --criterion data-driven` first")
        return ex.partition_for(self.cfg.criterion, self.dataset.phones)

    def am(self, override=None) -> AcousticModel:
        return AcousticModel.load(self.need(f"am-{self.tag}.ckpt", "train-am", override))

    def ae(self, ground_truth: bool, override=None) -> AutoEncoder:
        name = f"ae-gt-{self.tag}.ckpt" if ground_truth else f"ae-{self.tag}.ckpt"
        stage = "train-ae --ground-truth" if ground_truth else "train-ae"
        return AutoEncoder.load(self.need(name, stage, override))


def write_history(path: Path, rows, columns=("epoch", "train_loss", "valid_loss")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


# -- commands ----------------------------------------------------------------------

def cmd_prepare(run: Run, args) -> None:
    ds = build_dataset(run.cfg)
    run.dir.mkdir(parents=True, exist_ok=True)
    manifest = write_dataset(ds, run.path("data"))
    # the run directory is implied by where config.json lives; keep it out so runs compare byte for byte
    run.path("config.json").write_text(run.cfg.with_overrides(out_dir=".").to_json())
    counts = {s: len(ds.split(s)) for s in ("train", "valid", "test")}
    print(f"wrote {manifest} ({counts['train']} train, {counts['valid']} valid, {counts['test']} test mixtures)")


def cmd_cluster(run: Run, args) -> None:
    if run.cfg.criterion == "data_driven":
        src = Path(args.confusion) if args.confusion else run.path("am-mono-confusion.csv")
        if not src.exists():
            raise DependencyError(f"{src} not found; pass --confusion or run `bpse train-am --criterion mono` first")
        part = ex.partition_for("data_driven", [], ConfusionMatrix.from_csv(src.read_text()), run.cfg.target_k)
    else:
        part = ex.partition_for(run.cfg.criterion, run.dataset.phones if run.path("data/manifest.json").exists()
                                else _default_phones(run.cfg))
    run.dir.mkdir(parents=True, exist_ok=True)
    run.path(f"partition-{run.tag}.json").write_text(part.to_json())
    print(part.table())


def _default_phones(cfg: ExperimentConfig) -> list[str]:
    from ..bpc import timit_inventory
    from ..dsp import default_templates
    if cfg.corpus.source == "timit":
        return list(timit_inventory().phones)
    return [t.label for t in default_templates()]


def cmd_train_am(run: Run, args) -> None:
    part = run.partition()
    am, hist = ex.train_am_stage(run.dataset, part, run.cfg, run.cache)
    stem = f"am-{run.tag}"
    am.save(run.path(f"{stem}.ckpt"))
    write_history(run.path(f"{stem}-history.csv"), hist)
    acc, _ = ex.accuracy_stage(am, run.dataset.split("test"), part, run.cache)
    with open(run.path(f"{stem}-accuracy.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "frame_accuracy"])
        for snr in sorted(acc, reverse=True):
            w.writerow([f"{snr:g}", repr(acc[snr])])
    # phone confusions for data-driven clustering come from held-out training-condition data
    held = run.dataset.split("valid") or run.dataset.split("train")
    _, confusion = ex.accuracy_stage(am, held, part, run.cache)
    run.path(f"{stem}-confusion.csv").write_text(confusion.to_csv())
    print("frame accuracy: " + ", ".join(f"{s:g} dB {a:.3f}" for s, a in sorted(acc.items(), reverse=True)))


def cmd_train_ae(run: Run, args) -> None:
    part = run.partition()
    gt = run.cfg.ground_truth
    am = None if gt else run.am(args.am)
    ae, hist = ex.train_ae_stage(run.dataset, part, run.cfg, run.cache, am=am, ground_truth=gt)
    stem = f"ae-gt-{run.tag}" if gt else f"ae-{run.tag}"
    ae.save(run.path(f"{stem}.ckpt"))
    write_history(run.path(f"{stem}-history.csv"), hist)
    print(f"wrote {run.path(stem + '.ckpt')} (final mse {hist[-1][1]:.5f})" if hist else f"wrote {stem}.ckpt")


def cmd_train_se(run: Run, args) -> None:
    if args.baseline:
        name, kw = "baseline", {}
    else:
        gt = run.cfg.ground_truth
        part = run.partition()
        ae = run.ae(gt, args.ae)
        am = None if gt else run.am(args.am)
        name = f"gt-{run.tag}" if gt else f"bpse-{run.tag}"
        kw = dict(partition=part, ae=ae, am=am, ground_truth=gt)

    def progress(epoch, train, valid):
        log.info("se-%s epoch %d train %.5f valid %s", name, epoch, train,
                 "-" if valid is None else f"{valid:.5f}")

    model, hist = ex.train_se_stage(run.dataset, run.cfg, run.cache, tag=name, log=progress, **kw)
    model.save(run.path(f"se-{name}.ckpt"))
    write_history(run.path(f"se-{name}-history.csv"), hist)
    print(f"wrote {run.path(f'se-{name}.ckpt')} after {len(hist)} epochs")


def system_fn(run: Run, name: str):
    """Enhancement callable for a system name: noisy, baseline, bpse-<crit> or gt-<crit>."""
    if name == "noisy":
        return None
    kind, _, crit_tag = name.partition("-")
    crit = crit_tag.replace("-", "_")
    if name != "baseline" and (kind not in ("bpse", "gt") or crit not in CRITERIA):
        raise ConfigError(f"unknown system {name!r}; expected noisy, baseline, bpse-<criterion> or gt-<criterion>")
    model = SeModel.load(run.need(f"se-{name}.ckpt", "train-se" + (" --baseline" if name == "baseline" else "")))
    if name == "baseline":
        return lambda m: ex.enhance_mixture(model, m)
    sub = Run(run.cfg.with_overrides(criterion=crit))
    sub._ds = run.dataset
    part = sub.partition()
    if kind == "gt":
        ae = sub.ae(True)
        return lambda m: ex.enhance_mixture(model, m, part, ae, ground_truth=True)
    am, ae = sub.am(), sub.ae(False)
    return lambda m: ex.enhance_mixture(model, m, part, ae, am)


def cmd_evaluate(run: Run, args) -> None:
    names = args.systems.split(",") if args.systems else (run.cfg.systems or
                                                           ["noisy", "baseline", f"bpse-{run.tag}"])
    systems = {n: system_fn(run, n) for n in names}
    mixtures = run.dataset.split("test")
    scores = ex.score_systems(mixtures, systems)
    report = aggregate(scores, "stoi", names, sorted({m.snr_db for m in mixtures}, reverse=True))
    write_scores_csv(run.path("report-stoi-scores.csv"), scores)
    write_report(report, run.dir, "report-stoi")
    print(report.to_table())
    if args.accuracy:
        rows = []
        for p in sorted(run.dir.glob("am-*-accuracy.csv")):
            crit = p.name[3:-len("-accuracy.csv")]
            with open(p) as fh:
                rows += [(crit, r["snr_db"], float(r["frame_accuracy"])) for r in csv.DictReader(fh)]
        if not rows:
            raise DependencyError("no am-*-accuracy.csv in the run directory; run `bpse train-am` first")
        lines = [f"{'criterion':<12}{'snr_db':>8}{'accuracy':>10}"]
        lines += [f"{c:<12}{s:>8}{a * 100:>9.1f}%" for c, s, a in rows]
        text = "\n".join(lines) + "\n"
        run.path("report-accuracy.txt").write_text(text)
        print(text, end="")


def cmd_enhance(run: Run, args) -> None:
    if not args.input or not args.output:
        raise UsageError("enhance needs --input and --output")
    model = SeModel.load(run.need("se-baseline.ckpt", "train-se --baseline", args.model))
    provider = None
    if model.conditioned:
        if run.cfg.ground_truth:
            raise UsageError("ground-truth conditioning needs phone labels; use `bpse evaluate` on a manifest")
        provider = PredictedBppg(run.am(args.am), run.ae(False, args.ae))
    out = enhance_utterance(model, read_wav(args.input), provider)
    write_wav(args.output, out, codec="float32")
    print(f"wrote {args.output}")


COMMANDS = {"prepare": cmd_prepare, "cluster": cmd_cluster, "train-am": cmd_train_am, "train-ae": cmd_train_ae,
            "train-se": cmd_train_se, "enhance": cmd_enhance, "evaluate": cmd_evaluate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int)
    common.add_argument("--preset", choices=["paper", "desk"])
    common.add_argument("--criterion", choices=["mono", "manner", "place", "data-driven"])
    common.add_argument("--ground-truth", action="store_true", default=None,
                        help="condition on one-hot class labels instead of AM posteriors")
    common.add_argument("--out", help="run directory")
    common.add_argument("--am", help="acoustic model checkpoint (default: run directory)")
    common.add_argument("--ae", help="autoencoder checkpoint (default: run directory)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bpse", description="Broad-phonetic-class conditioned speech enhancement")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="build mixtures and the manifest")
    p = sub.add_parser("cluster", parents=[common], help="write a BPC partition")
    p.add_argument("--confusion", help="phone confusion CSV for --criterion data-driven")
    p.add_argument("--target-k", type=int)
    sub.add_parser("train-am", parents=[common], help="train the frame classifier")
    sub.add_parser("train-ae", parents=[common], help="train the posteriorgram autoencoder")
    p = sub.add_parser("train-se", parents=[common], help="train an enhancement model")
    p.add_argument("--baseline", action="store_true", help="train without BPPG conditioning")
    p = sub.add_parser("enhance", parents=[common], help="enhance one WAV file")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--model", help="SE checkpoint (default: se-baseline.ckpt in the run directory)")
    p = sub.add_parser("evaluate", parents=[common], help="score systems on the test split")
    p.add_argument("--systems", help="comma-separated, e.g. noisy,baseline,bpse-manner")
    p.add_argument("--accuracy", action="store_true", help="also tabulate AM frame accuracy")
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.out and (Path(args.out) / "config.json").exists() and args.command != "prepare":
        cfg = load_config(Path(args.out) / "config.json")
    else:
        cfg = ExperimentConfig()
    crit = args.criterion.replace("-", "_") if args.criterion else None
    return cfg.with_overrides(seed=args.seed, preset=args.preset, criterion=crit, ground_truth=args.ground_truth,
                              out_dir=args.out, target_k=getattr(args, "target_k", None))


def exit_code(exc: BpseError) -> int:
    if isinstance(exc, (ConfigError, UsageError)):
        return EXIT_CONFIG
    if isinstance(exc, DependencyError):
        return EXIT_DEPENDENCY
    return EXIT_DATA


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        run = Run(resolve_config(args))
        COMMANDS[args.command](run, args)
    except BpseError as exc:
        print(f"bpse {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
