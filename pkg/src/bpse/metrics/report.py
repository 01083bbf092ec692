"""Grouping per-utterance scores into Table-style reports."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ShapeError
from ..dsp.types import Waveform

log = logging.getLogger(__name__)


def measure_snr(clean: Waveform, noisy: Waveform) -> float:
    """10·log10(Σclean² / Σ(noisy − clean)²) in dB; ``math.inf`` when no noise is present."""
    x = clean.samples if isinstance(clean, Waveform) else clean
    y = noisy.samples if isinstance(noisy, Waveform) else noisy
    if len(x) != len(y):
        raise ShapeError(f"length mismatch: {len(x)} vs {len(y)}")
    p_noise = math.fsum((y - x) ** 2)
    if p_noise == 0.0:
        return math.inf
    p_clean = math.fsum(x ** 2)
    if p_clean == 0.0:
        return -math.inf
    return 10.0 * math.log10(p_clean / p_noise)


@dataclass(frozen=True)
class Score:
    system: str
    snr_db: float
    utt_id: str
    value: float


@dataclass
class ReportRow:
    scores: list[float] = field(default_factory=list)
    utt_ids: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.scores)

    @property
    def mean(self) -> float:
        return math.fsum(self.scores) / len(self.scores)


@dataclass
class EvalReport:
    metric: str
    systems: list[str]
    snrs: list[float]
    rows: dict[tuple[str, float], ReportRow]

    def mean(self, system: str, snr_db: float) -> float:
        return self.rows[(system, snr_db)].mean

    def average(self, system: str) -> float:
        """Mean over the per-SNR means (the tables' "Avg" convention)."""
        means = [self.rows[(system, s)].mean for s in self.snrs if (system, s) in self.rows]
        return math.fsum(means) / len(means)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["system", "snr_db", "count", f"mean_{self.metric}"])
        for sys_name in self.systems:
            for s in self.snrs:
                if (sys_name, s) in self.rows:
                    r = self.rows[(sys_name, s)]
                    w.writerow([sys_name, _fmt_snr(s), r.count, repr(r.mean)])
            w.writerow([sys_name, "Avg", sum(self.rows[(sys_name, s)].count for s in self.snrs
                                             if (sys_name, s) in self.rows), repr(self.average(sys_name))])
        return buf.getvalue()

    def to_table(self, digits: int = 3) -> str:
        """Aligned text table: one row per SNR (ascending) plus Avg; one column per system."""
        head = ["SNR"] + list(self.systems)
        lines = []
        for s in sorted(self.snrs):
            cells = [_fmt_snr(s)]
            for sys_name in self.systems:
                r = self.rows.get((sys_name, s))
                cells.append(f"{r.mean:.{digits}f}" if r else "-")
            lines.append(cells)
        lines.append(["Avg"] + [f"{self.average(n):.{digits}f}" for n in self.systems])
        widths = [max(len(row[i]) for row in [head] + lines) for i in range(len(head))]
        fmt = lambda row: " | ".join(c.rjust(wd) for c, wd in zip(row, widths))
        rule = "-+-".join("-" * wd for wd in widths)
        return "\n".join([fmt(head), rule] + [fmt(r) for r in lines[:-1]] + [rule, fmt(lines[-1])]) + "\n"

    def per_utterance_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["system", "snr_db", "utt_id", self.metric])
        for sys_name in self.systems:
            for s in self.snrs:
                r = self.rows.get((sys_name, s))
                for uid, v in zip(r.utt_ids, r.scores) if r else ():
                    w.writerow([sys_name, _fmt_snr(s), uid, repr(v)])
        return buf.getvalue()


def _fmt_snr(s: float) -> str:
    return str(int(s)) if float(s).is_integer() else repr(float(s))


def aggregate(scores, metric: str = "stoi", systems=None, snrs=None) -> EvalReport:
    """Group :class:`Score` records by (system, SNR).

    Scores inside a group are ordered by utterance id so the report does not
    depend on input order. Requested (system, SNR) groups with no scores are
    left out with a warning.
    """
    scores = sorted(scores, key=lambda s: (s.system, s.snr_db, s.utt_id))
    rows: dict[tuple[str, float], ReportRow] = {}
    for s in scores:
        row = rows.setdefault((s.system, float(s.snr_db)), ReportRow())
        row.scores.append(float(s.value))
        row.utt_ids.append(s.utt_id)
    if systems is None:
        systems = sorted({k[0] for k in rows})
    if snrs is None:
        snrs = sorted({k[1] for k in rows}, reverse=True)
    for name in systems:
        for snr in snrs:
            if (name, float(snr)) not in rows:
                log.warning("no scores for system %s at %s dB; group omitted", name, snr)
    return EvalReport(metric, list(systems), [float(s) for s in snrs], rows)


def read_scores_csv(path, system: str | None = None) -> list[Score]:
    """Load external per-utterance scores (columns: system, snr_db, utt_id, value).

    This is the slot for metrics computed by outside tools such as PESQ.
    """
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Score(system or row["system"], float(row["snr_db"]), row["utt_id"], float(row["value"])))
    return out


def write_scores_csv(path, scores) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "snr_db", "utt_id", "value"])
        for s in scores:
            w.writerow([s.system, _fmt_snr(s.snr_db), s.utt_id, repr(s.value)])


def write_report(report: EvalReport, out_dir, stem: str) -> None:
    out_dir = Path(out_dir)
    (out_dir / f"{stem}.csv").write_text(report.to_csv())
    (out_dir / f"{stem}.txt").write_text(report.to_table())
