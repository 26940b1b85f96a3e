from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .bleu import bleu, bleu_stats, ngrams
from .ter import sentence_edits, ter


@dataclass
class ScoreReport:
    bleu: float | None = None
    precisions: list[float] = field(default_factory=list)
    bp: float | None = None
    ratio: float | None = None
    hyp_len: int | None = None
    ref_len: int | None = None
    ter: float | None = None

    def format(self) -> str:
        lines = []
        if self.bleu is not None:
            p = "/".join(f"{x:.1f}" for x in self.precisions)
            lines.append(
                f"BLEU = {self.bleu:.2f}, {p} (BP={self.bp:.3f}, ratio={self.ratio:.3f}, "
                f"hyp_len={self.hyp_len}, ref_len={self.ref_len})"
            )
        if self.ter is not None:
            lines.append(f"TER = {self.ter:.2f}")
        return "\n".join(lines)


def score(hyps: Sequence[str], refs: Sequence[str], metric: str = "both") -> ScoreReport:
    if metric not in ("bleu", "ter", "both"):
        raise ValueError(f"unknown metric {metric!r}")
    report = ScoreReport()
    if metric in ("bleu", "both"):
        b = bleu(hyps, refs)
        report.bleu, report.precisions, report.bp = b["bleu"], b["precisions"], b["bp"]
        report.ratio, report.hyp_len, report.ref_len = b["ratio"], b["hyp_len"], b["ref_len"]
    if metric in ("ter", "both"):
        report.ter = ter(hyps, refs)["ter"]
    return report


def compare_corpora(mt: Sequence[str], pe: Sequence[str]) -> ScoreReport:
    """Score raw MT output against its post-edits (the do-nothing baseline)."""
    return score(mt, pe, "both")


__all__ = ["ScoreReport", "bleu", "bleu_stats", "compare_corpora", "ngrams", "score", "sentence_edits", "ter"]
