"""Edit-distance based recognition metrics.

Error rate is (S + D + I) / N with unit costs; recognition rate is its
complement. CER counts Unicode code points of NFC-normalized strings at the
corpus level (sum of edit ops over sum of reference lengths). WER for
word-image recognition is the exact-match failure rate, since every sample
is a single word.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

from .errors import DataError


@dataclass
class EditOps:
    """Minimal-cost alignment counts between a reference and a hypothesis."""

    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions


@dataclass
class SampleRecord:
    """Per-sample evaluation record."""

    path: str
    reference: str
    hypothesis: str
    distance: int
    reference_length: int


@dataclass
class MetricReport:
    """Corpus-level metrics plus the per-sample records they aggregate."""

    cer: float
    wer: float
    sample_count: int
    records: list[SampleRecord] = field(default_factory=list)

    @property
    def crr(self) -> float:
        return 1.0 - self.cer

    @property
    def wrr(self) -> float:
        return 1.0 - self.wer

    def summary_line(self) -> str:
        return (
            f"samples={self.sample_count} "
            f"CER={self.cer:.4f} CRR={self.crr:.4f} "
            f"WER={self.wer:.4f} WRR={self.wrr:.4f}"
        )


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def edit_ops(reference: str, hypothesis: str) -> EditOps:
    """Count substitutions/deletions/insertions of a minimal alignment.

    Strings are compared as NFC-normalized code-point sequences. When several
    alignments reach the minimum cost, ties break deterministically in favor
    of substitution, then deletion, then insertion.
    """
    ref = nfc(reference)
    hyp = nfc(hypothesis)
    m, n = len(ref), len(hyp)

    # each DP cell holds (cost, S, D, I); choice order on equal cost encodes
    # the tie-breaking preference
    row = [(j, 0, 0, j) for j in range(n + 1)]
    for i in range(1, m + 1):
        prev = row
        row = [(i, 0, i, 0)]
        for j in range(1, n + 1):
            match = ref[i - 1] == hyp[j - 1]
            dc, ds, dd, di = prev[j - 1]
            diag = (dc + (0 if match else 1), ds + (0 if match else 1), dd, di)
            uc, us, ud, ui = prev[j]
            up = (uc + 1, us, ud + 1, ui)
            lc, ls, ld, li = row[j - 1]
            left = (lc + 1, ls, ld, li + 1)
            best = diag
            if up[0] < best[0]:
                best = up
            if left[0] < best[0]:
                best = left
            row.append(best)

    cost, subs, dels, ins = row[n]
    assert cost == subs + dels + ins
    return EditOps(subs, dels, ins, reference_length=m)


def cer(pairs: list[tuple[str, str]]) -> float:
    """Corpus character error rate: sum of edit ops over sum of reference lengths."""
    if not pairs:
        raise DataError("CER is undefined for an empty pair list")
    total_ops = 0
    total_len = 0
    for ref, hyp in pairs:
        ops = edit_ops(ref, hyp)
        total_ops += ops.distance
        total_len += ops.reference_length
    if total_len == 0:
        raise DataError("CER is undefined: total reference length is zero")
    return total_ops / total_len


def wer(pairs: list[tuple[str, str]]) -> float:
    """Word error rate over single-word samples: fraction of mismatched pairs."""
    if not pairs:
        raise DataError("WER is undefined for an empty pair list")
    wrong = sum(1 for ref, hyp in pairs if nfc(ref) != nfc(hyp))
    return wrong / len(pairs)


def build_report(records: list[SampleRecord]) -> MetricReport:
    """Aggregate per-sample records into a MetricReport (micro-averaged CER)."""
    if not records:
        raise DataError("cannot build a report from zero records")
    total_len = sum(r.reference_length for r in records)
    if total_len == 0:
        raise DataError("CER is undefined: total reference length is zero")
    total_ops = sum(r.distance for r in records)
    wrong = sum(1 for r in records if r.reference != r.hypothesis)
    return MetricReport(
        cer=total_ops / total_len,
        wer=wrong / len(records),
        sample_count=len(records),
        records=records,
    )
