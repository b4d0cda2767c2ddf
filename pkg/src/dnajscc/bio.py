"""GC-content and homopolymer statistics of base sequences."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .validation import check_bases

ALPHABET = "ACGT"
GC_BOUNDS = (0.45, 0.55)
RUN_THRESHOLD = 5
RUN_LIMIT = 0.02
RUN_DESIRABLE = 0.01


def to_codes(seq) -> np.ndarray:
    """Accept ``"ACGT"`` text or integer codes; return int8 codes."""
    if isinstance(seq, str):
        table = {ch: i for i, ch in enumerate(ALPHABET)}
        try:
            return np.array([table[ch] for ch in seq.upper()], dtype=np.int8)
        except KeyError as err:
            raise ValueError(f"invalid nucleotide {err.args[0]!r}") from None
    return check_bases(seq, allow_empty=True)


def to_text(z) -> str:
    return "".join(ALPHABET[b] for b in check_bases(z, allow_empty=True))


def base_frequencies(z) -> np.ndarray:
    z = to_codes(z)
    if z.size == 0:
        raise ValueError("cannot compute frequencies of an empty sequence")
    return np.bincount(z, minlength=4) / z.size


def gc_content(z) -> float:
    """Fraction of C and G bases."""
    z = to_codes(z)
    if z.size == 0:
        raise ValueError("gc_content of an empty sequence is undefined")
    return float(np.count_nonzero((z == 1) | (z == 2)) / z.size)


def runs(z) -> list[tuple[int, int]]:
    """Maximal homopolymer runs as ``(base, length)`` pairs, in order."""
    z = to_codes(z)
    if z.size == 0:
        return []
    bounds = np.flatnonzero(np.diff(z)) + 1
    starts = np.concatenate(([0], bounds))
    lengths = np.diff(np.concatenate((starts, [z.size])))
    return [(int(z[s]), int(n)) for s, n in zip(starts, lengths)]


def run_stats(z, L: int = RUN_THRESHOLD) -> tuple[dict[int, int], float]:
    """Return ``(run_histogram, frac_runs_gt)``.

    The histogram maps run length to the number of nucleotides sitting in
    runs of that length; ``frac_runs_gt`` is the share of nucleotides inside
    runs longer than ``L``.
    """
    if L < 1:
        raise ValueError(f"run threshold L must be >= 1, got {L}")
    z = to_codes(z)
    if z.size == 0:
        raise ValueError("run_stats of an empty sequence is undefined")
    hist: Counter[int] = Counter()
    for _, n in runs(z):
        hist[n] += n
    above = sum(count for length, count in hist.items() if length > L)
    return dict(sorted(hist.items())), above / z.size


@dataclass
class BioReport:
    gc_fraction: float
    frac_runs_gt: float
    p: np.ndarray
    run_histogram: dict[int, int] = field(default_factory=dict)
    threshold: int = RUN_THRESHOLD
    n_strands: int = 1

    def to_dict(self) -> dict:
        return {
            "gc_fraction": self.gc_fraction,
            "frac_runs_gt": self.frac_runs_gt,
            "threshold": self.threshold,
            "p": {b: float(x) for b, x in zip(ALPHABET, self.p)},
            "run_histogram": {str(k): v for k, v in self.run_histogram.items()},
            "n_strands": self.n_strands,
        }


def bio_report(sequences, L: int = RUN_THRESHOLD, s: int | None = None) -> BioReport:
    """Statistics over one or more sequences.

    With ``s`` given every sequence is cut into length-``s`` strands first.
    GC, run fraction and base frequencies are averaged per strand; the run
    histogram is pooled.
    """
    strands = []
    for seq in _sequence_list(sequences):
        z = to_codes(seq)
        if s:
            strands.extend(z[i:i + s] for i in range(0, len(z), s))
        else:
            strands.append(z)
    strands = [st for st in strands if st.size]
    if not strands:
        raise ValueError("no bases to analyse")
    gcs, fracs, ps = [], [], []
    hist: Counter[int] = Counter()
    for st in strands:
        h, f = run_stats(st, L)
        hist.update(h)
        fracs.append(f)
        gcs.append(gc_content(st))
        ps.append(base_frequencies(st))
    return BioReport(
        gc_fraction=float(np.mean(gcs)),
        frac_runs_gt=float(np.mean(fracs)),
        p=np.mean(ps, axis=0),
        run_histogram=dict(sorted(hist.items())),
        threshold=L,
        n_strands=len(strands),
    )


def _sequence_list(sequences) -> list:
    if isinstance(sequences, str):
        return [sequences]
    if isinstance(sequences, np.ndarray):
        return [sequences] if sequences.ndim == 1 else list(sequences)
    seqs = list(sequences)
    if seqs and np.ndim(seqs[0]) == 0 and not isinstance(seqs[0], str):
        return [np.asarray(seqs)]
    return seqs


@dataclass
class Verdict:
    passed: bool
    desirable: bool
    reasons: list[str]


def validate(report: BioReport, gc_bounds: tuple[float, float] = GC_BOUNDS,
             run_limit: float = RUN_LIMIT, run_desirable: float = RUN_DESIRABLE) -> Verdict:
    """Check a report against the GC window and homopolymer limits (bounds inclusive)."""
    reasons = []
    lo, hi = gc_bounds
    if not lo <= report.gc_fraction <= hi:
        reasons.append(f"GC-content {report.gc_fraction:.4f} outside [{lo}, {hi}]")
    if report.frac_runs_gt > run_limit:
        reasons.append(
            f"RLL: {report.frac_runs_gt:.4f} of bases in runs longer than "
            f"{report.threshold} exceeds {run_limit}"
        )
    passed = not reasons
    return Verdict(passed, passed and report.frac_runs_gt <= run_desirable, reasons)
