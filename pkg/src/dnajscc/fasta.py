"""FASTA reading and writing for strand sets.

Headers carry ``imgID|strandIdx|copyIdx`` so that strands can be regrouped
per image and per PCR copy after a round trip through a file.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bio import to_codes, to_text
from .channel import Strand

LINE_WIDTH = 80


class FastaRecord(NamedTuple):
    img_id: int
    strand_idx: int
    copy_idx: int
    bases: np.ndarray

    @property
    def header(self) -> str:
        return f"{self.img_id}|{self.strand_idx}|{self.copy_idx}"


def parse_header(header: str) -> tuple[int, int, int]:
    parts = header.split()[0].split("|")
    if len(parts) != 3:
        raise ValueError(f"FASTA header {header!r} is not of the form imgID|strandIdx|copyIdx")
    try:
        return int(parts[0]), int(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"FASTA header {header!r} has non-integer fields") from None


def write_fasta(records: Iterable[FastaRecord], path, line_width: int = LINE_WIDTH) -> None:
    path = Path(path)
    with path.open("w") as f:
        for rec in records:
            f.write(f">{rec.header}\n")
            text = to_text(rec.bases)
            for i in range(0, len(text), line_width):
                f.write(text[i:i + line_width] + "\n")


def read_fasta(path) -> list[FastaRecord]:
    path = Path(path)
    records: list[FastaRecord] = []
    header: str | None = None
    chunks: list[str] = []

    def flush():
        if header is not None:
            records.append(FastaRecord(*parse_header(header), to_codes("".join(chunks))))

    with path.open() as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                header, chunks = line[1:], []
            else:
                if header is None:
                    raise ValueError(f"{path}: sequence data before the first header")
                chunks.append(line)
    flush()
    return records


def records_from_copies(copies: Sequence[Sequence[Strand]], img_id: int | None = None) -> list[FastaRecord]:
    """Flatten ``copies[copy][strand]`` into records (copy-major, strand order kept)."""
    out = []
    for j, strands in enumerate(copies):
        for st in strands:
            seq_id = st.origin[0] if img_id is None else img_id
            out.append(FastaRecord(seq_id, st.origin[1], j, st.bases))
    return out


def records_from_sequence(z, s: int, img_id: int = 0, copy_idx: int = 0) -> list[FastaRecord]:
    z = np.asarray(z)
    return [FastaRecord(img_id, j, copy_idx, z[i:i + s]) for j, i in enumerate(range(0, len(z), s))]


def group_records(records: Iterable[FastaRecord]) -> dict[int, list[list[Strand]]]:
    """Regroup records into ``{img_id: copies}`` with each copy a list of strands."""
    table: dict[int, dict[int, list[Strand]]] = defaultdict(lambda: defaultdict(list))
    for rec in records:
        table[rec.img_id][rec.copy_idx].append(Strand(rec.bases, (rec.img_id, rec.strand_idx)))
    return {
        img: [sorted(by_copy[c], key=lambda st: st.origin[1]) for c in sorted(by_copy)]
        for img, by_copy in sorted(table.items())
    }
