"""Insertion/deletion/substitution channel with PCR-style copy retransmission.

Each strand passes through three i.i.d. per-position stages applied in order:
insertion, deletion, substitution. The total error probability ``gamma`` is
split 17% / 40% / 43% between them. PCR amplification is modelled as ``v``
independent realizations of the channel for every strand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .preprocess import compute_K, pad_and_map
from .validation import check_bases

INSERTION_SHARE = 0.17
DELETION_SHARE = 0.40
SUBSTITUTION_SHARE = 0.43

_PASSES = ("insertion", "deletion", "substitution")


@dataclass(frozen=True)
class ChannelConfig:
    gamma: float = 0.005
    v: int = 2
    s: int = 256
    seed: int | None = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.v < 1:
            raise ValueError(f"v must be >= 1, got {self.v}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")

    @property
    def p_insert(self) -> float:
        return INSERTION_SHARE * self.gamma

    @property
    def p_delete(self) -> float:
        return DELETION_SHARE * self.gamma

    @property
    def p_substitute(self) -> float:
        return SUBSTITUTION_SHARE * self.gamma


@dataclass
class Strand:
    """A stretch of bases; ``origin`` is ``(sequence_id, strand_index)``."""

    bases: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __len__(self) -> int:
        return len(self.bases)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Strand):
            return NotImplemented
        return self.origin == other.origin and np.array_equal(self.bases, other.bases)


class ErrorCounts(NamedTuple):
    """Event counts of one channel use, with the number of positions each pass saw."""

    insertions: int
    deletions: int
    substitutions: int
    insertion_trials: int
    deletion_trials: int
    substitution_trials: int

    def __add__(self, other):
        return ErrorCounts(*(a + b for a, b in zip(self, other)))


ZERO_COUNTS = ErrorCounts(0, 0, 0, 0, 0, 0)


def segment(z, s: int, seq_id: int = 0) -> list[Strand]:
    """Cut ``z`` into consecutive strands of length ``s`` (the last may be shorter)."""
    if s <= 0:
        raise ValueError(f"strand length s must be positive, got {s}")
    z = check_bases(z)
    return [Strand(z[i:i + s].copy(), (seq_id, j)) for j, i in enumerate(range(0, len(z), s))]


def _pass_generators(seed, key: Sequence[int]) -> list[np.random.Generator]:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return [np.random.default_rng(child) for child in ss.spawn(len(_PASSES))]


def ids_transform(bases: np.ndarray, p_ins: float, p_del: float, p_sub: float,
                  rngs) -> tuple[np.ndarray, ErrorCounts]:
    """Apply insertion, deletion and substitution passes to a base vector.

    ``rngs`` is either one Generator used for all passes or a sequence of
    three (insertion, deletion, substitution).
    """
    if isinstance(rngs, np.random.Generator):
        g_ins = g_del = g_sub = rngs
    else:
        g_ins, g_del, g_sub = rngs
    x = np.asarray(bases, dtype=np.int8)
    n_in = len(x)

    # insertion: a random base lands immediately before each selected position
    ins_at = np.flatnonzero(g_ins.random(n_in) < p_ins)
    if ins_at.size:
        x = np.insert(x, ins_at, g_ins.integers(0, 4, size=ins_at.size).astype(np.int8))
    n_mid = len(x)

    keep = g_del.random(n_mid) >= p_del
    n_deleted = int(n_mid - keep.sum())
    if n_deleted:
        x = x[keep]
    else:
        x = x.copy()
    n_out = len(x)

    # substitution always changes the base: offset by 1..3 modulo 4
    sub_at = np.flatnonzero(g_sub.random(n_out) < p_sub)
    if sub_at.size:
        x[sub_at] = (x[sub_at] + g_sub.integers(1, 4, size=sub_at.size)) % 4

    return x, ErrorCounts(int(ins_at.size), n_deleted, int(sub_at.size), n_in, n_mid, n_out)


def apply_ids(strand: Strand, cfg: ChannelConfig, rng=None, *, copy_index: int = 0,
              key: Sequence[int] = (), return_counts: bool = False):
    """Pass one strand through the IDS channel.

    Without an explicit ``rng`` the three passes draw from sub-streams of
    ``cfg.seed`` keyed by ``(*key, copy_index, sequence_id, strand_index)``,
    so a given strand copy always sees the same noise.
    """
    if rng is None:
        rng = _pass_generators(cfg.seed, (*key, copy_index, *strand.origin))
    out, counts = ids_transform(strand.bases, cfg.p_insert, cfg.p_delete, cfg.p_substitute, rng)
    noisy = Strand(out, strand.origin)
    return (noisy, counts) if return_counts else noisy


def pcr_amplify(z, cfg: ChannelConfig, *, seq_id: int = 0, key: Sequence[int] = (),
                rng: np.random.Generator | None = None) -> list[list[Strand]]:
    """Segment ``z`` once, then draw ``cfg.v`` independent noisy copies of every strand.

    Returns a list of ``v`` copies, each a list of strands in origin order.
    """
    strands = segment(z, cfg.s, seq_id)
    if cfg.gamma == 0.0:
        return [[Strand(st.bases.copy(), st.origin) for st in strands] for _ in range(cfg.v)]
    return [
        [apply_ids(st, cfg, rng, copy_index=j, key=key) for st in strands]
        for j in range(cfg.v)
    ]


def recombine(copies: Sequence[Sequence[Strand]]) -> list[np.ndarray]:
    """Concatenate each copy's strands in strand-index order."""
    out = []
    for j, strands in enumerate(copies):
        if not strands:
            raise ValueError(f"copy {j} holds no strands")
        by_index = {st.origin[1]: st for st in strands}
        if len(by_index) != len(strands):
            raise ValueError(f"copy {j} has duplicate strand indices")
        expected = set(range(len(strands)))
        missing = sorted(expected - set(by_index))
        if missing:
            raise ValueError(f"copy {j} is missing strand index {missing[0]}")
        out.append(np.concatenate([by_index[i].bases for i in range(len(strands))]).astype(np.int8))
    return out


def transmit(Z, cfg: ChannelConfig, *, rng: np.random.Generator | None = None,
             key: Sequence[int] = ()) -> np.ndarray:
    """Store and read back a batch of sequences ``(B, k)``; returns ``(B, v, K)`` bundles."""
    Z = np.asarray(Z)
    if Z.ndim == 1:
        Z = Z[None]
    B, k = Z.shape
    K = compute_K(k)
    if cfg.gamma == 0.0:
        bundle = np.zeros((B, cfg.v, K), dtype=np.int8)
        bundle[:, :, :k] = Z[:, None, :] + 1
        return bundle
    out = np.empty((B, cfg.v, K), dtype=np.int8)
    for i, z in enumerate(Z):
        copies = pcr_amplify(z, cfg, seq_id=i, key=key, rng=rng)
        out[i] = pad_and_map(recombine(copies), K)
    return out


@dataclass
class ChannelStats:
    """Monte Carlo summary of channel behaviour at one ``gamma``."""

    gamma: float
    counts: ErrorCounts = field(default=ZERO_COUNTS)

    @property
    def nucleotides(self) -> int:
        return self.counts.insertion_trials

    def rate(self, kind: str) -> float:
        c = self.counts
        events, trials = {
            "insertion": (c.insertions, c.insertion_trials),
            "deletion": (c.deletions, c.deletion_trials),
            "substitution": (c.substitutions, c.substitution_trials),
        }[kind]
        return events / trials

    @property
    def length_drift(self) -> float:
        """Mean change in length per input nucleotide."""
        return (self.counts.insertions - self.counts.deletions) / self.nucleotides


def simulate(n_nucleotides: int, gamma: float, s: int = 256, seed: int = 0) -> ChannelStats:
    """Push ``n_nucleotides`` uniformly random bases through the channel and tally events."""
    cfg = ChannelConfig(gamma=gamma, v=1, s=s, seed=seed)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 4, size=n_nucleotides).astype(np.int8)
    total = ZERO_COUNTS
    for strand in segment(z, s):
        _, counts = apply_ids(strand, cfg, rng, return_counts=True)
        total = total + counts
    return ChannelStats(gamma, total)
