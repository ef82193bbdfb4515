"""Pilot sequence books, assignment across cells, and sharing sets.

Pilot books are rows of the DFT matrix, which are unit-modulus and mutually
orthogonal. Cells are grouped into reuse classes; UEs inside a cell always
get orthogonal pilots, and two UEs in different cells interfere during
estimation iff they share a pilot (their "sharing set").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig, hex_cluster_values


@dataclass(frozen=True)
class PilotBook:
    """n_seq orthogonal unit-modulus sequences of a given length."""

    length: int
    seqs: np.ndarray          # (n_seq, length) complex

    def __post_init__(self):
        if self.seqs.shape != (self.seqs.shape[0], self.length):
            raise ValueError("sequence array shape mismatch")


def make_pilot_book(length: int, n_seq: int | None = None) -> PilotBook:
    """DFT pilot book: seq a, sample j = exp(-2*pi*i*a*j/length).

    Rows satisfy seq_a^H seq_b = length * delta_ab.
    """
    if length < 1:
        raise ConfigError(f"pilot length must be positive (got {length})")
    n_seq = length if n_seq is None else n_seq
    if n_seq > length:
        raise ConfigError(f"cannot draw {n_seq} orthogonal sequences of length {length}")
    a = np.arange(n_seq)[:, None]
    j = np.arange(length)[None, :]
    # Reduce the phase index mod length before multiplying to keep angles small.
    phase = -2.0 * np.pi * ((a * j) % length) / length
    return PilotBook(length=length, seqs=np.exp(1j * phase))


@dataclass
class PilotAssignment:
    """Pilot index per UE plus derived reuse structure.

    indices[l, k] points into book.seqs; sharing[l][k] lists every (cell, ue)
    pair using the same sequence, always including (l, k) itself.
    """

    mode: str                 # 'rp' or 'sp'
    book: PilotBook
    indices: np.ndarray       # (L, K) int
    reuse_factor: int         # nominal reuse f
    n_classes: int            # distinct cell colors actually used
    sharing: list = field(default_factory=list)

    def seq(self, l: int, k: int) -> np.ndarray:
        return self.book.seqs[self.indices[l, k]]

    def cell_seqs(self, l: int) -> np.ndarray:
        """(K, length) pilot sequences of cell l's UEs."""
        return self.book.seqs[self.indices[l]]


def _sharing_sets(indices: np.ndarray) -> list:
    L, K = indices.shape
    by_index: dict[int, list[tuple[int, int]]] = {}
    for l in range(L):
        for k in range(K):
            by_index.setdefault(int(indices[l, k]), []).append((l, k))
    return [[by_index[int(indices[l, k])] for k in range(K)] for l in range(L)]


def sp_reuse_factor(config: ScenarioConfig) -> int:
    """Largest hex-cluster value not exceeding tau_c // K.

    Superimposed pilots span the whole block, so up to tau_c // K cells can
    get mutually orthogonal pilot sets; the reuse pattern must still tile
    the hexagonal grid, hence the restriction to cluster sizes
    i^2 + i*j + j^2 (1, 3, 4, 7, 9, 12, 13, 16, 19, 21, ...).
    """
    cap = config.tau_c // config.K
    vals = hex_cluster_values(cap)
    if not vals:
        raise ConfigError(f"tau_c={config.tau_c} too short for K={config.K} orthogonal pilots")
    return vals[-1]


def assign_pilots(config: ScenarioConfig, mode: str) -> PilotAssignment:
    """Deterministic pilot plan for either pilot scheme.

    rp: book length tau_p, reuse f = tau_p // K (tau_p must be a multiple
        of K); cells colored l mod min(f, L).
    sp: book length tau_c, reuse f = largest hex-cluster value <= tau_c // K;
        with min(f, L) >= L every cell gets its own orthogonal block and all
        sharing sets are singletons.
    """
    L, K = config.L, config.K
    if mode == "rp":
        if config.tau_p % K != 0:
            raise ConfigError(f"rp needs tau_p to be a multiple of K (got {config.tau_p}, K={K})")
        f = config.tau_p // K
        length = config.tau_p
    elif mode == "sp":
        f = sp_reuse_factor(config)
        length = config.tau_c
    else:
        raise ConfigError(f"unknown pilot mode {mode!r}")

    n_classes = min(f, L)
    book = make_pilot_book(length, n_seq=n_classes * K)
    color = np.arange(L) % n_classes
    indices = color[:, None] * K + np.arange(K)[None, :]
    assignment = PilotAssignment(mode=mode, book=book, indices=indices,
                                 reuse_factor=f, n_classes=n_classes)
    assignment.sharing = _sharing_sets(indices)
    return assignment
