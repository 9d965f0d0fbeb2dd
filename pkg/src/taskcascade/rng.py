"""Counter-based random streams keyed by (master seed, seed node, run).

Each (master seed, seed node index, purpose) triple hashes to a Philox key.
Run ``k`` owns a fixed-width block of the Philox counter space, so its
uniforms can be produced by jumping straight to the block. Nothing depends
on how many runs were drawn before, in which order, or on which thread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CASCADE = 0
RANKING = 1

_MASK64 = (1 << 64) - 1


def stream_key(master_seed: int, seed_index: int, purpose: int) -> np.ndarray:
    ss = np.random.SeedSequence(master_seed & _MASK64, spawn_key=(seed_index, purpose))
    return ss.generate_state(2, np.uint64)


def row_width(n_nodes: int) -> int:
    # Philox emits four 64-bit words per counter step
    return max(4, -(-n_nodes // 4) * 4)


def uniforms(master_seed: int, seed_index: int, purpose: int, runs: range | int,
             n_nodes: int) -> np.ndarray:
    """``(len(runs), n_nodes)`` array of U[0, 1); row ``r`` belongs to run ``runs[r]``."""
    if isinstance(runs, int):
        runs = range(runs)
    if runs.step != 1:
        raise ValueError("runs must be a contiguous range")
    width = row_width(n_nodes)
    bitgen = np.random.Philox(key=stream_key(master_seed, seed_index, purpose))
    if runs.start:
        bitgen.advance(runs.start * width // 4)
    block = np.random.Generator(bitgen).random((len(runs), width))
    return block[:, :n_nodes]


@dataclass(frozen=True)
class RngStream:
    """Random numbers for one (seed node, run) coordinate."""

    master_seed: int
    seed_index: int
    run_index: int = 0

    def cascade_uniforms(self, n_nodes: int) -> np.ndarray:
        """One draw per node, compared against that node's failure probability."""
        return uniforms(self.master_seed, self.seed_index, CASCADE,
                        range(self.run_index, self.run_index + 1), n_nodes)[0]

    def ranking_uniforms(self, n_nodes: int) -> np.ndarray:
        """One draw per node used as random score and tie-break key."""
        return uniforms(self.master_seed, self.seed_index, RANKING,
                        range(self.run_index, self.run_index + 1), n_nodes)[0]

    def run(self, k: int) -> "RngStream":
        return RngStream(self.master_seed, self.seed_index, k)
