"""Per-holon contribution bookkeeping and the weighted-average aggregator.

Every holon keeps the latest model column received from each peer, split into
three blocks: B (subordinates, or the holon's own model if it is terminal),
N (neighbors), and U (superiors). Aggregation concatenates the blocks in B,
N, U order, with a fixed sender order inside each block, and returns the
weighted mean of the columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from .holarchy import HolonId


class Block(Enum):
    SUBORDINATE = "B"
    NEIGHBOR = "N"
    SUPERIOR = "U"


_BLOCK_ORDER = (Block.SUBORDINATE, Block.NEIGHBOR, Block.SUPERIOR)


@dataclass
class ContributionState:
    """Latest (parameters, weight) per sender, per block.

    At most one column per sender per block: a newer update from the same
    sender replaces the older one, so a slow peer is never double-counted.
    `order_index` (holarchy declaration order) fixes the column order inside
    each block, making assembly independent of arrival order.

    Owned exclusively by one holon's execution unit; mutation only happens
    inside that unit's handlers.
    """

    dim: int
    order_index: Mapping[HolonId, int]
    _blocks: dict[Block, dict[HolonId, tuple[np.ndarray, float]]] = field(
        default_factory=lambda: {b: {} for b in _BLOCK_ORDER}
    )

    def size(self, block: Block) -> int:
        return len(self._blocks[block])

    def total_columns(self) -> int:
        return sum(len(d) for d in self._blocks.values())

    def has(self, block: Block, sender: HolonId) -> bool:
        return sender in self._blocks[block]

    def senders(self, block: Block) -> list[HolonId]:
        return sorted(self._blocks[block], key=lambda h: self.order_index.get(h, 1 << 30))

    def column(self, block: Block, sender: HolonId) -> tuple[np.ndarray, float]:
        return self._blocks[block][sender]

    def clear(self, block: Block) -> None:
        self._blocks[block].clear()

    def pop(self, block: Block, sender: HolonId) -> None:
        self._blocks[block].pop(sender, None)

    def set_sole(self, block: Block, sender: HolonId, theta: np.ndarray, weight: float) -> None:
        """Make `sender` the only column of `block`."""
        self.clear(block)
        record_update(self, block, sender, theta, weight)

    def is_sole(self, block: Block, sender: HolonId) -> bool:
        entries = self._blocks[block]
        return len(entries) == 1 and sender in entries


def _check_column(dim: int, theta: np.ndarray, weight: float) -> np.ndarray:
    arr = np.asarray(theta, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ValueError(f"parameter vector has shape {arr.shape}, expected ({dim},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameter vector contains non-finite entries")
    if not np.isfinite(weight) or weight <= 0:
        raise ValueError(f"contribution weight must be a positive real, got {weight}")
    return arr


def record_update(
    state: ContributionState,
    block: Block,
    sender: HolonId,
    theta: np.ndarray,
    weight: float,
) -> ContributionState:
    """Insert or replace the column for `sender` in `block`. Returns the state."""
    arr = _check_column(state.dim, theta, weight)
    state._blocks[block][sender] = (arr.copy(), float(weight))
    return state


@dataclass(frozen=True)
class AssembledContribution:
    """Column-concatenated contributions, B columns first, then N, then U."""

    theta: np.ndarray  # shape (dim, z)
    weights: np.ndarray  # shape (z,)
    senders: tuple[HolonId, ...]
    block_sizes: tuple[int, int, int]  # (b, n, u)


def assemble(state: ContributionState) -> AssembledContribution:
    """Concatenate blocks in B|N|U order with deterministic sender order."""
    columns: list[np.ndarray] = []
    weights: list[float] = []
    senders: list[HolonId] = []
    sizes = []
    for block in _BLOCK_ORDER:
        block_senders = state.senders(block)
        sizes.append(len(block_senders))
        for sender in block_senders:
            theta, w = state.column(block, sender)
            columns.append(theta)
            weights.append(w)
            senders.append(sender)
    if not columns:
        raise ValueError("cannot assemble: all contribution blocks are empty")
    return AssembledContribution(
        theta=np.stack(columns, axis=1),
        weights=np.asarray(weights, dtype=np.float64),
        senders=tuple(senders),
        block_sizes=(sizes[0], sizes[1], sizes[2]),
    )


def weighted_average(ac: AssembledContribution) -> np.ndarray:
    """Weighted mean of the columns: (theta @ w) / sum(w).

    The summation order is the fixed column order, so repeated runs on the
    same inputs are bit-identical.
    """
    if ac.theta.ndim != 2 or ac.theta.shape[1] == 0:
        raise ValueError("weighted_average requires at least one column")
    if ac.weights.shape != (ac.theta.shape[1],):
        raise ValueError("weights length must equal the number of columns")
    total = float(np.sum(ac.weights))
    if not total > 0:
        raise ValueError("total contribution weight must be positive")
    return (ac.theta @ ac.weights) / total
