"""Max-plus semiring arithmetic and the noisy max recursion.

The semiring zero is ``-inf`` and the one is ``0``; numpy's IEEE ``-inf``
already absorbs under ``+`` and is neutral under ``max``, so no sentinel
value is needed. Products are accumulated right to left:
``W(t, 0) = W(t-1) (x) ... (x) W(0)``.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InstanceTooLargeError, ShapeError
from .graph import Graph, GraphRealization
from .noise import NoiseModel

logger = logging.getLogger(__name__)

NEG_INF = -np.inf
ORACLE_MAX_STEPS = 8
ORACLE_MAX_NODES = 8


@dataclass(frozen=True, eq=False)
class MaxPlusMatrix:
    """Square matrix over R u {-inf}; entries are read-only."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeError(f"Max-plus matrix must be square, got shape {arr.shape}.")
        if np.isnan(arr).any() or np.isposinf(arr).any():
            raise DomainError("Max-plus entries must be real or -inf.")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: MaxPlusMatrix) -> MaxPlusMatrix:
        return mp_multiply(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaxPlusMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None


def mp_identity(n: int) -> MaxPlusMatrix:
    """0 on the diagonal, -inf elsewhere."""
    entries = np.full((n, n), NEG_INF)
    np.fill_diagonal(entries, 0.0)
    return MaxPlusMatrix(entries)


def mp_multiply(x: MaxPlusMatrix, y: MaxPlusMatrix) -> MaxPlusMatrix:
    """[X (x) Y]_{ij} = max_k (X_{ik} + Y_{kj})."""
    if x.dim != y.dim:
        raise ShapeError(f"Cannot multiply {x.dim}x{x.dim} by {y.dim}x{y.dim}.")
    return MaxPlusMatrix((x.entries[:, :, None] + y.entries[None, :, :]).max(axis=1))


def mp_product(matrices: Sequence[MaxPlusMatrix]) -> MaxPlusMatrix:
    """W(t, 0) for ``matrices = [W(0), ..., W(t-1)]``."""
    if not matrices:
        raise DomainError("Product of an empty matrix sequence has no dimension.")
    product = matrices[0]
    for w in matrices[1:]:
        product = mp_multiply(w, product)
    return product


def propagate(w: MaxPlusMatrix, x: np.ndarray) -> np.ndarray:
    """x'_i = max_j (W_ij + x_j)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (w.dim,):
        raise ShapeError(f"State of shape {x.shape} does not match a {w.dim}x{w.dim} matrix.")
    return (w.entries + x[None, :]).max(axis=1)


def build_noise_matrix(
    realization: GraphRealization,
    model: NoiseModel,
    rng: np.random.Generator,
    self_loop_noise: bool = False,
    erasure_penalty: float | None = None,
) -> MaxPlusMatrix:
    """Noise matrix for one iteration.

    A full N x N block of draws is taken on every call, so the stream
    advances identically whatever the erasure pattern or flags. Entry
    (i, j) carries the noise node i sees on the message from j. With
    ``erasure_penalty=C`` erased edges get ``-C`` instead of ``-inf``.
    """
    n = realization.base.n_nodes
    draws = model.sample(rng, (n, n))
    entries = np.full((n, n), NEG_INF)

    if erasure_penalty is not None:
        if erasure_penalty <= 0:
            raise DomainError(f"Erasure penalty must be positive, got {erasure_penalty}.")
        entries[realization.base.adjacency.astype(bool)] = -erasure_penalty

    active = realization.adjacency
    entries[active] = draws[active]
    np.fill_diagonal(entries, np.diag(draws) if self_loop_noise else 0.0)
    return MaxPlusMatrix(entries)


def _check_oracle_size(g: Graph, steps: int) -> None:
    if steps < 1:
        raise DomainError("Path oracle needs at least one matrix.")
    if steps > ORACLE_MAX_STEPS or g.n_nodes > ORACLE_MAX_NODES:
        raise InstanceTooLargeError(
            f"Path enumeration is capped at t <= {ORACLE_MAX_STEPS} and N <= {ORACLE_MAX_NODES}; "
            f"got t={steps}, N={g.n_nodes}."
        )


def path_max_table(g: Graph, matrices: Sequence[MaxPlusMatrix], j: int) -> np.ndarray:
    """Best path sum from ``j`` to every end node, by exhaustive enumeration.

    Paths may stay put (self-loop) or follow a graph edge at each step;
    step ``k`` contributes ``W(k)[next, current]``.
    """
    _check_oracle_size(g, len(matrices))
    steps = [m.entries for m in matrices]
    if any(s.shape != (g.n_nodes, g.n_nodes) for s in steps):
        raise ShapeError("Noise matrices do not match the graph size.")

    best = np.full(g.n_nodes, NEG_INF)
    t = len(steps)

    def walk(node: int, k: int, total: float) -> None:
        if k == t:
            if total > best[node]:
                best[node] = total
            return
        w = steps[k]
        for nxt in (node, *g.neighbors(node)):
            walk(nxt, k + 1, w[nxt, node] + total)

    walk(j, 0, 0.0)
    return best


def path_max_oracle(g: Graph, matrices: Sequence[MaxPlusMatrix], i: int, j: int) -> float:
    """Maximum path sum from ``j`` to ``i``; test oracle for ``mp_product``."""
    return float(path_max_table(g, matrices, j)[i])


def to_csv(m: MaxPlusMatrix) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, m.entries, fmt="%.17g", delimiter=",")
    return buffer.getvalue()


def from_csv(text: str) -> MaxPlusMatrix:
    """Parse ``to_csv`` output; the token ``-inf`` is the semiring zero."""
    try:
        entries = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DomainError(f"Malformed max-plus CSV: {exc}")
    return MaxPlusMatrix(entries)
