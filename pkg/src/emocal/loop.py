"""Minimum-perimeter emotion loops over VAD points.

An emotion loop is the shortest Hamiltonian cycle over a category set, with
edge weights given by Euclidean distance in VAD space. Placing the categories
on a circle with arc lengths proportional to the cycle's edge weights turns
the cycle into a metric: the distance between two categories is the shorter
way around, divided by the perimeter, which lands in [0, 0.5].

Solvers:

* flat taxonomies: Held-Karp dynamic programming, exact for n <= EXACT_LIMIT.
  Larger instances require ``heuristic=True`` (nearest neighbor + 2-opt) and
  emit a suboptimality warning.
* hierarchical taxonomies: children of one parent must stay contiguous on the
  cycle. Each parent block is collapsed to a path (internal orderings
  enumerated exactly), then a Held-Karp pass runs over blocks using
  endpoint-to-endpoint distances.

Results are canonical: the reported cycle starts at the alphabetically first
label and runs in the direction with the lexicographically smaller index
sequence, so the output is invariant under permutation of the input points.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmocalError
from .lexicon import VadPoint

EXACT_LIMIT = 16  # Held-Karp state space cap (flat categories / parent blocks)
BLOCK_LIMIT = 8  # per-parent block size cap for internal path enumeration


class LoopError(EmocalError):
    code = "loop"


@dataclass(frozen=True)
class EmotionLoop:
    """A canonical cycle over category labels with its normalized metric."""

    order: tuple[str, ...]
    arc_weights: tuple[float, ...]
    perimeter: float
    dist: tuple[tuple[float, ...], ...]
    hierarchical_constrained: bool
    taxonomy_name: str = ""
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {label.strip().casefold(): i for i, label in enumerate(self.order)}
        )

    def __len__(self) -> int:
        return len(self.order)

    def __contains__(self, label: str) -> bool:
        return label.strip().casefold() in self._index

    def position(self, label: str) -> int:
        try:
            return self._index[label.strip().casefold()]
        except KeyError:
            raise LoopError(f"label {label!r} is not on the loop", code="unknown_label") from None


def build_loop(
    points: list[tuple[str, VadPoint]],
    parents: dict[str, str] | None = None,
    *,
    heuristic: bool = False,
    taxonomy_name: str = "",
) -> EmotionLoop:
    """Construct the optimal loop over labeled VAD points.

    ``parents`` maps every label to its parent group; when given, the cycle is
    the minimum-perimeter one among those keeping each parent's children
    contiguous.
    """
    n = len(points)
    if n < 2:
        raise LoopError("a loop needs at least 2 categories")
    labels = [label for label, _ in points]
    if len({l.strip().casefold() for l in labels}) != n:
        raise LoopError("duplicate labels in points")

    # canonical input ordering makes the result permutation-invariant
    pts = sorted(points, key=lambda lp: (lp[0].casefold(), lp[0]))
    coords = [p.as_tuple() if isinstance(p, VadPoint) else tuple(p) for _, p in pts]
    dist = [[math.dist(a, b) for b in coords] for a in coords]

    if parents is not None:
        missing = [label for label, _ in pts if label not in parents]
        if missing:
            raise LoopError(f"labels without a parent: {', '.join(missing)}")
        blocks: dict[str, list[int]] = {}
        for i, (label, _) in enumerate(pts):
            blocks.setdefault(parents[label], []).append(i)
        cycle = _solve_blocks(dist, list(blocks.values()))
        constrained = True
    else:
        if n <= EXACT_LIMIT:
            cycle = _held_karp_cycle(dist)
        elif heuristic:
            warnings.warn(
                f"flat taxonomy with n={n} > {EXACT_LIMIT}: using nearest-neighbor + 2-opt, "
                "result may be suboptimal"
            )
            cycle = _two_opt(_nearest_neighbor(dist), dist)
        else:
            raise LoopError(
                f"flat taxonomy with n={n} exceeds the exact-solver limit {EXACT_LIMIT}; "
                "enable the heuristic to proceed"
            )
        constrained = False

    cycle = _canonical_cycle(cycle)
    order = tuple(pts[i][0] for i in cycle)
    arcs = tuple(dist[cycle[i]][cycle[(i + 1) % n]] for i in range(n))
    perimeter = math.fsum(arcs)
    matrix = _distance_matrix(arcs, perimeter)
    return EmotionLoop(
        order=order,
        arc_weights=arcs,
        perimeter=perimeter,
        dist=matrix,
        hierarchical_constrained=constrained,
        taxonomy_name=taxonomy_name,
    )


def normalized_distance(loop: EmotionLoop, a: str, b: str) -> float:
    """Shorter-way-around distance between two loop members, in [0, 0.5]."""
    return loop.dist[loop.position(a)][loop.position(b)]


def _distance_matrix(
    arcs: tuple[float, ...], perimeter: float
) -> tuple[tuple[float, ...], ...]:
    n = len(arcs)
    prefix = [0.0]
    for w in arcs:
        prefix.append(prefix[-1] + w)
    matrix = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if perimeter == 0.0:
                d = 0.0
            else:
                s = prefix[j] - prefix[i]
                d = min(s, perimeter - s) / perimeter
            matrix[i][j] = matrix[j][i] = d
    return tuple(tuple(row) for row in matrix)


def _held_karp_cycle(dist: list[list[float]]) -> list[int]:
    """Exact minimum Hamiltonian cycle; returns vertex order starting at 0."""
    n = len(dist)
    if n == 2:
        return [0, 1]
    size = 1 << n
    INF = math.inf
    # dp[mask][j]: cheapest path 0 -> ... -> j visiting exactly the set `mask`
    dp = [[INF] * n for _ in range(size)]
    parent = [[-1] * n for _ in range(size)]
    dp[1][0] = 0.0
    for mask in range(1, size):
        if not mask & 1:
            continue
        row = dp[mask]
        for last in range(n):
            cost = row[last]
            if cost == INF or not mask & (1 << last):
                continue
            dlast = dist[last]
            for nxt in range(1, n):
                bit = 1 << nxt
                if mask & bit:
                    continue
                cand = cost + dlast[nxt]
                nmask = mask | bit
                if cand < dp[nmask][nxt]:
                    dp[nmask][nxt] = cand
                    parent[nmask][nxt] = last
    full = size - 1
    best, best_last = INF, -1
    for last in range(1, n):
        cand = dp[full][last] + dist[last][0]
        if cand < best:
            best, best_last = cand, last
    order: list[int] = []
    mask, last = full, best_last
    while last != -1:
        order.append(last)
        mask, last = mask ^ (1 << last), parent[mask][last]
    order.reverse()
    return order


def _block_paths(dist: list[list[float]], block: list[int]) -> dict[tuple[int, int], list[int]]:
    """Cheapest internal Hamiltonian path per (entry, exit) vertex pair."""
    if len(block) == 1:
        v = block[0]
        return {(v, v): [v]}
    if len(block) > BLOCK_LIMIT:
        raise LoopError(
            f"parent block of size {len(block)} exceeds the enumeration bound {BLOCK_LIMIT}"
        )
    best: dict[tuple[int, int], tuple[float, list[int]]] = {}
    for perm in itertools.permutations(block):
        cost = math.fsum(dist[perm[i]][perm[i + 1]] for i in range(len(perm) - 1))
        key = (perm[0], perm[-1])
        if key not in best or cost < best[key][0]:
            best[key] = (cost, list(perm))
    return {key: path for key, (_, path) in best.items()}


def _solve_blocks(dist: list[list[float]], blocks: list[list[int]]) -> list[int]:
    """Exact minimum cycle with each block contiguous.

    Anchors the first block, enumerates its entry vertex, and runs Held-Karp
    over the remaining blocks on (exit vertex, entry vertex) distances.
    """
    nb = len(blocks)
    if nb > EXACT_LIMIT:
        raise LoopError(f"{nb} parent blocks exceed the exact-solver limit {EXACT_LIMIT}")
    paths = [_block_paths(dist, b) for b in blocks]
    path_cost = [
        {key: _path_length(dist, p) for key, p in block_paths.items()} for block_paths in paths
    ]

    if nb == 1:
        best_cost, best_path = math.inf, None
        for (e, x), p in paths[0].items():
            cost = path_cost[0][(e, x)] + dist[x][e]
            if cost < best_cost:
                best_cost, best_path = cost, p
        assert best_path is not None
        return best_path

    best_cost, best_order = math.inf, None
    for entry0 in blocks[0]:
        # state: (visited block mask, block index, exit vertex)
        dp: dict[tuple[int, int, int], float] = {}
        back: dict[tuple[int, int, int], tuple[tuple[int, int, int] | None, int]] = {}
        for (e, x), c in path_cost[0].items():
            if e != entry0:
                continue
            state = (1, 0, x)
            if c < dp.get(state, math.inf):
                dp[state] = c
                back[state] = (None, e)
        full = (1 << nb) - 1
        frontier = dict(dp)
        while frontier:
            next_frontier: dict[tuple[int, int, int], float] = {}
            for (mask, b, x), cost in frontier.items():
                for b2 in range(1, nb):
                    bit = 1 << b2
                    if mask & bit:
                        continue
                    for (e2, x2), c2 in path_cost[b2].items():
                        cand = cost + dist[x][e2] + c2
                        state = (mask | bit, b2, x2)
                        if cand < dp.get(state, math.inf):
                            dp[state] = cand
                            next_frontier[state] = cand
                            back[state] = ((mask, b, x), e2)
            frontier = next_frontier
        for (mask, b, x), cost in dp.items():
            if mask != full:
                continue
            total = cost + dist[x][entry0]
            if total < best_cost:
                best_cost = total
                order: list[int] = []
                state: tuple[int, int, int] | None = (mask, b, x)
                while state is not None:
                    prev, entry = back[state]
                    order = paths[state[1]][(entry, state[2])] + order
                    state = prev
                best_order = order
    assert best_order is not None
    return best_order


def _path_length(dist: list[list[float]], path: list[int]) -> float:
    return math.fsum(dist[path[i]][path[i + 1]] for i in range(len(path) - 1))


def _nearest_neighbor(dist: list[list[float]]) -> list[int]:
    n = len(dist)
    order = [0]
    remaining = set(range(1, n))
    while remaining:
        last = order[-1]
        nxt = min(remaining, key=lambda j: (dist[last][j], j))
        order.append(nxt)
        remaining.remove(nxt)
    return order


def _two_opt(order: list[int], dist: list[list[float]]) -> list[int]:
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue  # same edge pair
                a, b = order[i], order[i + 1]
                c, d = order[j], order[(j + 1) % n]
                delta = dist[a][c] + dist[b][d] - dist[a][b] - dist[c][d]
                if delta < -1e-12:
                    order[i + 1 : j + 1] = reversed(order[i + 1 : j + 1])
                    improved = True
    return order


def _canonical_cycle(cycle: list[int]) -> list[int]:
    """Rotate to start at the lowest index, pick the lexicographically smaller direction."""
    k = cycle.index(min(cycle))
    fwd = cycle[k:] + cycle[:k]
    rev = [fwd[0]] + fwd[1:][::-1]
    return fwd if fwd <= rev else rev


def serialize_loop(loop: EmotionLoop) -> dict:
    return {
        "order": list(loop.order),
        "arc_weights": list(loop.arc_weights),
        "perimeter": loop.perimeter,
        "dist": [list(row) for row in loop.dist],
        "hierarchical_constrained": loop.hierarchical_constrained,
        "taxonomy_name": loop.taxonomy_name,
    }


def deserialize_loop(doc: dict) -> EmotionLoop:
    """Rebuild a loop from its document form, revalidating all invariants."""
    try:
        order = [str(x) for x in doc["order"]]
        arcs = [float(x) for x in doc["arc_weights"]]
        perimeter = float(doc["perimeter"])
        matrix = [[float(x) for x in row] for row in doc["dist"]]
        constrained = bool(doc["hierarchical_constrained"])
        taxonomy_name = str(doc.get("taxonomy_name", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise LoopError(f"malformed loop document: {exc}") from exc

    n = len(order)
    if n < 2:
        raise LoopError("loop document needs at least 2 categories")
    if len({l.strip().casefold() for l in order}) != n:
        raise LoopError("loop document has duplicate labels")
    if len(arcs) != n:
        raise LoopError("arc_weights length must match order length")
    for w in arcs:
        if not math.isfinite(w) or w < 0:
            raise LoopError(f"negative or non-finite arc weight {w!r}")
    if not math.isclose(perimeter, math.fsum(arcs), rel_tol=1e-9, abs_tol=1e-12):
        raise LoopError("perimeter does not equal the sum of arc weights")
    if len(matrix) != n or any(len(row) != n for row in matrix):
        raise LoopError("dist must be an n x n matrix")
    for i in range(n):
        if matrix[i][i] != 0.0:
            raise LoopError(f"dist[{i}][{i}] must be 0")
        for j in range(n):
            if matrix[i][j] != matrix[j][i]:
                raise LoopError(f"dist[{i}][{j}] != dist[{j}][{i}]")
            if not 0.0 <= matrix[i][j] <= 0.5 + 1e-12:
                raise LoopError(f"dist[{i}][{j}] = {matrix[i][j]!r} outside [0, 0.5]")

    return EmotionLoop(
        order=tuple(order),
        arc_weights=tuple(arcs),
        perimeter=perimeter,
        dist=tuple(tuple(row) for row in matrix),
        hierarchical_constrained=constrained,
        taxonomy_name=taxonomy_name,
    )


def save_loop(loop: EmotionLoop, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(serialize_loop(loop), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def load_loop(path: str | Path) -> EmotionLoop:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise LoopError(f"cannot read loop file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LoopError(f"{path}: invalid JSON: {exc}") from exc
    return deserialize_loop(doc)
