"""Relay graph construction and the three route strategies.

SPR is greedy geographic forwarding: always hop to the admitted neighbor
closest to the destination, fail on any local minimum. IAR wraps the same
greedy walk in three stages that escape to, migrate along, and return from
the cell-boundary band where base-station interference is weakest. BR floods:
every receiving node rebroadcasts once.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .channel import ChannelModel
from .env import Point, UrbanMap, segment_wall_stats

log = logging.getLogger(__name__)

Role = str  # "source" | "relay" | "destination"

# How many consecutive non-improving hops a detouring (boundary-strategy)
# walk may take before it counts as lost. Keeps escape-around-a-block moves
# possible without letting routes wander the whole map.
DETOUR_LIMIT = 5

# Hop budget (TTL) for the three-stage boundary route; a store-and-forward
# emergency route beyond this many relays is treated as lost.
IAR_MAX_HOPS = 18


@dataclass(frozen=True)
class RelayNode:
    id: int
    position: Point
    role: Role = "relay"


@dataclass(frozen=True)
class CellGeometry:
    """BS sites and the band half-width used to call a node 'on the boundary'."""

    bs_positions: tuple[Point, ...]
    boundary_tolerance: float = 110.0

    def __post_init__(self):
        object.__setattr__(self, "bs_positions", tuple(self.bs_positions))
        if len(self.bs_positions) < 1:
            raise ValueError("need at least one BS position")
        if self.boundary_tolerance <= 0:
            raise ValueError("boundary tolerance must be > 0")


@dataclass
class ReachabilityGraph:
    """Directed link graph; edge weights are estimated link success probabilities.

    `edge_loss_db` keeps each admitted edge's realized non-fading loss
    (distance law + shadowing + walls) so later SINR draws stay consistent
    with the conditions the edge was admitted under.
    """

    nodes: dict[int, RelayNode]
    adjacency: dict[int, dict[int, float]]
    edge_loss_db: dict[tuple[int, int], float] = field(default_factory=dict)

    def position(self, node_id: int) -> Point:
        return self.nodes[node_id].position

    def neighbors(self, node_id: int) -> dict[int, float]:
        return self.adjacency.get(node_id, {})

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.adjacency.values())


@dataclass(frozen=True)
class Route:
    """An ordered hop sequence; hops includes both endpoints, so J = len - 1."""

    hops: tuple[int, ...]
    per_hop_success: tuple[float, ...]
    total_length: float
    boundary_violations: int = 0

    @property
    def hop_count(self) -> int:
        return len(self.per_hop_success)

    @property
    def transmitters(self) -> tuple[int, ...]:
        """Nodes that transmit when this route carries data (all but the last)."""
        return self.hops[:-1]


@dataclass(frozen=True)
class BroadcastResult:
    reached: bool
    transmissions: int
    hop_depth: int | None
    broadcasters: tuple[int, ...] = ()
    path: tuple[int, ...] | None = None


def _resolve_interference(
    nodes: Sequence[RelayNode],
    interference_field: float | Mapping[int, float] | Callable[[Point], float],
) -> np.ndarray:
    if callable(interference_field):
        return np.array([interference_field(n.position) for n in nodes], dtype=float)
    if isinstance(interference_field, Mapping):
        return np.array([interference_field[n.id] for n in nodes], dtype=float)
    return np.full(len(nodes), float(interference_field))


def build_reachability(
    nodes: Sequence[RelayNode],
    urban_map: UrbanMap,
    model: ChannelModel,
    tx_power_w: float,
    threshold: float,
    interference_field: float | Mapping[int, float] | Callable[[Point], float] = 0.0,
    fading_samples: int = 16,
    *,
    p_admit: float = 0.5,
    seed: int | np.random.SeedSequence = 0,
    max_link_range: float | None = None,
) -> ReachabilityGraph:
    """Estimate every directed link's success probability and admit the good ones.

    A directed edge u -> v carries the fraction of `fading_samples` Rayleigh
    draws whose SINR clears `threshold` (linear) against the ambient expected
    interference at v plus receiver noise; the edge exists iff that fraction
    reaches `p_admit`. Per-link shadowing is drawn once per unordered pair
    (propagation is reciprocal), so the estimate stays symmetric up to the
    interference and fading draws.
    """
    if fading_samples < 1:
        raise ValueError("fading_samples must be >= 1")
    if not (0.0 <= p_admit <= 1.0):
        raise ValueError("p_admit must lie in [0, 1]")
    node_list = sorted(nodes, key=lambda n: n.id)
    ids = [n.id for n in node_list]
    if len(set(ids)) != len(ids):
        raise ValueError("node ids must be unique")
    n = len(node_list)
    graph = ReachabilityGraph(
        nodes={node.id: node for node in node_list},
        adjacency={node.id: {} for node in node_list},
    )
    if n < 2:
        return graph

    rng = np.random.default_rng(seed)
    xy = np.array([(node.position.x, node.position.y) for node in node_list])
    noise_plus_i = _resolve_interference(node_list, interference_field) + model.noise_w

    iu, jv = np.triu_indices(n, k=1)
    d = np.hypot(xy[iu, 0] - xy[jv, 0], xy[iu, 1] - xy[jv, 1])
    keep = d > 0.0
    if max_link_range is not None:
        keep &= d <= max_link_range
    iu, jv, d = iu[keep], jv[keep], d[keep]
    if len(iu) == 0:
        return graph

    # Shadowing and fading are laid out over every candidate pair BEFORE any
    # admissibility filtering, so a pair's draws do not depend on the
    # threshold; raising the threshold therefore never adds edges.
    shadow = (
        rng.normal(0.0, model.shadow_sigma_db, len(iu))
        if model.shadow_sigma_db > 0
        else np.zeros(len(iu))
    )
    # Ziggurat float32 draws: the admission estimate is a Bernoulli mean
    # quantized to 1/fading_samples, so single precision loses nothing.
    h_fwd = rng.standard_exponential((len(iu), fading_samples), dtype=np.float32)
    h_rev = rng.standard_exponential((len(iu), fading_samples), dtype=np.float32)

    los_db = model.los.loss_db(d, model.carrier_ghz)
    if p_admit > 0:
        # Optimistic pre-filter: line of sight, zero walls, realized shadow.
        # Pairs whose best-case Rayleigh success sits 10x below p_admit cannot
        # pass the sampled admission test, so skip their wall geometry.
        opt_lin = 10.0 ** ((los_db + shadow) / 10.0)
        need_opt = (
            threshold * np.minimum(noise_plus_i[iu], noise_plus_i[jv]) * opt_lin / tx_power_w
        )
        sel = np.flatnonzero(need_opt <= math.log(10.0 / p_admit))
    else:
        sel = np.arange(len(iu))
    if len(sel) == 0:
        return graph
    iu_s, jv_s, d_s = iu[sel], jv[sel], d[sel]

    counts, wall_db = segment_wall_stats(xy[iu_s], xy[jv_s], urban_map)
    los = counts == 0
    base_db = np.where(
        los, los_db[sel], model.nlos.loss_db(d_s, model.carrier_ghz)
    ) + wall_db
    total_db = base_db + shadow[sel]
    loss_lin = 10.0 ** (total_db / 10.0)

    # h must exceed threshold * (noise + I_rx) * L / P for a draw to succeed.
    need_fwd = threshold * noise_plus_i[jv_s] * loss_lin / tx_power_w
    need_rev = threshold * noise_plus_i[iu_s] * loss_lin / tx_power_w
    succ_fwd = (h_fwd[sel] >= need_fwd[:, None]).mean(axis=1)
    succ_rev = (h_rev[sel] >= need_rev[:, None]).mean(axis=1)

    for fwd, succ in ((True, succ_fwd), (False, succ_rev)):
        adm = np.flatnonzero(succ >= p_admit)
        us = (iu_s if fwd else jv_s)[adm].tolist()
        vs = (jv_s if fwd else iu_s)[adm].tolist()
        ps = succ[adm].tolist()
        dbs = total_db[adm].tolist()
        for ui, vi, p, db in zip(us, vs, ps, dbs):
            u, v = ids[ui], ids[vi]
            graph.adjacency[u][v] = p
            graph.edge_loss_db[(u, v)] = db
    return graph


def _require_node(graph: ReachabilityGraph, node_id: int):
    if node_id not in graph.nodes:
        raise KeyError(f"node {node_id} not in graph")


def _greedy_walk(
    graph: ReachabilityGraph,
    start: int,
    target_point: Point,
    visited: set[int],
    *,
    stop: Callable[[int], bool],
    strict: bool = True,
    allowed: set[int] | None = None,
    count_fallback: bool = False,
    max_steps: int | None = None,
) -> tuple[list[int], list[float], int] | None:
    """Greedy geographic walk from `start` until `stop(node)` holds.

    Each step moves to the unvisited neighbor nearest `target_point`; when an
    improving neighbor exists that choice improves automatically. Under
    `strict` the walk fails on any non-improving step (the plain-SPR local
    minimum rule); otherwise it detours through the least-bad neighbor and
    only fails on exhaustion. When `allowed` is given, candidates outside it
    are only considered as a (counted) fallback when no allowed neighbor is
    usable. Returns (nodes appended after start, per-hop success, fallback
    count) or None on a dead end.
    """
    cur = start
    cur_d = graph.position(cur).distance_to(target_point)
    added: list[int] = []
    succ: list[float] = []
    fallbacks = 0
    detours = 0
    while not stop(cur):
        step = _best_step(graph, cur, target_point, visited, allowed)
        usable = step is not None and (not strict or step[1] < cur_d)
        if not usable and allowed is not None:
            step = _best_step(graph, cur, target_point, visited, None)
            usable = step is not None and (not strict or step[1] < cur_d)
            if usable and count_fallback:
                fallbacks += 1
        if not usable:
            return None
        if max_steps is not None and len(added) >= max_steps:
            return None
        nxt, nxt_d, p = step
        if nxt_d >= cur_d:
            detours += 1
            if detours > DETOUR_LIMIT:
                return None
        else:
            detours = 0
        visited.add(nxt)
        added.append(nxt)
        succ.append(p)
        cur, cur_d = nxt, nxt_d
    return added, succ, fallbacks


def _best_step(graph, cur, target_point, visited, allowed):
    best = None
    for nb, p in graph.neighbors(cur).items():
        if nb in visited:
            continue
        if allowed is not None and nb not in allowed:
            continue
        dnb = graph.position(nb).distance_to(target_point)
        if best is None or dnb < best[1] or (dnb == best[1] and nb < best[0]):
            best = (nb, dnb, p)
    return best


def _path_length(graph: ReachabilityGraph, hops: Sequence[int]) -> float:
    return sum(
        graph.position(a).distance_to(graph.position(b)) for a, b in zip(hops[:-1], hops[1:])
    )


def route_spr(graph: ReachabilityGraph, src: int, dst: int) -> Route | None:
    """Greedy geographic route; None on an isolated source or local minimum."""
    _require_node(graph, src)
    _require_node(graph, dst)
    if src == dst:
        return Route(hops=(src,), per_hop_success=(), total_length=0.0)
    visited = {src}
    walk = _greedy_walk(
        graph, src, graph.position(dst), visited, stop=lambda node: node == dst
    )
    if walk is None:
        return None
    added, succ, _ = walk
    hops = (src, *added)
    return Route(hops=hops, per_hop_success=tuple(succ), total_length=_path_length(graph, hops))


def route_iar(graph: ReachabilityGraph, src: int, dst: int, cells: CellGeometry,
              max_hops: int | None = IAR_MAX_HOPS) -> Route | None:
    """Three-stage boundary-seeking route; each stage is a greedy walk.

    Stage 1 escapes from the source to the cell-boundary band (aiming at the
    boundary node nearest the source, stopping at the first band member hit).
    Stage 2 migrates along the band toward the boundary node nearest the
    destination, preferring band members and falling back to any neighbor
    when the band is too sparse (each fallback is counted on the Route).
    Stage 3 returns from the band to the destination.

    Unlike the plain greedy route, stage walks may take non-improving hops to
    detour around obstacles (they still always pick the unvisited neighbor
    closest to the stage target, so progress wins whenever it is available);
    this is what makes the boundary strategy robust where unconstrained
    greedy dead-ends. Degenerate stages are skipped; a stage that exhausts
    its candidates means no route.
    """
    _require_node(graph, src)
    _require_node(graph, dst)
    if src == dst:
        return Route(hops=(src,), per_hop_success=(), total_length=0.0)
    band = boundary_nodes(graph.nodes.values(), cells)
    if not band:
        return None

    visited = {src}
    hops: list[int] = [src]
    succ: list[float] = []
    violations = 0
    cur = src

    def arrived(node: int) -> bool:
        return node == dst

    # Stage 1: escape to the boundary band.
    if cur not in band and cur != dst:
        exit1 = min(band, key=lambda b: (graph.position(b).distance_to(graph.position(src)), b))
        walk = _greedy_walk(
            graph, cur, graph.position(exit1), visited,
            stop=lambda node: node in band or node == dst, strict=False,
            max_steps=None if max_hops is None else max_hops - len(succ),
        )
        if walk is None:
            return None
        added, s, _ = walk
        hops.extend(added)
        succ.extend(s)
        cur = hops[-1]

    # Stage 2: migrate along the band toward the exit closest to the destination.
    if cur != dst:
        exit2 = min(band, key=lambda b: (graph.position(b).distance_to(graph.position(dst)), b))
        if cur != exit2:
            walk = _greedy_walk(
                graph, cur, graph.position(exit2), visited,
                stop=lambda node: node == exit2 or node == dst,
                strict=False, allowed=band, count_fallback=True,
                max_steps=None if max_hops is None else max_hops - len(succ),
            )
            if walk is None:
                return None
            added, s, violations = walk[0], walk[1], walk[2]
            hops.extend(added)
            succ.extend(s)
            cur = hops[-1]

    # Stage 3: return from the band.
    if cur != dst:
        walk = _greedy_walk(graph, cur, graph.position(dst), visited, stop=arrived, strict=False,
                            max_steps=None if max_hops is None else max_hops - len(succ))
        if walk is None:
            return None
        added, s, _ = walk
        hops.extend(added)
        succ.extend(s)

    hops_t = tuple(hops)
    return Route(
        hops=hops_t,
        per_hop_success=tuple(succ),
        total_length=_path_length(graph, hops_t),
        boundary_violations=violations,
    )


def route_br(graph: ReachabilityGraph, src: int, dst: int) -> BroadcastResult:
    """Flooding: breadth-first ripple where every receiving node rebroadcasts once.

    The destination itself does not rebroadcast. `transmissions` counts every
    node that broadcast; when the destination is unreachable that is exactly
    the source's component size.
    """
    _require_node(graph, src)
    _require_node(graph, dst)
    if src == dst:
        return BroadcastResult(reached=True, transmissions=0, hop_depth=0, path=(src,))
    depth = {src: 0}
    parent: dict[int, int] = {}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v not in depth:
                depth[v] = depth[u] + 1
                parent[v] = u
                queue.append(v)
    reached = dst in depth
    broadcasters = tuple(node for node in depth if not (reached and node == dst))
    path = None
    if reached:
        chain = [dst]
        while chain[-1] != src:
            chain.append(parent[chain[-1]])
        path = tuple(reversed(chain))
    return BroadcastResult(
        reached=reached,
        transmissions=len(broadcasters),
        hop_depth=depth.get(dst),
        broadcasters=broadcasters,
        path=path,
    )


def boundary_nodes(nodes: Iterable[RelayNode], cells: CellGeometry) -> set[int]:
    """Node ids lying in the Voronoi-edge band between their two nearest BSs."""
    node_list = list(nodes)
    if len(cells.bs_positions) < 2:
        log.warning("boundary_nodes: need >= 2 BSs for a cell boundary; returning empty set")
        return set()
    if not node_list:
        return set()
    xy = np.array([(n.position.x, n.position.y) for n in node_list])
    bs = np.array([(p.x, p.y) for p in cells.bs_positions])
    d = np.hypot(xy[:, 0:1] - bs[None, :, 0], xy[:, 1:2] - bs[None, :, 1])
    d.sort(axis=1)
    in_band = (d[:, 1] - d[:, 0]) <= cells.boundary_tolerance
    return {node_list[k].id for k in np.flatnonzero(in_band)}
