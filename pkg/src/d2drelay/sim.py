"""Two-tier Monte-Carlo engine: deployment, trials, sweeps, and band/strategy selection.

Every trial is reproducible from (master_seed, trial_index): the pair seeds a
SeedSequence whose spawned children drive deployment, the interference field,
graph construction, per-hop realizations, and the cellular probe — in that
fixed order. Trials are therefore order-independent and safe to farm out to
worker processes without changing any result.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import ChannelModel, pathloss_db_bulk
from .env import (
    ManhattanSpec,
    Point,
    UrbanMap,
    generate_manhattan_map,
    is_outdoor_bulk,
    load_map,
)
from .routing import (
    CellGeometry,
    ReachabilityGraph,
    RelayNode,
    Route,
    build_reachability,
    route_br,
    route_iar,
    route_spr,
)

BANDS = ("DL", "UL")
STRATEGIES = ("SPR", "IAR", "BR")
OUTCOME_SUCCESS = "success"
OUTCOME_ROUTE_FAILURE = "route-failure"
OUTCOME_LINK_OUTAGE = "link-outage"


class DeploymentError(RuntimeError):
    """Placement rejection sampling exhausted its attempt budget."""


@dataclass(frozen=True)
class Scenario:
    """One fully specified experiment point."""

    map_spec: ManhattanSpec = field(
        default_factory=lambda: ManhattanSpec(block_size=45.0, street_width=30.0, jitter=15.0)
    )
    map_file: str | None = None
    map_seed: int = 1
    wall_loss_db: float | None = None

    bs_rings: int = 1
    isd_m: float = 500.0
    bs_power_w: float = 40.0
    cc_ue_power_w: float = 0.2

    d2d_power_w: float = 0.1
    d2d_density_km2: float = 400.0
    pair_distance: float = 0.7
    band: str = "DL"
    strategy: str = "SPR"
    threshold_db: float = -6.0

    trials: int = 100
    master_seed: int = 1
    channel: ChannelModel = field(default_factory=ChannelModel)

    p_admit: float = 0.5
    fading_samples: int = 16
    max_link_range_m: float = 500.0
    boundary_tolerance_m: float = 110.0
    probe_positions: int = 8
    probe_fading: int = 16
    pair_tolerance: float = 0.02

    def __post_init__(self):
        if min(self.bs_power_w, self.cc_ue_power_w, self.d2d_power_w) <= 0:
            raise ValueError("all transmit powers must be > 0")
        if self.d2d_density_km2 < 0:
            raise ValueError("d2d density must be >= 0")
        if not (0.0 < self.pair_distance <= 1.0):
            raise ValueError("pair_distance must lie in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.band not in BANDS:
            raise ValueError(f"band must be one of {BANDS}, got {self.band!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.bs_rings < 0:
            raise ValueError("bs_rings must be >= 0")

    @property
    def threshold_linear(self) -> float:
        return 10.0 ** (self.threshold_db / 10.0)

    @property
    def cell_diameter_m(self) -> float:
        return self.isd_m


@dataclass(frozen=True)
class Deployment:
    """One trial's realized node placement."""

    trial_index: int
    bs: tuple[Point, ...]
    cc_ues: tuple[Point, ...]
    nodes: tuple[RelayNode, ...]
    src_id: int
    dst_id: int


@dataclass(frozen=True)
class TrialResult:
    outcome: str
    hops: int
    route_length_m: float | None
    cc_outage: float
    cc_baseline: float
    band: str
    strategy: str
    boundary_violations: int = 0
    per_hop_success: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("cc_outage", "cc_baseline"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} {v} outside [0, 1]")


@dataclass(frozen=True)
class SweepSpec:
    axis: str  # ue_density | wall_loss | pair_distance | cc_constraint
    grid: tuple[float, ...]
    strategies: tuple[str, ...] = ("SPR", "IAR")
    trials_per_point: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.axis not in ("ue_density", "wall_loss", "pair_distance", "cc_constraint"):
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.grid:
            raise ValueError("sweep grid must not be empty")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    strategy: str
    band: str
    trials: int
    d2d_success: float
    ci_low: float
    ci_high: float
    mean_hops: float
    mean_route_len_m: float
    cc_outage: float
    cc_baseline: float


@dataclass(frozen=True)
class OperatingPoint:
    strategy: str
    band: str
    d2d_outage: float
    cc_outage: float


@dataclass(frozen=True)
class StrategyChoice:
    constraint: float
    admissible: tuple[OperatingPoint, ...]
    chosen: OperatingPoint | None


# --------------------------------------------------------------------------
# Geometry helpers
# --------------------------------------------------------------------------

def hex_grid(center: Point, isd: float, rings: int) -> list[Point]:
    """Hexagonal site lattice: center plus `rings` full rings at pitch isd."""
    a1 = (isd, 0.0)
    a2 = (isd / 2.0, isd * math.sqrt(3.0) / 2.0)
    sites = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if max(abs(q), abs(r), abs(q + r)) > rings:
                continue
            x = center.x + q * a1[0] + r * a2[0]
            y = center.y + q * a1[1] + r * a2[1]
            ring = max(abs(q), abs(r), abs(q + r))
            ang = math.atan2(y - center.y, x - center.x) if ring else 0.0
            sites.append((ring, ang, Point(x, y)))
    sites.sort(key=lambda t: (t[0], t[1]))
    return [p for _, _, p in sites]


def _sample_outdoor_rng(urban_map: UrbanMap, count: int, rng: np.random.Generator,
                        max_rounds: int = 200) -> np.ndarray:
    """Uniform outdoor positions as an (count, 2) array, using the given stream."""
    if count == 0:
        return np.zeros((0, 2))
    out: list[np.ndarray] = []
    have = 0
    batch = max(2 * count, 64)
    for _ in range(max_rounds):
        pts = np.column_stack([
            rng.uniform(0.0, urban_map.width, batch),
            rng.uniform(0.0, urban_map.height, batch),
        ])
        good = pts[is_outdoor_bulk(pts, urban_map)]
        out.append(good)
        have += len(good)
        if have >= count:
            return np.concatenate(out)[:count]
    raise DeploymentError(f"could not sample {count} outdoor points")


def _sample_in_cell(
    rng: np.random.Generator,
    bs_xy: np.ndarray,
    cell_index: int,
    urban_map: UrbanMap,
    isd: float,
    count: int,
    max_rounds: int = 200,
) -> np.ndarray:
    """Uniform points in one site's Voronoi cell, outdoor wherever the map reaches."""
    circum = isd / math.sqrt(3.0)
    cx, cy = bs_xy[cell_index]
    got: list[np.ndarray] = []
    have = 0
    batch = max(4 * count, 64)
    for _ in range(max_rounds):
        r = circum * np.sqrt(rng.uniform(size=batch))
        t = rng.uniform(0.0, 2.0 * math.pi, batch)
        pts = np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])
        d2 = ((pts[:, None, :] - bs_xy[None, :, :]) ** 2).sum(axis=2)
        keep = (d2.argmin(axis=1) == cell_index) & is_outdoor_bulk(pts, urban_map)
        good = pts[keep]
        got.append(good)
        have += len(good)
        if have >= count:
            return np.concatenate(got)[:count]
    raise DeploymentError(f"could not place {count} points in cell {cell_index}")


# --------------------------------------------------------------------------
# Map resolution (cached: geometry is shared by every trial at a sweep point)
# --------------------------------------------------------------------------

_MAP_CACHE: dict = {}


def build_scenario_map(scenario: Scenario) -> UrbanMap:
    key = (scenario.map_file, scenario.map_spec, scenario.map_seed, scenario.wall_loss_db)
    if key not in _MAP_CACHE:
        if scenario.map_file is not None:
            with open(scenario.map_file, "r", encoding="utf-8") as fh:
                urban_map = load_map(fh.read())
            if scenario.wall_loss_db is not None:
                urban_map = urban_map.with_wall_loss(scenario.wall_loss_db)
        else:
            loss = 10.0 if scenario.wall_loss_db is None else scenario.wall_loss_db
            urban_map = generate_manhattan_map(
                scenario.map_spec, scenario.map_seed, default_wall_loss=loss
            )
        _MAP_CACHE[key] = urban_map
    return _MAP_CACHE[key]


# --------------------------------------------------------------------------
# Seed plumbing
# --------------------------------------------------------------------------

def _trial_streams(scenario: Scenario, trial_index: int):
    """Fixed derivation: SeedSequence([master_seed, trial_index]) spawned into
    (deployment, field, graph, realization, probe) child streams."""
    root = np.random.SeedSequence([scenario.master_seed, trial_index])
    return root.spawn(5)


# --------------------------------------------------------------------------
# Deployment
# --------------------------------------------------------------------------

def deploy(scenario: Scenario, trial_index: int, urban_map: UrbanMap | None = None) -> Deployment:
    """Place BSs, per-cell cellular UEs, relays, and the src/dst pair for one trial.

    BS sites sit on the hex lattice as-is; they model rooftop masts, so a site
    whose plan position falls inside a footprint is fine (its links never take
    ground-level wall penetration, see `_gain_matrix`).
    """
    urban_map = urban_map or build_scenario_map(scenario)
    deploy_ss, _, _, _, _ = _trial_streams(scenario, trial_index)
    rng = np.random.default_rng(deploy_ss)

    center = Point(urban_map.width / 2.0, urban_map.height / 2.0)
    bs = tuple(hex_grid(center, scenario.isd_m, scenario.bs_rings))
    bs_xy = np.array([(p.x, p.y) for p in bs])

    cc_ues = tuple(
        Point(*_sample_in_cell(rng, bs_xy, i, urban_map, scenario.isd_m, 1)[0])
        for i in range(len(bs))
    )

    area_km2 = urban_map.area / 1e6
    n_relays = int(rng.poisson(scenario.d2d_density_km2 * area_km2))
    relay_xy = _sample_outdoor_rng(urban_map, n_relays, rng)

    target = scenario.pair_distance * scenario.cell_diameter_m
    tol = scenario.pair_tolerance
    src = dst = None
    for _ in range(40):
        cand_src = _sample_outdoor_rng(urban_map, 32, rng)
        ang = rng.uniform(0.0, 2.0 * math.pi, 32)
        rad = target * rng.uniform(1.0 - tol, 1.0 + tol, 32)
        cand_dst = cand_src + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        ok = (
            (cand_dst[:, 0] >= 0.0) & (cand_dst[:, 0] <= urban_map.width)
            & (cand_dst[:, 1] >= 0.0) & (cand_dst[:, 1] <= urban_map.height)
            & is_outdoor_bulk(cand_dst, urban_map)
        )
        hits = np.flatnonzero(ok)
        if len(hits):
            src, dst = cand_src[hits[0]], cand_dst[hits[0]]
            break
    if src is None:
        raise DeploymentError(
            f"could not place src/dst pair at separation {target:.0f} m within budget"
        )

    nodes = [
        RelayNode(id=0, position=Point(*src), role="source"),
        RelayNode(id=1, position=Point(*dst), role="destination"),
    ]
    nodes.extend(
        RelayNode(id=2 + k, position=Point(*relay_xy[k]), role="relay")
        for k in range(n_relays)
    )
    return Deployment(
        trial_index=trial_index,
        bs=bs,
        cc_ues=cc_ues,
        nodes=tuple(nodes),
        src_id=0,
        dst_id=1,
    )


# --------------------------------------------------------------------------
# Per-trial physics
# --------------------------------------------------------------------------

def _band_sources(deployment: Deployment, scenario: Scenario) -> tuple[np.ndarray, float, bool]:
    """Positions, per-source power, and elevation of the D2D band's transmitters."""
    if scenario.band == "DL":
        xy = np.array([(p.x, p.y) for p in deployment.bs])
        return xy, scenario.bs_power_w, True
    xy = np.array([(p.x, p.y) for p in deployment.cc_ues])
    return xy, scenario.cc_ue_power_w, False


def _gain_matrix(
    src_xy: np.ndarray,
    dst_xy: np.ndarray,
    power_w: float,
    urban_map: UrbanMap,
    model: ChannelModel,
    rng: np.random.Generator,
    *,
    elevated: bool,
) -> np.ndarray:
    """Expected received watts from each source at each point, (S, N).

    Links touching a rooftop site (`elevated`) take the urban NLOS law with no
    wall add-on: a 45 m mast reaches street level over the rooftops, which the
    NLOS law already models, and ground-level wall counts would misrepresent
    that path. Ground UE-to-UE links ray-test LOS vs NLOS and charge wall
    penetration per crossing. Shadowing is drawn fresh per (source, point)
    pair; fading enters later, one draw per realization event.
    """
    s, n = len(src_xy), len(dst_xy)
    if elevated:
        d = np.hypot(
            src_xy[:, 0:1] - dst_xy[None, :, 0], src_xy[:, 1:2] - dst_xy[None, :, 1]
        )
        # The distance laws are not valid below a meter; clamping also keeps a
        # probe pinned at a site position finite.
        d = np.maximum(d, 1.0)
        loss_db = model.nlos.loss_db(d, model.carrier_ghz).reshape(s * n)
    else:
        a = np.repeat(src_xy, n, axis=0)
        b = np.tile(dst_xy, (s, 1))
        loss_db, _, _ = pathloss_db_bulk(a, b, urban_map, model)
    if model.shadow_sigma_db > 0:
        loss_db = loss_db + rng.normal(0.0, model.shadow_sigma_db, s * n)
    return (power_w * 10.0 ** (-loss_db / 10.0)).reshape(s, n)


def _route_for_strategy(
    scenario: Scenario,
    graph: ReachabilityGraph,
    deployment: Deployment,
) -> Route | None:
    if scenario.strategy == "SPR":
        return route_spr(graph, deployment.src_id, deployment.dst_id)
    if scenario.strategy == "IAR":
        cells = CellGeometry(
            bs_positions=deployment.bs,
            boundary_tolerance=scenario.boundary_tolerance_m,
        )
        return route_iar(graph, deployment.src_id, deployment.dst_id, cells)
    raise ValueError(f"no single-path route for strategy {scenario.strategy!r}")


@dataclass(frozen=True)
class _TrialContext:
    """Strategy-independent per-trial state, shareable across route strategies.

    The graph, interference field, and deployment depend only on the band and
    physics, so a sweep comparing strategies on one scenario point reuses one
    context per trial; the realization/probe streams are re-seeded per
    strategy evaluation from the same trial children, which keeps any single
    strategy's results identical to a standalone run.
    """

    deployment: Deployment
    node_xy: np.ndarray
    gains: np.ndarray
    graph: ReachabilityGraph
    node_index: dict
    real_ss: np.random.SeedSequence
    probe_ss: np.random.SeedSequence


def _build_context(
    deployment: Deployment, scenario: Scenario, urban_map: UrbanMap
) -> _TrialContext:
    _, field_ss, graph_ss, real_ss, probe_ss = _trial_streams(scenario, deployment.trial_index)
    node_xy = np.array([(n.position.x, n.position.y) for n in deployment.nodes])
    src_xy, src_power, src_elevated = _band_sources(deployment, scenario)
    field_rng = np.random.default_rng(field_ss)
    gains = _gain_matrix(
        src_xy, node_xy, src_power, urban_map, scenario.channel, field_rng,
        elevated=src_elevated,
    )
    interference = {n.id: float(v) for n, v in zip(deployment.nodes, gains.sum(axis=0))}
    graph = build_reachability(
        deployment.nodes,
        urban_map,
        scenario.channel,
        tx_power_w=scenario.d2d_power_w,
        threshold=scenario.threshold_linear,
        interference_field=interference,
        fading_samples=scenario.fading_samples,
        p_admit=scenario.p_admit,
        seed=graph_ss,
        max_link_range=scenario.max_link_range_m,
    )
    node_index = {n.id: k for k, n in enumerate(deployment.nodes)}
    return _TrialContext(
        deployment=deployment,
        node_xy=node_xy,
        gains=gains,
        graph=graph,
        node_index=node_index,
        real_ss=real_ss,
        probe_ss=probe_ss,
    )


def _run_strategy(ctx: _TrialContext, scenario: Scenario, urban_map: UrbanMap) -> TrialResult:
    model = scenario.channel
    zeta = scenario.threshold_linear
    real_rng = np.random.default_rng(ctx.real_ss)
    violations = 0
    if scenario.strategy == "BR":
        outcome, hops, length, actives, hop_probs = _run_broadcast(
            scenario, ctx.graph, ctx.deployment, ctx.gains, ctx.node_index, real_rng, zeta
        )
    else:
        route = _route_for_strategy(scenario, ctx.graph, ctx.deployment)
        if route is None:
            outcome, hops, length, actives, hop_probs = OUTCOME_ROUTE_FAILURE, 0, None, (), ()
        else:
            violations = route.boundary_violations
            hops = route.hop_count
            length = route.total_length
            actives = route.transmitters
            hop_probs = route.per_hop_success
            ok = _hops_survive(
                route, ctx.graph, ctx.gains, ctx.node_index, real_rng, zeta, scenario, model
            )
            outcome = OUTCOME_SUCCESS if ok else OUTCOME_LINK_OUTAGE

    probe_rng = np.random.default_rng(ctx.probe_ss)
    active_xy = np.array([ctx.node_xy[ctx.node_index[a]] for a in actives]).reshape(-1, 2)
    cc_out, cc_base = _cc_probe(
        ctx.deployment, scenario, urban_map, model, active_xy, probe_rng
    )
    return TrialResult(
        outcome=outcome,
        hops=hops,
        route_length_m=length,
        cc_outage=cc_out,
        cc_baseline=cc_base,
        band=scenario.band,
        strategy=scenario.strategy,
        boundary_violations=violations,
        per_hop_success=tuple(hop_probs),
    )


def run_trial(
    deployment: Deployment, scenario: Scenario, urban_map: UrbanMap | None = None
) -> TrialResult:
    """One Monte-Carlo draw: route the emergency pair, then probe the cellular victim.

    The interference field seen by relays is the expected (unit-fading) power
    from every in-band cellular transmitter, with per-link shadowing. Per-hop
    delivery redraws Rayleigh fading on the hop and on every interferer. The
    cellular probe shares its base fading draws between the with-D2D and
    no-D2D measurements, so adding a D2D transmitter can only raise the
    sampled outage.
    """
    urban_map = urban_map or build_scenario_map(scenario)
    ctx = _build_context(deployment, scenario, urban_map)
    return _run_strategy(ctx, scenario, urban_map)


def _hops_survive(
    route: Route,
    graph: ReachabilityGraph,
    gains: np.ndarray,
    node_index: dict[int, int],
    rng: np.random.Generator,
    zeta: float,
    scenario: Scenario,
    model: ChannelModel,
) -> bool:
    """Draw each hop's SINR (fresh fading on hop and interferers); all must clear."""
    if route.hop_count == 0:
        return True
    pairs = list(zip(route.hops[:-1], route.hops[1:]))
    loss_db = np.array([graph.edge_loss_db[(u, v)] for u, v in pairs])
    sig = scenario.d2d_power_w * 10.0 ** (-loss_db / 10.0)
    rx_cols = np.array([node_index[v] for _, v in pairs])
    n_src = gains.shape[0]
    h_sig = rng.exponential(1.0, len(pairs))
    h_int = rng.exponential(1.0, (len(pairs), n_src))
    interference = (h_int * gains[:, rx_cols].T).sum(axis=1)
    gamma = h_sig * sig / (model.noise_w + interference)
    return bool(np.all(gamma >= zeta))


def _run_broadcast(
    scenario: Scenario,
    graph: ReachabilityGraph,
    deployment: Deployment,
    gains: np.ndarray,
    node_index: dict[int, int],
    rng: np.random.Generator,
    zeta: float,
):
    """Flood over per-edge SINR realizations; classify against the admitted flood."""
    model = scenario.channel
    edges = sorted(
        (u, v) for u, nbrs in graph.adjacency.items() for v in nbrs
    )
    admitted_flood = route_br(graph, deployment.src_id, deployment.dst_id)
    realized = ReachabilityGraph(nodes=graph.nodes, adjacency={i: {} for i in graph.nodes})
    if edges:
        loss_db = np.array([graph.edge_loss_db[e] for e in edges])
        sig = scenario.d2d_power_w * 10.0 ** (-loss_db / 10.0)
        rx_cols = np.array([node_index[v] for _, v in edges])
        h_sig = rng.exponential(1.0, len(edges))
        h_int = rng.exponential(1.0, (len(edges), gains.shape[0]))
        interference = (h_int * gains[:, rx_cols].T).sum(axis=1)
        gamma = h_sig * sig / (model.noise_w + interference)
        for k in np.flatnonzero(gamma >= zeta):
            u, v = edges[k]
            realized.adjacency[u][v] = graph.adjacency[u][v]
    flood = route_br(realized, deployment.src_id, deployment.dst_id)
    if flood.reached:
        length = _bfs_path_length(realized, flood.path)
        hop_probs = tuple(
            graph.adjacency[u][v] for u, v in zip(flood.path[:-1], flood.path[1:])
        )
        return OUTCOME_SUCCESS, flood.hop_depth, length, flood.broadcasters, hop_probs
    outcome = OUTCOME_LINK_OUTAGE if admitted_flood.reached else OUTCOME_ROUTE_FAILURE
    return outcome, 0, None, flood.broadcasters, ()


def _bfs_path_length(graph: ReachabilityGraph, path: tuple[int, ...] | None) -> float:
    if not path or len(path) < 2:
        return 0.0
    return sum(
        graph.position(a).distance_to(graph.position(b)) for a, b in zip(path[:-1], path[1:])
    )


def _cc_probe(
    deployment: Deployment,
    scenario: Scenario,
    urban_map: UrbanMap,
    model: ChannelModel,
    active_xy: np.ndarray,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Probe the band-matched cellular victim with and without the D2D transmitters.

    DL band: serving BS -> probe UEs uniform in the central cell, interfered by
    the other sites. UL band: probe UEs uniform in the central cell -> serving
    BS, interfered by the other cells' scheduled uplink UEs. The active D2D
    transmitters are added one at a time (store-and-forward) and averaged.
    """
    k = scenario.probe_positions
    m = scenario.probe_fading
    zeta = scenario.threshold_linear
    bs_xy = np.array([(p.x, p.y) for p in deployment.bs])
    probes = _sample_in_cell(rng, bs_xy, 0, urban_map, scenario.isd_m, k)

    if scenario.band == "DL":
        sig = _gain_matrix(
            bs_xy[0:1], probes, scenario.bs_power_w, urban_map, model, rng, elevated=True
        )[0]
        if len(bs_xy) > 1:
            g_int = _gain_matrix(
                bs_xy[1:], probes, scenario.bs_power_w, urban_map, model, rng, elevated=True
            )
        else:
            g_int = np.zeros((0, k))
        victims = probes
        victim_elevated = False
    else:
        sig = _gain_matrix(
            probes, bs_xy[0:1], scenario.cc_ue_power_w, urban_map, model, rng, elevated=True
        )[:, 0]
        cc_xy = np.array([(p.x, p.y) for p in deployment.cc_ues])
        if len(cc_xy) > 1:
            g_int = np.repeat(
                _gain_matrix(cc_xy[1:], bs_xy[0:1], scenario.cc_ue_power_w,
                             urban_map, model, rng, elevated=True),
                k, axis=1,
            )
        else:
            g_int = np.zeros((0, k))
        victims = np.tile(bs_xy[0:1], (k, 1))
        victim_elevated = True

    h_sig = rng.exponential(1.0, (k, m))
    h_int = rng.exponential(1.0, (g_int.shape[0], k, m))
    base_interf = (h_int * g_int[:, :, None]).sum(axis=0) if g_int.shape[0] else np.zeros((k, m))
    gamma_base = h_sig * sig[:, None] / (model.noise_w + base_interf)
    baseline = float(np.mean(gamma_base < zeta))

    if len(active_xy) == 0:
        return baseline, baseline

    # Gain from each active D2D transmitter (one at a time) to each victim point.
    a = len(active_xy)
    g_act = _gain_matrix(
        active_xy, victims[0:1] if victim_elevated else victims,
        scenario.d2d_power_w, urban_map, model, rng, elevated=victim_elevated,
    )
    if victim_elevated:
        g_act = np.repeat(g_act, k, axis=1)
    h_act = rng.exponential(1.0, (a, k, m))
    denom = model.noise_w + base_interf[None, :, :] + h_act * g_act[:, :, None]
    gamma = h_sig[None, :, :] * sig[None, :, None] / denom
    with_d2d = float(np.mean(gamma < zeta))
    return with_d2d, baseline


def cc_baseline(
    deployment: Deployment,
    scenario: Scenario,
    trials: int,
    *,
    urban_map: UrbanMap | None = None,
    probe: Point | None = None,
    seed: int = 0,
) -> float:
    """Cellular probe outage with no D2D active, averaged over `trials` draws.

    With `probe` given, the victim position is pinned (useful for oracle
    checks); otherwise probe positions are uniform in the serving cell.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    urban_map = urban_map or build_scenario_map(scenario)
    model = scenario.channel
    rng = np.random.default_rng(seed)
    zeta = scenario.threshold_linear
    bs_xy = np.array([(p.x, p.y) for p in deployment.bs])
    if probe is not None:
        positions = np.array([[probe.x, probe.y]])
    else:
        n_pos = min(128, trials)
        positions = _sample_in_cell(rng, bs_xy, 0, urban_map, scenario.isd_m, n_pos)
    k = len(positions)
    m = max(1, math.ceil(trials / k))

    if scenario.band == "DL":
        sig = _gain_matrix(
            bs_xy[0:1], positions, scenario.bs_power_w, urban_map, model, rng, elevated=True
        )[0]
        g_int = (
            _gain_matrix(
                bs_xy[1:], positions, scenario.bs_power_w, urban_map, model, rng, elevated=True
            )
            if len(bs_xy) > 1
            else np.zeros((0, k))
        )
    else:
        sig = _gain_matrix(
            positions, bs_xy[0:1], scenario.cc_ue_power_w, urban_map, model, rng, elevated=True
        )[:, 0]
        cc_xy = np.array([(p.x, p.y) for p in deployment.cc_ues])
        g_int = (
            np.repeat(
                _gain_matrix(cc_xy[1:], bs_xy[0:1], scenario.cc_ue_power_w,
                             urban_map, model, rng, elevated=True),
                k, axis=1,
            )
            if len(cc_xy) > 1
            else np.zeros((0, k))
        )
    h_sig = rng.exponential(1.0, (k, m))
    h_int = rng.exponential(1.0, (g_int.shape[0], k, m))
    interf = (h_int * g_int[:, :, None]).sum(axis=0) if g_int.shape[0] else np.zeros((k, m))
    gamma = h_sig * sig[:, None] / (model.noise_w + interf)
    return float(np.mean(gamma < zeta))


# --------------------------------------------------------------------------
# Trial batches, aggregation, sweeps
# --------------------------------------------------------------------------

_WORKER: dict = {}


def _worker_init(scenario: Scenario, strategies: tuple[str, ...]):
    _WORKER["scenario"] = scenario
    _WORKER["strategies"] = strategies
    _WORKER["map"] = build_scenario_map(scenario)


def _worker_trial(trial_index: int) -> tuple[int, tuple[TrialResult, ...]]:
    scenario = _WORKER["scenario"]
    urban_map = _WORKER["map"]
    dep = deploy(scenario, trial_index, urban_map)
    ctx = _build_context(dep, scenario, urban_map)
    return trial_index, tuple(
        _run_strategy(ctx, replace(scenario, strategy=strat), urban_map)
        for strat in _WORKER["strategies"]
    )


def simulate_strategies(
    scenario: Scenario, strategies: Sequence[str], workers: int = 1
) -> dict[str, list[TrialResult]]:
    """Evaluate several strategies on identical per-trial deployments/graphs.

    Each strategy's result list is identical to what a standalone
    `simulate(replace(scenario, strategy=s))` produces, because the
    realization and probe streams are re-seeded per strategy from the same
    trial children; the shared context just avoids rebuilding it.
    """
    strategies = tuple(strategies)
    out: dict[str, list[TrialResult]] = {strat: [] for strat in strategies}
    if workers <= 1:
        urban_map = build_scenario_map(scenario)
        for i in range(scenario.trials):
            dep = deploy(scenario, i, urban_map)
            ctx = _build_context(dep, scenario, urban_map)
            for strat in strategies:
                out[strat].append(_run_strategy(ctx, replace(scenario, strategy=strat), urban_map))
        return out
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_worker_init, initargs=(scenario, strategies)
    ) as pool:
        chunk = max(1, scenario.trials // (workers * 8))
        tagged = list(pool.map(_worker_trial, range(scenario.trials), chunksize=chunk))
    tagged.sort(key=lambda t: t[0])
    for _, results in tagged:
        for strat, r in zip(strategies, results):
            out[strat].append(r)
    return out


def simulate(scenario: Scenario, workers: int = 1) -> list[TrialResult]:
    """Run scenario.trials seeded trials; identical output for any worker count."""
    return simulate_strategies(scenario, (scenario.strategy,), workers)[scenario.strategy]


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def aggregate(results: Sequence[TrialResult], axis_value: float) -> SweepRow:
    """Collapse one (axis point, strategy, band) batch of trials to a sweep row."""
    n = len(results)
    successes = sum(1 for r in results if r.outcome == OUTCOME_SUCCESS)
    lo, hi = wilson_interval(successes, n)
    routed = [r for r in results if r.outcome != OUTCOME_ROUTE_FAILURE]
    mean_hops = sum(r.hops for r in routed) / len(routed) if routed else math.nan
    lengths = [r.route_length_m for r in routed if r.route_length_m is not None]
    mean_len = sum(lengths) / len(lengths) if lengths else math.nan
    return SweepRow(
        axis_value=axis_value,
        strategy=results[0].strategy if results else "",
        band=results[0].band if results else "",
        trials=n,
        d2d_success=successes / n if n else math.nan,
        ci_low=lo,
        ci_high=hi,
        mean_hops=mean_hops,
        mean_route_len_m=mean_len,
        cc_outage=sum(r.cc_outage for r in results) / n if n else math.nan,
        cc_baseline=sum(r.cc_baseline for r in results) / n if n else math.nan,
    )


def apply_axis(scenario: Scenario, axis: str, value: float) -> Scenario:
    if axis == "ue_density":
        return replace(scenario, d2d_density_km2=value)
    if axis == "wall_loss":
        return replace(scenario, wall_loss_db=value)
    if axis == "pair_distance":
        return replace(scenario, pair_distance=value)
    raise ValueError(f"axis {axis!r} does not map onto a scenario field")


def sweep(spec: SweepSpec, template: Scenario, workers: int = 1) -> list[SweepRow]:
    """Run the grid x strategy matrix and emit rows sorted by (axis, strategy, band).

    The cc_constraint axis is special: the strategy/band matrix is evaluated
    once at the template's operating point, then the constraint grid drives
    the selector; a row with strategy 'none' means no D2D is permitted there.
    """
    rows: list[SweepRow] = []
    if spec.axis == "cc_constraint":
        cells: list[SweepRow] = []
        for band in BANDS:
            sc = replace(template, band=band, trials=spec.trials_per_point)
            by_strategy = simulate_strategies(sc, spec.strategies, workers=workers)
            for strategy in spec.strategies:
                cells.append(aggregate(by_strategy[strategy], axis_value=math.nan))
        points = [
            OperatingPoint(
                strategy=c.strategy,
                band=c.band,
                d2d_outage=1.0 - c.d2d_success,
                cc_outage=c.cc_outage,
            )
            for c in cells
        ]
        by_key = {(c.strategy, c.band): c for c in cells}
        for constraint in spec.grid:
            choice = select_strategy(constraint, points)
            if choice.chosen is None:
                rows.append(SweepRow(
                    axis_value=constraint, strategy="none", band="none",
                    trials=spec.trials_per_point, d2d_success=math.nan,
                    ci_low=math.nan, ci_high=math.nan, mean_hops=math.nan,
                    mean_route_len_m=math.nan, cc_outage=math.nan,
                    cc_baseline=cells[0].cc_baseline if cells else math.nan,
                ))
            else:
                cell = by_key[(choice.chosen.strategy, choice.chosen.band)]
                rows.append(replace(cell, axis_value=constraint))
    else:
        for value in spec.grid:
            sc = replace(apply_axis(template, spec.axis, value), trials=spec.trials_per_point)
            by_strategy = simulate_strategies(sc, spec.strategies, workers=workers)
            for strategy in spec.strategies:
                rows.append(aggregate(by_strategy[strategy], axis_value=value))
    rows.sort(key=lambda r: (r.axis_value, r.strategy, r.band))
    return rows


def select_strategy(
    constraint: float, evaluated: Sequence[OperatingPoint]
) -> StrategyChoice:
    """Keep options whose cellular outage respects the constraint; pick the
    lowest D2D outage among them (ties broken by strategy then band name)."""
    if not evaluated:
        raise ValueError("evaluated operating points must be non-empty")
    admissible = tuple(p for p in evaluated if p.cc_outage <= constraint)
    chosen = None
    if admissible:
        chosen = min(admissible, key=lambda p: (p.d2d_outage, p.strategy, p.band))
    return StrategyChoice(constraint=constraint, admissible=admissible, chosen=chosen)
