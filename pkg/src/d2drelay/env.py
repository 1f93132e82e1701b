"""Synthetic urban maps: generation, loading, and geometric link queries.

Maps are 2-D plan views: building footprints are simple polygons inside a
rectangular bound, and every radio question the rest of the package asks
(line of sight, wall penetration count, outdoor placement) reduces to
segment/polygon geometry here.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

# Tolerance for boundary classification (meters). Coordinates are meters, so
# a nanometer band is far below any physical feature while absorbing float noise.
_EDGE_EPS = 1e-9

try:
    from numba import njit as _njit

    @_njit(cache=True)
    def _rect_counts_jit(a, b, rects, out):  # pragma: no cover - thin kernel
        for k in range(a.shape[0]):
            ax, ay = a[k, 0], a[k, 1]
            bx, by = b[k, 0], b[k, 1]
            lox = ax if ax < bx else bx
            hix = ax if ax > bx else bx
            loy = ay if ay < by else by
            hiy = ay if ay > by else by
            dx = bx - ax
            dy = by - ay
            if -1e-9 < dx < 1e-9:
                dx = 1e-9
            if -1e-9 < dy < 1e-9:
                dy = 1e-9
            for m in range(rects.shape[0]):
                if hix < rects[m, 0] or lox > rects[m, 2]:
                    continue
                if hiy < rects[m, 1] or loy > rects[m, 3]:
                    continue
                tx1 = (rects[m, 0] - ax) / dx
                tx2 = (rects[m, 2] - ax) / dx
                if tx1 > tx2:
                    tx1, tx2 = tx2, tx1
                ty1 = (rects[m, 1] - ay) / dy
                ty2 = (rects[m, 3] - ay) / dy
                if ty1 > ty2:
                    ty1, ty2 = ty2, ty1
                t_lo = tx1 if tx1 > ty1 else ty1
                t_hi = tx2 if tx2 < ty2 else ty2
                if t_lo < t_hi:
                    c = 0
                    if 0.0 < t_lo < 1.0:
                        c += 1
                    if 0.0 < t_hi < 1.0:
                        c += 1
                    out[k, m] = c

    @_njit(cache=True)
    def _rect_wall_stats_jit(a, b, rects, losses, counts, loss_db):  # pragma: no cover
        # Same slab arithmetic as _rect_counts_jit, accumulated per segment.
        for k in range(a.shape[0]):
            ax, ay = a[k, 0], a[k, 1]
            bx, by = b[k, 0], b[k, 1]
            lox = ax if ax < bx else bx
            hix = ax if ax > bx else bx
            loy = ay if ay < by else by
            hiy = ay if ay > by else by
            dx = bx - ax
            dy = by - ay
            if -1e-9 < dx < 1e-9:
                dx = 1e-9
            if -1e-9 < dy < 1e-9:
                dy = 1e-9
            total = 0
            total_db = 0.0
            for m in range(rects.shape[0]):
                if hix < rects[m, 0] or lox > rects[m, 2]:
                    continue
                if hiy < rects[m, 1] or loy > rects[m, 3]:
                    continue
                tx1 = (rects[m, 0] - ax) / dx
                tx2 = (rects[m, 2] - ax) / dx
                if tx1 > tx2:
                    tx1, tx2 = tx2, tx1
                ty1 = (rects[m, 1] - ay) / dy
                ty2 = (rects[m, 3] - ay) / dy
                if ty1 > ty2:
                    ty1, ty2 = ty2, ty1
                t_lo = tx1 if tx1 > ty1 else ty1
                t_hi = tx2 if tx2 < ty2 else ty2
                if t_lo < t_hi:
                    c = 0
                    if 0.0 < t_lo < 1.0:
                        c += 1
                    if 0.0 < t_hi < 1.0:
                        c += 1
                    total += c
                    total_db += c * losses[m]
            counts[k] = total
            loss_db[k] = total_db

except ImportError:  # pragma: no cover
    _rect_counts_jit = None
    _rect_wall_stats_jit = None


class MapError(ValueError):
    """Raised for infeasible generator specs and malformed/invalid map files."""


class SamplingError(RuntimeError):
    """Raised when outdoor rejection sampling exhausts its attempt budget."""


@dataclass(frozen=True)
class Point:
    """A planar position in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def _polygon_area(vertices: Sequence[tuple[float, float]]) -> float:
    """Signed shoelace area."""
    a = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        a += x1 * y2 - x2 * y1
    return 0.5 * a


def _polygon_is_simple(vertices: Sequence[tuple[float, float]]) -> bool:
    """Check no two non-adjacent edges intersect (O(n^2), footprints are small)."""
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            a1, a2 = edges[i]
            b1, b2 = edges[j]
            t_u = _segment_intersection_params(a1, a2, b1, b2)
            if t_u is None:
                continue
            t, u = t_u
            if adjacent:
                # Shared vertex contact is fine; anything deeper is not.
                interior_t = 1e-12 < t < 1 - 1e-12
                interior_u = 1e-12 < u < 1 - 1e-12
                if interior_t and interior_u:
                    return False
            else:
                if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
                    return False
    return True


def _segment_intersection_params(a1, a2, b1, b2):
    """Parameters (t, u) where a1+t*(a2-a1) == b1+u*(b2-b1), or None if parallel."""
    d1x, d1y = a2[0] - a1[0], a2[1] - a1[1]
    d2x, d2y = b2[0] - b1[0], b2[1] - b1[1]
    den = d1x * d2y - d1y * d2x
    if den == 0.0:
        return None
    wx, wy = b1[0] - a1[0], b1[1] - a1[1]
    t = (wx * d2y - wy * d2x) / den
    u = (wx * d1y - wy * d1x) / den
    return t, u


@dataclass(frozen=True)
class Building:
    """A building footprint: a simple polygon with an optional wall-loss override."""

    footprint: tuple[tuple[float, float], ...]
    height: float = 15.0
    wall_loss_override: float | None = None

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.footprint)
        object.__setattr__(self, "footprint", verts)
        if len(verts) < 3:
            raise MapError(f"footprint needs >=3 vertices, got {len(verts)}")
        if abs(_polygon_area(verts)) <= 0.0:
            raise MapError("footprint has zero area")
        if not _polygon_is_simple(verts):
            raise MapError("footprint polygon self-intersects")

    @property
    def area(self) -> float:
        return abs(_polygon_area(self.footprint))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [v[0] for v in self.footprint]
        ys = [v[1] for v in self.footprint]
        return (min(xs), min(ys), max(xs), max(ys))

    @property
    def is_axis_rect(self) -> bool:
        """True for an axis-aligned rectangle (enables the vectorized slab test)."""
        if len(self.footprint) != 4:
            return False
        xs = sorted({v[0] for v in self.footprint})
        ys = sorted({v[1] for v in self.footprint})
        if len(xs) != 2 or len(ys) != 2:
            return False
        corners = {(x, y) for x in xs for y in ys}
        return set(self.footprint) == corners

    def contains(self, p: Point) -> bool:
        """Closed-footprint membership: boundary points count as inside."""
        if _point_on_polygon_boundary((p.x, p.y), self.footprint):
            return True
        return _point_in_polygon_open((p.x, p.y), self.footprint)


def _point_in_polygon_open(pt, vertices) -> bool:
    """Even-odd interior test; boundary points are NOT considered inside here."""
    x, y = pt
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xin:
                inside = not inside
    return inside


def _point_on_polygon_boundary(pt, vertices, eps: float = _EDGE_EPS) -> bool:
    x, y = pt
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            continue
        t = ((x - x1) * dx + (y - y1) * dy) / seg2
        t = min(1.0, max(0.0, t))
        px, py = x1 + t * dx, y1 + t * dy
        if math.hypot(x - px, y - py) <= eps:
            return True
    return False


@dataclass(frozen=True)
class UrbanMap:
    """Immutable urban scene: rectangular bounds, buildings, and wall-loss default."""

    width: float
    height: float
    buildings: tuple[Building, ...]
    default_wall_loss: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        if self.width <= 0 or self.height <= 0:
            raise MapError(f"bounds must be positive, got {self.width} x {self.height}")
        if not (0.0 <= self.default_wall_loss <= 60.0):
            raise MapError(f"default_wall_loss {self.default_wall_loss} outside [0, 60] dB")
        for k, b in enumerate(self.buildings):
            x0, y0, x1, y1 = b.bbox
            if x0 < -_EDGE_EPS or y0 < -_EDGE_EPS or x1 > self.width + _EDGE_EPS or y1 > self.height + _EDGE_EPS:
                raise MapError(f"buildings[{k}] extends outside bounds")
        object.__setattr__(self, "_cache", {})

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def building_area(self) -> float:
        return sum(b.area for b in self.buildings)

    def wall_loss_of(self, building: Building) -> float:
        if building.wall_loss_override is not None:
            return building.wall_loss_override
        return self.default_wall_loss

    def with_wall_loss(self, loss_db: float) -> "UrbanMap":
        """Same geometry with a different default wall loss (overrides kept)."""
        return replace(self, default_wall_loss=loss_db)

    # --- cached numpy views used by the bulk queries -----------------------

    def _arrays(self) -> dict:
        cache = self.__dict__.get("_cache")
        if "arrays" not in cache:
            losses = np.array([self.wall_loss_of(b) for b in self.buildings], dtype=float)
            all_rect = all(b.is_axis_rect for b in self.buildings)
            rects = None
            if all_rect and self.buildings:
                rects = np.array([b.bbox for b in self.buildings], dtype=float)
            edges = []
            edge_owner = []
            for bi, b in enumerate(self.buildings):
                n = len(b.footprint)
                for i in range(n):
                    x1, y1 = b.footprint[i]
                    x2, y2 = b.footprint[(i + 1) % n]
                    edges.append((x1, y1, x2, y2))
                    edge_owner.append(bi)
            cache["arrays"] = {
                "losses": losses,
                "all_rect": all_rect,
                "rects": rects,
                "edges": np.array(edges, dtype=float) if edges else np.zeros((0, 4)),
                "edge_owner": np.array(edge_owner, dtype=int),
            }
        return cache["arrays"]


@dataclass(frozen=True)
class ManhattanSpec:
    """Grid-city generator parameters: square-ish blocks cut by orthogonal streets."""

    width: float = 920.0
    height: float = 550.0
    block_size: float = 80.0
    street_width: float = 20.0
    building_fill_ratio: float = 1.0
    jitter: float = 0.0

    def __post_init__(self):
        if self.street_width >= self.block_size:
            raise MapError(
                f"street_width {self.street_width} must be smaller than block_size {self.block_size}"
            )
        if not (0.0 < self.building_fill_ratio <= 1.0):
            raise MapError(f"building_fill_ratio {self.building_fill_ratio} outside (0, 1]")
        if self.jitter < 0:
            raise MapError("jitter must be >= 0")


def generate_manhattan_map(
    spec: ManhattanSpec,
    seed: int,
    *,
    default_wall_loss: float = 10.0,
    ensure_building: bool = True,
) -> UrbanMap:
    """Deterministically tile rectangular blocks separated by orthogonal streets.

    Blocks sit on a pitch of block_size + street_width, centered in the bounds,
    with at least half a street on every side so the street network stays
    connected. `building_fill_ratio` keeps a random subset of blocks; `jitter`
    shrinks each kept block's faces by up to `jitter` meters for shape variety
    (never expands, so streets cannot close).
    """
    rng = np.random.default_rng(seed)
    pitch = spec.block_size + spec.street_width
    nx = int(spec.width // pitch)
    ny = int(spec.height // pitch)
    buildings: list[Building] = []
    if nx >= 1 and ny >= 1:
        off_x = (spec.width - (nx * pitch - spec.street_width)) / 2.0
        off_y = (spec.height - (ny * pitch - spec.street_width)) / 2.0
        cells = [(i, j) for j in range(ny) for i in range(nx)]
        keep = rng.random(len(cells)) < spec.building_fill_ratio
        if ensure_building and not keep.any():
            keep[rng.integers(len(cells))] = True
        for (i, j), kept in zip(cells, keep):
            if not kept:
                continue
            x0 = off_x + i * pitch
            y0 = off_y + j * pitch
            x1 = x0 + spec.block_size
            y1 = y0 + spec.block_size
            if spec.jitter > 0:
                max_inset = min(spec.jitter, spec.block_size / 2.0 - 2.0)
                if max_inset > 0:
                    dx0, dx1, dy0, dy1 = rng.uniform(0.0, max_inset, size=4)
                    x0, x1 = x0 + dx0, x1 - dx1
                    y0, y1 = y0 + dy0, y1 - dy1
            buildings.append(
                Building(footprint=((x0, y0), (x1, y0), (x1, y1), (x0, y1)))
            )
    return UrbanMap(
        width=spec.width,
        height=spec.height,
        buildings=tuple(buildings),
        default_wall_loss=default_wall_loss,
    )


# --------------------------------------------------------------------------
# Map file format (JSON): bounds {width_m, height_m}, default_wall_loss_db,
# buildings [{vertices: [[x, y], ...], height_m?, wall_loss_db?}]. Meters,
# origin at the lower-left corner.
# --------------------------------------------------------------------------

def serialize_map(urban_map: UrbanMap) -> str:
    doc = {
        "bounds": {"width_m": urban_map.width, "height_m": urban_map.height},
        "default_wall_loss_db": urban_map.default_wall_loss,
        "buildings": [],
    }
    for b in urban_map.buildings:
        entry: dict = {"vertices": [[x, y] for x, y in b.footprint], "height_m": b.height}
        if b.wall_loss_override is not None:
            entry["wall_loss_db"] = b.wall_loss_override
        doc["buildings"].append(entry)
    return json.dumps(doc, indent=2)


def load_map(text: str) -> UrbanMap:
    """Parse and validate a map file; errors name the offending field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapError(f"map file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MapError("map file root must be an object")
    try:
        bounds = doc["bounds"]
        width = float(bounds["width_m"])
        height = float(bounds["height_m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MapError(f"bounds: missing or malformed ({exc})") from exc
    default_loss = doc.get("default_wall_loss_db", 10.0)
    try:
        default_loss = float(default_loss)
    except (TypeError, ValueError) as exc:
        raise MapError(f"default_wall_loss_db: not a number ({exc})") from exc

    buildings = []
    for k, entry in enumerate(doc.get("buildings", [])):
        where = f"buildings[{k}]"
        if not isinstance(entry, dict) or "vertices" not in entry:
            raise MapError(f"{where}: expected an object with 'vertices'")
        try:
            verts = tuple((float(x), float(y)) for x, y in entry["vertices"])
        except (TypeError, ValueError) as exc:
            raise MapError(f"{where}.vertices: malformed ({exc})") from exc
        override = entry.get("wall_loss_db")
        try:
            building = Building(
                footprint=verts,
                height=float(entry.get("height_m", 15.0)),
                wall_loss_override=None if override is None else float(override),
            )
        except MapError as exc:
            raise MapError(f"{where}: {exc}") from exc
        buildings.append(building)
    try:
        return UrbanMap(width=width, height=height, buildings=tuple(buildings),
                        default_wall_loss=default_loss)
    except MapError as exc:
        raise MapError(str(exc)) from exc


# --------------------------------------------------------------------------
# Geometric queries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WallCrossings:
    """Outer-wall transitions of one segment: count and per-crossing losses."""

    count: int
    losses_db: tuple[float, ...]

    @property
    def total_db(self) -> float:
        return sum(self.losses_db)


def _crossing_count_careful(a: Point, b: Point, building: Building) -> int:
    """Transition count of the open segment a-b across one footprint's walls.

    Splits the segment at every wall-line hit and classifies each piece by
    sampling its midpoint against the open interior; the crossing count is the
    number of inside/outside flips. Tangencies and vertex grazes produce no
    flip, so they count zero by construction.
    """
    pa, pb = a.as_tuple(), b.as_tuple()
    # Quick reject on bounding boxes.
    x0, y0, x1, y1 = building.bbox
    if max(pa[0], pb[0]) < x0 - _EDGE_EPS or min(pa[0], pb[0]) > x1 + _EDGE_EPS:
        return 0
    if max(pa[1], pb[1]) < y0 - _EDGE_EPS or min(pa[1], pb[1]) > y1 + _EDGE_EPS:
        return 0
    ts = {0.0, 1.0}
    n = len(building.footprint)
    for i in range(n):
        e1 = building.footprint[i]
        e2 = building.footprint[(i + 1) % n]
        t_u = _segment_intersection_params(pa, pb, e1, e2)
        if t_u is None:
            continue
        t, u = t_u
        if -1e-12 <= u <= 1 + 1e-12 and 1e-12 < t < 1 - 1e-12:
            ts.add(min(1.0, max(0.0, t)))
    cuts = sorted(ts)
    states = []
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        tm = 0.5 * (t0 + t1)
        mid = (pa[0] + tm * (pb[0] - pa[0]), pa[1] + tm * (pb[1] - pa[1]))
        # Strict interior: a piece grazing along a wall is not "inside", so
        # tangencies produce no flip.
        inside = _point_in_polygon_open(mid, building.footprint) and not (
            _point_on_polygon_boundary(mid, building.footprint)
        )
        states.append(inside)
    flips = sum(1 for s0, s1 in zip(states[:-1], states[1:]) if s0 != s1)
    return flips


def wall_crossings(a: Point, b: Point, urban_map: UrbanMap) -> WallCrossings:
    """Count outer-wall transitions of segment a-b and list each crossing's loss.

    Symmetric in (a, b). A segment passing fully through a building reports two
    crossings (one entry wall, one exit wall), each charged that building's
    wall loss. Endpoints outside the map bounds are allowed; no buildings exist
    out there, so they simply see open terrain.
    """
    losses: list[float] = []
    total = 0
    for building in urban_map.buildings:
        c = _crossing_count_careful(a, b, building)
        if c:
            total += c
            losses.extend([urban_map.wall_loss_of(building)] * c)
    return WallCrossings(count=total, losses_db=tuple(losses))


def is_outdoor(p: Point, urban_map: UrbanMap) -> bool:
    """True iff p lies in no building's closed footprint (walls count as indoor)."""
    return not any(b.contains(p) for b in urban_map.buildings)


def is_outdoor_bulk(points: np.ndarray, urban_map: UrbanMap) -> np.ndarray:
    """Vectorized outdoor test for an (N, 2) array of points.

    Boundary handling may differ from the scalar `is_outdoor` on exact wall
    hits, which are measure-zero for sampled coordinates; the scalar query
    remains the tie-breaking authority there.
    """
    pts = np.asarray(points, dtype=float)
    out = np.ones(len(pts), dtype=bool)
    arrays = urban_map._arrays()
    if arrays["all_rect"] and arrays["rects"] is not None:
        r = arrays["rects"]  # (M, 4): x0, y0, x1, y1
        inside = (
            (pts[:, 0:1] >= r[:, 0]) & (pts[:, 0:1] <= r[:, 2])
            & (pts[:, 1:2] >= r[:, 1]) & (pts[:, 1:2] <= r[:, 3])
        )
        return ~inside.any(axis=1)
    for b in urban_map.buildings:
        vx = np.array([v[0] for v in b.footprint])
        vy = np.array([v[1] for v in b.footprint])
        vx2 = np.roll(vx, -1)
        vy2 = np.roll(vy, -1)
        x = pts[:, 0:1]
        y = pts[:, 1:2]
        cond = (vy > y) != (vy2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xin = vx + (y - vy) * (vx2 - vx) / (vy2 - vy)
        crossing = cond & (x < xin)
        inside = crossing.sum(axis=1) % 2 == 1
        out &= ~inside
    return out


def segment_wall_stats(
    a_points: np.ndarray, b_points: np.ndarray, urban_map: UrbanMap
) -> tuple[np.ndarray, np.ndarray]:
    """Wall-crossing counts and total penetration loss for K segments at once.

    Fast path for all-rectangle maps uses the slab test; general polygons fall
    back to per-building proper-edge-crossing counts. Both assume general
    position (random continuous endpoints), where the proper-crossing count
    equals the transition count of the careful scalar `wall_crossings`.

    Returns (counts (K,), loss_db (K,)).
    """
    a = np.asarray(a_points, dtype=float)
    b = np.asarray(b_points, dtype=float)
    k = len(a)
    counts = np.zeros(k, dtype=np.int64)
    loss = np.zeros(k, dtype=float)
    if not urban_map.buildings or k == 0:
        return counts, loss
    arrays = urban_map._arrays()
    losses = arrays["losses"]
    if arrays["all_rect"] and _rect_wall_stats_jit is not None:
        _rect_wall_stats_jit(
            np.ascontiguousarray(a), np.ascontiguousarray(b),
            arrays["rects"], losses, counts, loss,
        )
        return counts, loss
    if arrays["all_rect"]:
        per_building = _rect_crossing_counts(a, b, arrays["rects"])  # (K, M)
    else:
        per_building = _edge_crossing_counts(a, b, arrays["edges"], arrays["edge_owner"],
                                             len(urban_map.buildings))
    counts = per_building.sum(axis=1)
    loss = per_building @ losses
    return counts, loss


def _rect_crossing_counts(a: np.ndarray, b: np.ndarray, rects: np.ndarray) -> np.ndarray:
    """Slab-method crossing counts for K segments vs M axis-aligned rectangles.

    Dispatches to a compiled kernel when numba is available; the vectorized
    numpy path below computes the identical arithmetic otherwise.
    """
    if _rect_counts_jit is not None:
        out = np.zeros((len(a), len(rects)), dtype=np.int64)
        if len(a) and len(rects):
            _rect_counts_jit(
                np.ascontiguousarray(a, dtype=np.float64),
                np.ascontiguousarray(b, dtype=np.float64),
                np.ascontiguousarray(rects, dtype=np.float64),
                out,
            )
        return out
    return _rect_crossing_counts_numpy(a, b, rects)


def _rect_crossing_counts_numpy(a: np.ndarray, b: np.ndarray, rects: np.ndarray) -> np.ndarray:
    """Pure-numpy slab test: bbox prefilter, then flat slab arithmetic."""
    k, m = len(a), len(rects)
    out = np.zeros((k, m), dtype=np.int64)
    lox = np.minimum(a[:, 0], b[:, 0])[:, None]
    hix = np.maximum(a[:, 0], b[:, 0])[:, None]
    loy = np.minimum(a[:, 1], b[:, 1])[:, None]
    hiy = np.maximum(a[:, 1], b[:, 1])[:, None]
    overlap = (
        (hix >= rects[:, 0]) & (lox <= rects[:, 2])
        & (hiy >= rects[:, 1]) & (loy <= rects[:, 3])
    )
    ki, mi = np.nonzero(overlap)
    if len(ki) == 0:
        return out
    ax, ay = a[ki, 0], a[ki, 1]
    dx = b[ki, 0] - ax
    dy = b[ki, 1] - ay
    # Sub-micrometer direction components behave like zero; clamping keeps the
    # slab intervals signed correctly without special-casing infinities.
    dx = np.where(np.abs(dx) < 1e-9, 1e-9, dx)
    dy = np.where(np.abs(dy) < 1e-9, 1e-9, dy)
    r = rects[mi]
    tx1 = (r[:, 0] - ax) / dx
    tx2 = (r[:, 2] - ax) / dx
    ty1 = (r[:, 1] - ay) / dy
    ty2 = (r[:, 3] - ay) / dy
    t_lo = np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2))
    t_hi = np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2))
    hit = t_lo < t_hi
    counts = (hit & (t_lo > 0.0) & (t_lo < 1.0)).astype(np.int64)
    counts += hit & (t_hi > 0.0) & (t_hi < 1.0)
    out[ki, mi] = counts
    return out


def _edge_crossing_counts(
    a: np.ndarray, b: np.ndarray, edges: np.ndarray, owner: np.ndarray, n_buildings: int
) -> np.ndarray:
    """Proper segment-edge crossing counts per (segment, building)."""
    k = len(a)
    out = np.zeros((k, n_buildings), dtype=np.int64)
    if len(edges) == 0:
        return out
    d = b - a  # (K, 2)
    e1 = edges[:, 0:2]  # (E, 2)
    e2 = edges[:, 2:4]
    de = e2 - e1  # (E, 2)
    # den[k, e] = d_k x de_e
    den = d[:, 0:1] * de[:, 1] - d[:, 1:2] * de[:, 0]
    w = e1[None, :, :] - a[:, None, :]  # (K, E, 2)
    num_t = w[:, :, 0] * de[:, 1] - w[:, :, 1] * de[:, 0]
    num_u = w[:, :, 0] * d[:, 1:2] - w[:, :, 1] * d[:, 0:1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num_t / den
        u = num_u / den
    proper = (den != 0.0) & (t > 0.0) & (t < 1.0) & (u >= 0.0) & (u < 1.0)
    # Half-open u range keeps shared vertices from double-counting.
    np.add.at(out.T, owner, proper.T.astype(np.int64))
    return out


def sample_outdoor_points(
    urban_map: UrbanMap, count: int, seed: int, *, max_rounds: int = 200
) -> list[Point]:
    """Draw `count` i.i.d. uniform outdoor points; deterministic per (map, count, seed)."""
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    accepted: list[Point] = []
    batch = max(count * 2, 64)
    for _ in range(max_rounds):
        xs = rng.uniform(0.0, urban_map.width, batch)
        ys = rng.uniform(0.0, urban_map.height, batch)
        pts = np.column_stack([xs, ys])
        ok = is_outdoor_bulk(pts, urban_map)
        for x, y in pts[ok]:
            accepted.append(Point(float(x), float(y)))
            if len(accepted) == count:
                return accepted
    raise SamplingError(
        f"could not draw {count} outdoor points in {max_rounds} rounds; "
        f"outdoor fraction may be ~0"
    )
