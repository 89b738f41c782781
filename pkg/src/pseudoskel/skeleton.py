"""Medial and vacant axis fields, normal sets, ray reach and diagnostics.

The medial axis is the set of query points with more than one closest
cluster; the vacant axis collects queries whose infimum escapes.  On top of
the field extraction this module hosts the normal-set machinery N(a)/N'(a),
the ray-reach construction of the central set, the sandwich comparison
M subset C subset closure(M), the separation margin between the medial axis
and smooth sets, and the hypersurface diagnostics (singularity witnesses and
the local homeomorphism check along transversal sections).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .distance import (
    DEFAULT_OPTS,
    DistanceResult,
    PreparedScene,
    QueryOpts,
    Status,
    prepare,
    query_batch,
)
from .errors import (
    AnchorNotOnSetError,
    DirectionNotInNormalConeError,
    OnMedialAxisError,
    SectionHitsMedialAxisError,
    TransversalityError,
    ValidationError,
    VacantPointError,
)
from .sets import Curve, Graph, PointList, curve_derivative, graph_jacobian
from .space import Signature


@dataclass(frozen=True)
class GridSpec:
    """A rectilinear evaluation grid: per-axis bounds and point counts."""

    bounds: tuple   # ((lo, hi), ...) per axis
    counts: tuple   # >= 2 points per axis

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        counts = tuple(int(c) for c in self.counts)
        if len(bounds) != len(counts):
            raise ValidationError("grid bounds and counts lengths differ")
        for (a, b) in bounds:
            if not np.isfinite([a, b]).all() or not a < b:
                raise ValidationError(f"grid bounds [{a}, {b}] are not finite with lo < hi")
        for c in counts:
            if c < 2:
                raise ValidationError("grids need at least 2 points per axis")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "counts", counts)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> tuple:
        return tuple((b - a) / (c - 1) for (a, b), c in zip(self.bounds, self.counts))

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    @property
    def size(self) -> int:
        out = 1
        for c in self.counts:
            out *= c
        return out

    def axes(self) -> list:
        return [np.linspace(a, b, c) for (a, b), c in zip(self.bounds, self.counts)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def _field_opts(grid: GridSpec, opts: Optional[QueryOpts]) -> QueryOpts:
    # fields default to the grid-adaptive tie band; point queries do not
    if opts is None:
        return replace(DEFAULT_OPTS, grid_spacing=grid.max_spacing)
    return opts


# Fork-inherited state for worker pools: task payloads stay out of the pipe,
# only index ranges travel, so scene callables need not pickle.
_POOL_STATE: dict = {}


def _pool_worker(bounds):
    prep, points, opts = _POOL_STATE["args"]
    return query_batch(prep, points[bounds[0]:bounds[1]], opts)


def _parallel_results(prep: PreparedScene, points: np.ndarray, opts: QueryOpts,
                      workers: int) -> list:
    if workers <= 1 or points.shape[0] < 4 * workers:
        return query_batch(prep, points, opts)
    import multiprocessing as mp

    edges = np.linspace(0, points.shape[0], workers + 1).astype(int)
    ranges = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    _POOL_STATE["args"] = (prep, points, opts)
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(processes=len(ranges)) as pool:
            chunks = pool.map(_pool_worker, ranges)
    finally:
        _POOL_STATE.pop("args", None)
    out = []
    for chunk in chunks:
        out.extend(chunk)
    return out


@dataclass
class MedialAxisField:
    """Per-grid-point distance summaries with medial/vacant point lists."""

    grid: GridSpec
    scene: object                 # SetDescriptor behind the field
    opts: QueryOpts
    rho: np.ndarray               # (M,) nan where not attained
    status: np.ndarray            # (M,) Status values as int8
    cluster_count: np.ndarray     # (M,) 0 where vacant

    @property
    def generator_count(self) -> np.ndarray:
        # one subdifferential generator per cluster representative
        return self.cluster_count

    @property
    def points(self) -> np.ndarray:
        return self.grid.points()

    @property
    def medial_mask(self) -> np.ndarray:
        return (self.status == int(Status.ATTAINED)) & (self.cluster_count >= 2)

    @property
    def vacant_mask(self) -> np.ndarray:
        return self.status == int(Status.UNBOUNDED)

    @property
    def M_points(self) -> np.ndarray:
        return self.points[self.medial_mask]

    @property
    def W_points(self) -> np.ndarray:
        return self.points[self.vacant_mask]


def medial_axis_field(scene, grid: GridSpec, opts: Optional[QueryOpts] = None,
                      workers: int = 1) -> MedialAxisField:
    """Evaluate the distance field on a grid and collect M and W points."""
    prep = prepare(scene)
    if grid.dim != prep.signature.n:
        raise ValidationError(
            f"grid dimension {grid.dim} does not match signature dimension {prep.signature.n}")
    opts = _field_opts(grid, opts)
    results = _parallel_results(prep, grid.points(), opts, workers)
    rho = np.array([r.rho for r in results])
    status = np.array([int(r.status) for r in results], dtype=np.int8)
    count = np.array([len(r.closest_clusters) for r in results], dtype=np.int32)
    return MedialAxisField(grid, prep.descriptor, opts, rho, status, count)


def anchor_in_result(result: DistanceResult, anchor: np.ndarray, tol: float = 0.0) -> bool:
    """Discrete membership test: does ``anchor`` belong to the closest set?"""
    if result.status is not Status.ATTAINED:
        return False
    for cluster in result.closest_clusters:
        if np.linalg.norm(cluster.representative - anchor) <= max(cluster.radius, tol):
            return True
    return False


def _unique_anchor(result: DistanceResult, anchor: np.ndarray, tol: float = 0.0) -> bool:
    return (result.status is Status.ATTAINED and len(result.closest_clusters) == 1
            and anchor_in_result(result, anchor, tol))


def _require_on_set(prep: PreparedScene, point: np.ndarray) -> None:
    dist = float(np.min(np.linalg.norm(prep.points - point, axis=1)))
    if dist > max(prep.max_delta, 1e-9):
        raise AnchorNotOnSetError(
            f"point {point} is {dist:.3g} away from the sampled set (allowed {prep.max_delta:.3g})")


@dataclass
class NormalSetSample:
    """Grid membership of the normal sets of one anchor.

    ``n_mask`` marks grid points whose closest set contains the anchor;
    ``nprime_mask`` marks those whose closest set is exactly the anchor.
    The sampled convexity and tangent-cone verifications run alongside and
    report violations instead of raising.
    """

    anchor: np.ndarray
    grid: GridSpec
    n_mask: np.ndarray
    nprime_mask: np.ndarray
    convexity_violations: int
    convexity_probes: int
    cone_max_pairing: float
    cone_tol: float

    @property
    def N_points(self) -> np.ndarray:
        return self.grid.points()[self.n_mask]

    @property
    def Nprime_points(self) -> np.ndarray:
        return self.grid.points()[self.nprime_mask]


def normal_set(anchor, scene, grid: GridSpec, opts: Optional[QueryOpts] = None,
               seed: int = 0, convexity_probes: int = 64, workers: int = 1) -> NormalSetSample:
    """Membership sweep for N(anchor) and N'(anchor) over a grid."""
    prep = prepare(scene)
    anchor = np.asarray(anchor, dtype=float).reshape(prep.signature.n)
    _require_on_set(prep, anchor)
    opts = _field_opts(grid, opts)
    pts = grid.points()
    results = _parallel_results(prep, pts, opts, workers)
    n_mask = np.array([anchor_in_result(r, anchor) for r in results], dtype=bool)
    nprime_mask = np.array([_unique_anchor(r, anchor) for r in results], dtype=bool)

    # sampled convexity: midpoints of random N-point pairs stay within a cell of N
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    n_points = pts[n_mask]
    cell = grid.max_spacing
    violations = 0
    probes = 0
    if n_points.shape[0] >= 2:
        for _ in range(convexity_probes):
            i, j = rng.integers(0, n_points.shape[0], size=2)
            mid = 0.5 * (n_points[i] + n_points[j])
            probes += 1
            if np.min(np.linalg.norm(n_points - mid, axis=1)) > cell * (1.0 + 1e-9):
                violations += 1

    # tangent-cone inclusion: <<x - a, v>> <= tol for tangent directions at the anchor
    cone_max = float("-inf")
    tangents = _anchor_tangents(prep, anchor)
    diag = prep.signature.diag
    if tangents and n_points.shape[0]:
        rel = n_points - anchor
        for tau in tangents:
            pair = rel @ (diag * tau)
            cone_max = max(cone_max, float(pair.max()))
    cone_tol = 2.0 * cell * (1.0 + float(np.max(np.linalg.norm(n_points - anchor, axis=1)))
                             if n_points.shape[0] else 1.0)
    return NormalSetSample(anchor, grid, n_mask, nprime_mask, violations, probes,
                           cone_max, cone_tol)


def _anchor_tangents(prep: PreparedScene, anchor: np.ndarray) -> list:
    """Tangent directions of the piece carrying the sample nearest the anchor.

    Interior parameters give the two-sided pair; boundary parameters give
    the one-sided inward direction; point lists give nothing.
    """
    j = int(np.argmin(np.linalg.norm(prep.points - anchor, axis=1)))
    piece_idx = int(prep.sample.origin_piece[j])
    piece = prep.descriptor.pieces[piece_idx]
    sig = prep.signature
    if isinstance(piece, PointList):
        return []
    if isinstance(piece, Curve) or (isinstance(piece, Graph) and sig.l == 1):
        params = np.asarray(prep.sample.piece_params[piece_idx], dtype=float).reshape(-1)
        local = j - prep.sample.piece_slices[piece_idx].start
        t = float(params[local])
        if isinstance(piece, Curve):
            d = curve_derivative(piece, t, sig)
        else:
            jac = graph_jacobian(piece, np.array([t]), sig)
            d = np.concatenate([[1.0], jac[:, 0]])
        norm = float(np.linalg.norm(d))
        if norm == 0.0:
            return []
        u = d / norm
        if local == 0:
            return [u]
        if local == len(params) - 1:
            return [-u]
        return [u, -u]
    if isinstance(piece, Graph):
        params = np.asarray(prep.sample.piece_params[piece_idx], dtype=float)
        local = j - prep.sample.piece_slices[piece_idx].start
        x = params[local]
        jac = graph_jacobian(piece, x, sig)
        dirs = []
        for axis in range(sig.l):
            v = np.zeros(sig.n)
            v[axis] = 1.0
            v[sig.l:] = jac[:, axis]
            v = v / np.linalg.norm(v)
            dirs.extend([v, -v])
        return dirs
    return []


class RayStatus(Enum):
    FINITE = "finite"
    CAPPED_AT_TMAX = "capped_at_tmax"


@dataclass
class NormalRayResult:
    base: np.ndarray
    direction: np.ndarray
    r_v: float
    status: RayStatus


@dataclass
class CentralSample:
    """A central-set point base + reach * direction with its provenance."""

    point: np.ndarray
    base: np.ndarray
    direction: np.ndarray
    r_v: float


def reach_along_ray(x, v, scene, t_max: float = 8.0, tol_ray: Optional[float] = None,
                    opts: QueryOpts = DEFAULT_OPTS, max_iters: int = 60) -> NormalRayResult:
    """Bisect for the largest t with x still among the closest points of x + t v.

    The membership predicate is monotone along normal rays (the half-open
    segment property of normal sets), which justifies plain bisection.
    """
    prep = prepare(scene)
    x = np.asarray(x, dtype=float).reshape(prep.signature.n)
    v = np.asarray(v, dtype=float).reshape(prep.signature.n)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValidationError("ray direction must be non-zero")
    v = v / norm
    _require_on_set(prep, x)
    if tol_ray is None:
        tol_ray = 1e-6 * t_max

    def predicate(t: float) -> bool:
        result = query_batch(prep, (x + t * v)[None, :], opts)[0]
        return anchor_in_result(result, x)

    if not predicate(tol_ray):
        raise DirectionNotInNormalConeError(
            f"membership already fails at t = {tol_ray:.3g} along {v}")
    if predicate(t_max):
        return NormalRayResult(x, v, t_max, RayStatus.CAPPED_AT_TMAX)
    lo, hi = tol_ray, t_max
    for _ in range(max_iters):
        if hi - lo <= tol_ray:
            break
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return NormalRayResult(x, v, lo, RayStatus.FINITE)


def _pseudo_normal_space(sig: Signature, tangents: list) -> np.ndarray:
    """Euclidean-orthonormal basis of {v : <<v, tau>> = 0 for all tau}."""
    rows = np.array([sig.diag * t for t in tangents])
    _, s, vt = np.linalg.svd(rows)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:]


def _sphere_directions(n: int, count: int, rng) -> np.ndarray:
    if n == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dirs = rng.normal(size=(count, n))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs / np.where(norms > 0, norms, 1.0)


def central_set(scene, directions_per_base: int = 64, base_stride: int = 1,
                t_max: float = 8.0, tol_ray: Optional[float] = None,
                tol_cone: float = 1e-9, seed: int = 0,
                opts: QueryOpts = DEFAULT_OPTS) -> list:
    """Collect base + reach * direction over the discrete normal cone.

    Directions are sampled inside the pseudo-orthogonal complement of the
    tangent directions where tangents exist (interior smooth samples), from
    the one-sided cone at piece endpoints, and from the whole unit sphere at
    point-list samples.  Rays whose membership predicate fails immediately
    and rays capped at ``t_max`` contribute nothing.
    """
    prep = prepare(scene)
    sig = prep.signature
    out = []
    for base_idx in range(0, len(prep.points), max(1, base_stride)):
        x = prep.points[base_idx]
        rng = np.random.default_rng(np.random.SeedSequence([seed, base_idx]))
        tangents = _anchor_tangents(prep, x)
        two_sided = len(tangents) >= 2
        if two_sided:
            # every other entry: the +-pairs span the same tangent lines
            basis = _pseudo_normal_space(sig, tangents[::2])
            if basis.shape[0] == 0:
                continue
            if basis.shape[0] == 1:
                dirs = np.array([basis[0], -basis[0]])
            else:
                coeffs = rng.normal(size=(directions_per_base, basis.shape[0]))
                dirs = coeffs @ basis
                dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        else:
            dirs = _sphere_directions(sig.n, directions_per_base, rng)
            if tangents:
                diag = sig.diag
                keep = np.array([float(np.dot(diag * tangents[0], d)) <= tol_cone for d in dirs])
                dirs = dirs[keep]
        for v in dirs:
            try:
                ray = reach_along_ray(x, v, prep, t_max=t_max, tol_ray=tol_ray, opts=opts)
            except DirectionNotInNormalConeError:
                continue
            if ray.status is RayStatus.CAPPED_AT_TMAX:
                continue
            if ray.r_v <= (tol_ray if tol_ray is not None else 1e-6 * t_max) * 2.0:
                continue
            out.append(CentralSample(x + ray.r_v * v, x, v, ray.r_v))
    return out


@dataclass
class SandwichReport:
    """One-sided Hausdorff deviations between medial points and central samples."""

    d_medial_to_central: float
    d_central_to_medial: float
    tol: float
    passed: bool
    medial_count: int
    central_count: int
    worst_medial: Optional[np.ndarray] = None
    worst_central: Optional[np.ndarray] = None


def _one_sided(a: np.ndarray, b: np.ndarray):
    """sup over a of inf over b of the Euclidean distance, with the witness."""
    worst = -1.0
    witness = None
    for start in range(0, a.shape[0], 1024):
        chunk = a[start:start + 1024]
        d = np.sqrt(np.sum((chunk[:, None, :] - b[None, :, :]) ** 2, axis=2))
        mins = d.min(axis=1)
        k = int(np.argmax(mins))
        if mins[k] > worst:
            worst = float(mins[k])
            witness = chunk[k]
    return worst, witness


def sandwich_check(field: MedialAxisField, central: list, tol_cells: float = 3.0) -> SandwichReport:
    """Compare the medial point list against central samples, both ways.

    Central samples are clipped to the field window (dilated by one cell):
    the grid cannot certify anything outside it.  Empty-vs-empty passes
    vacuously; empty-vs-nonempty fails with infinite deviation.
    """
    m_points = field.M_points
    cell = field.grid.max_spacing
    c_points = np.array([s.point for s in central]) if central else np.empty((0, field.grid.dim))
    if c_points.shape[0]:
        keep = np.ones(c_points.shape[0], dtype=bool)
        for axis, (lo, hi) in enumerate(field.grid.bounds):
            keep &= (c_points[:, axis] >= lo - cell) & (c_points[:, axis] <= hi + cell)
        c_points = c_points[keep]
    tol = tol_cells * cell
    if m_points.shape[0] == 0 and c_points.shape[0] == 0:
        return SandwichReport(0.0, 0.0, tol, True, 0, 0)
    if m_points.shape[0] == 0 or c_points.shape[0] == 0:
        return SandwichReport(float("inf"), float("inf"), tol, False,
                              m_points.shape[0], c_points.shape[0])
    d_mc, wit_m = _one_sided(m_points, c_points)
    d_cm, wit_c = _one_sided(c_points, m_points)
    passed = d_mc <= tol and d_cm <= tol
    return SandwichReport(d_mc, d_cm, tol, passed, m_points.shape[0], c_points.shape[0],
                          wit_m, wit_c)


def nash_separation(scene, field: MedialAxisField) -> float:
    """Minimum Euclidean distance from medial points to the sampled set."""
    prep = prepare(scene)
    m_points = field.M_points
    if m_points.shape[0] == 0:
        return float("inf")
    best = float("inf")
    for start in range(0, m_points.shape[0], 1024):
        chunk = m_points[start:start + 1024]
        d = np.sqrt(np.sum((chunk[:, None, :] - prep.points[None, :, :]) ** 2, axis=2))
        best = min(best, float(d.min()))
    return best


@dataclass
class SingularityReport:
    anchor: np.ndarray
    codimension: int
    member_count: int
    rank: int
    singular_candidate: bool
    singular_values: np.ndarray


def singularity_witness(anchor, field: MedialAxisField, k: int,
                        rank_rtol: float = 0.05, workers: int = 1) -> SingularityReport:
    """Search the field grid for points seeing the anchor among their closest
    set and rank the difference vectors; rank >= k + 1 flags a singular
    candidate.  The rank tolerance is coarse on purpose: band membership
    scatters preimages sideways by about one cell."""
    prep = prepare(field.scene)
    anchor = np.asarray(anchor, dtype=float).reshape(prep.signature.n)
    _require_on_set(prep, anchor)
    pts = field.grid.points()
    results = _parallel_results(prep, pts, field.opts, workers)
    members = np.array([anchor_in_result(r, anchor) for r in results], dtype=bool)
    rel = pts[members] - anchor
    if rel.shape[0] == 0:
        return SingularityReport(anchor, k, 0, 0, False, np.empty(0))
    s = np.linalg.svd(rel, compute_uv=False)
    rank = int(np.sum(s > rank_rtol * s[0])) if s.size and s[0] > 0 else 0
    return SingularityReport(anchor, k, int(rel.shape[0]), rank, rank >= k + 1, s)


def line_section(a, direction, length: float, count: int) -> np.ndarray:
    """Sample a straight segment of ``length`` centred at ``a``."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    offsets = np.linspace(-length / 2.0, length / 2.0, count)
    return a[None, :] + offsets[:, None] * d[None, :]


def sphere_section(a, center, arc_angle: float, count: int) -> np.ndarray:
    """Sample an arc of the Euclidean sphere through ``a`` centred at ``center``."""
    a = np.asarray(a, dtype=float)
    center = np.asarray(center, dtype=float)
    radial = a - center
    radius = float(np.linalg.norm(radial))
    if radius == 0.0:
        raise ValidationError("sphere section needs a != center")
    u = radial / radius
    # any unit vector orthogonal to u spans the arc plane
    probe = np.zeros_like(u)
    probe[int(np.argmin(np.abs(u)))] = 1.0
    w = probe - np.dot(probe, u) * u
    w = w / np.linalg.norm(w)
    angles = np.linspace(-arc_angle / 2.0, arc_angle / 2.0, count)
    return center[None, :] + radius * (np.cos(angles)[:, None] * u[None, :]
                                       + np.sin(angles)[:, None] * w[None, :])


@dataclass
class HomeoReport:
    injective: bool
    continuous: bool
    representatives: np.ndarray
    injectivity_violations: int
    max_adjacent_jump: float
    jump_tol: float

    @property
    def passed(self) -> bool:
        return self.injective and self.continuous


def local_homeo_check(a, section_points, scene, opts: QueryOpts = DEFAULT_OPTS,
                      transversality_cos: float = 0.9, cont_factor: float = 10.0) -> HomeoReport:
    """Check that the closest-point map restricted to a transversal section is
    injective and continuous.

    Preconditions: a single closest cluster at ``a`` and every section chord
    at Euclidean angle |cos| <= ``transversality_cos`` to the direction
    a - m(a).  Section samples hitting more than one cluster raise
    SectionHitsMedialAxisError.
    """
    prep = prepare(scene)
    a = np.asarray(a, dtype=float).reshape(prep.signature.n)
    base = query_batch(prep, a[None, :], opts)[0]
    if base.status is not Status.ATTAINED:
        raise VacantPointError(f"base point {a} is vacant")
    if len(base.closest_clusters) != 1:
        raise OnMedialAxisError(f"base point {a} has {len(base.closest_clusters)} clusters")
    foot_dir = a - base.closest_clusters[0].representative
    foot_norm = float(np.linalg.norm(foot_dir))
    section = np.atleast_2d(np.asarray(section_points, dtype=float))
    chords = np.diff(section, axis=0)
    if foot_norm > 0.0:
        for chord in chords:
            c_norm = float(np.linalg.norm(chord))
            if c_norm == 0.0:
                continue
            cosang = abs(float(np.dot(chord, foot_dir))) / (c_norm * foot_norm)
            if cosang > transversality_cos:
                raise TransversalityError(
                    f"section chord at |cos| = {cosang:.3f} > {transversality_cos} to a - m(a)")
    results = query_batch(prep, section, opts)
    reps = []
    for s, r in zip(section, results):
        if r.status is not Status.ATTAINED:
            raise VacantPointError(f"section point {s} is vacant")
        if len(r.closest_clusters) != 1:
            raise SectionHitsMedialAxisError(
                f"section point {s} has {len(r.closest_clusters)} clusters")
        reps.append(r.closest_clusters[0].representative)
    reps = np.array(reps)
    spacing = float(np.max(np.linalg.norm(chords, axis=1))) if len(chords) else 0.0
    scene_spacing = max([s for s in prep.sample.spacings] + [spacing])
    delta = prep.max_delta

    violations = 0
    for i in range(len(section)):
        for j in range(i + 1, len(section)):
            if np.linalg.norm(section[i] - section[j]) > 2.0 * spacing:
                if np.linalg.norm(reps[i] - reps[j]) < delta:
                    violations += 1
    jumps = np.linalg.norm(np.diff(reps, axis=0), axis=1) if len(reps) > 1 else np.zeros(0)
    max_jump = float(jumps.max()) if jumps.size else 0.0
    jump_tol = cont_factor * scene_spacing
    return HomeoReport(violations == 0, max_jump <= jump_tol, reps, violations,
                       max_jump, jump_tol)
