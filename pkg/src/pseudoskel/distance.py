"""The squared pseudo-distance field and its closest-point machinery.

For a query point a and a sampled set X the field is
rho(a) = inf { Q(x - a) : x in X }.  In indefinite signature the infimum may
fail to be attained; queries therefore return a status:

* ``ATTAINED``       the sampled-and-refined minimum stands,
* ``UNBOUNDED``      evidence that the infimum escapes along an analytic
                     extension of a piece (the query lies on the vacant axis),
* ``CAPPED_SEARCH``  an escape probe turned inconclusive before the search
                     budget ran out, so the truncated domain prevents a verdict.

Attained values come from a vectorized scan of the sample followed by
golden-section refinement of every sampled local minimum of one-parameter
pieces.  Near-minimal candidates are chained into clusters; the cluster count
is the discrete stand-in for the number of closest points, which drives
medial-axis extraction, the gradient formula and the subdifferential hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    OnMedialAxisError,
    SignatureMismatchError,
    ValidationError,
    VacantPointError,
)
from .sets import Curve, Graph, PointList, SetDescriptor, eval_curve, eval_graph, sample
from .space import Signature

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0

# Candidate local minima kept per query and piece before refinement.
_MAX_BRACKETS = 8
# Escape probing: parameter doublings and the monotone-decrease tolerance.
_MAX_DOUBLINGS = 200
_RATIO_EVIDENCE = 1.0 - 1e-6
# Chunk of query points processed against the full sample at once.
_QUERY_CHUNK = 512
# Pairwise chaining is exact up to this candidate count, run-based above it.
_CHAIN_EXACT = 600


class Status(IntEnum):
    ATTAINED = 0
    CAPPED_SEARCH = 1
    UNBOUNDED = 2

    @property
    def label(self) -> str:
        return {0: "attained", 1: "capped", 2: "unbounded"}[int(self)]


@dataclass(frozen=True)
class QueryOpts:
    """Tolerances for a distance query.

    ``eps`` is the absolute argmin band; None selects 1e-6 * (1 + |rho|).
    ``delta`` overrides the per-piece cluster radius (default 3x the piece
    sample spacing).  ``grid_spacing`` widens the band adaptively for field
    extraction: a candidate y joins the tie set when its value is within
    max(eps, tie_cells * grid_spacing * 2 * ||y - y_best||) of the minimum,
    which is the value gap a bisector passing within ``tie_cells`` cells of
    the grid point produces.  Point queries leave it at 0 and get the plain
    band.  ``q_floor`` and ``r_max`` bound the escape-evidence search.
    """

    eps: Optional[float] = None
    delta: Optional[float] = None
    refine_iters: int = 60
    q_floor: float = -1.0e9
    r_max: Optional[float] = None
    tie_cells: float = 0.75
    grid_spacing: float = 0.0


DEFAULT_OPTS = QueryOpts()


@dataclass
class ClosestCluster:
    """One chained component of the near-minimal candidate set."""

    representative: np.ndarray
    members: np.ndarray       # global sample indices contributing to the cluster
    radius: float             # chaining radius in effect
    value: float              # Q(representative - a)
    piece: Optional[int] = None
    param: Optional[float] = None


@dataclass
class DistanceResult:
    rho: float                # nan when UNBOUNDED; window minimum when capped
    status: Status
    closest_clusters: list


@dataclass
class SubdifferentialHull:
    """Convex hull generators 2A(a - y), one per cluster representative."""

    generators: list

    def __len__(self):
        return len(self.generators)


@dataclass
class _PieceContext:
    index: int
    kind: str                      # "points" or "param1d" or "sampled"
    slc: slice
    delta: float
    params: Optional[np.ndarray]   # (k,) for param1d
    extendable: bool
    evaluate: Optional[object]     # callable ts -> (m, n) for param1d


class _Param1D:
    """Picklable adapter turning curves and 1-d graphs into t -> R^n maps."""

    def __init__(self, piece, sig: Signature):
        self.piece = piece
        self.sig = sig

    def __call__(self, ts):
        ts = np.asarray(ts, dtype=float)
        if isinstance(self.piece, Curve):
            return eval_curve(self.piece, ts, self.sig.n)
        heights = eval_graph(self.piece, ts[:, None], self.sig.p)
        return np.concatenate([ts[:, None], heights], axis=1)


class PreparedScene:
    """A descriptor bound to its deterministic sample plus query caches."""

    def __init__(self, descriptor: SetDescriptor):
        self.descriptor = descriptor
        self.signature = descriptor.signature
        self.sample = sample(descriptor)
        self.points = self.sample.points
        diag = self.signature.diag
        self._points_diag = self.points * diag
        self._q_points = np.sum(self.points * self.points * diag, axis=1)
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        self.diameter = float(np.linalg.norm(hi - lo))
        self.pieces: list = []
        for idx, piece in enumerate(descriptor.pieces):
            slc = self.sample.piece_slices[idx]
            spacing = self.sample.spacings[idx]
            if isinstance(piece, PointList):
                delta = 1e-9 * (1.0 + self.diameter)
                ctx = _PieceContext(idx, "points", slc, delta, None, False, None)
            elif isinstance(piece, Curve) or (isinstance(piece, Graph) and self.signature.l == 1):
                delta = 3.0 * spacing if spacing > 0 else 1e-9 * (1.0 + self.diameter)
                ctx = _PieceContext(idx, "param1d", slc, delta,
                                    np.asarray(self.sample.piece_params[idx], dtype=float).reshape(-1),
                                    bool(piece.extendable), _Param1D(piece, self.signature))
            else:
                delta = 3.0 * spacing if spacing > 0 else 1e-9 * (1.0 + self.diameter)
                ctx = _PieceContext(idx, "sampled", slc, delta, None, False, None)
            self.pieces.append(ctx)
        self.max_delta = max(ctx.delta for ctx in self.pieces)

    @cached_property
    def lipschitz(self):
        from .sets import estimate_pseudo_lipschitz

        return estimate_pseudo_lipschitz(self.points, self.signature)

    def q_to_queries(self, queries: np.ndarray) -> np.ndarray:
        """Matrix Q(p_j - a_i) of shape (len(queries), N)."""
        qa = self.signature.quadratic_form(queries)
        cross = queries @ self._points_diag.T
        return self._q_points[None, :] - 2.0 * cross + np.atleast_1d(qa)[:, None]


def prepare(descriptor_or_scene) -> PreparedScene:
    if isinstance(descriptor_or_scene, PreparedScene):
        return descriptor_or_scene
    if isinstance(descriptor_or_scene, SetDescriptor):
        return PreparedScene(descriptor_or_scene)
    raise ValidationError("expected a SetDescriptor or PreparedScene")


def _resolve_r_max(prep: PreparedScene, opts: QueryOpts) -> float:
    if opts.r_max is not None:
        return float(opts.r_max)
    return 1e3 * max(prep.diameter, 1.0)


def _golden_refine(evaluate, queries, q_idx, lo, hi, iters):
    """Vectorized golden-section minimization of t -> Q(g(t) - a).

    ``lo``/``hi`` are bracket arrays, ``q_idx`` maps each bracket to its row
    in ``queries``.  One piece evaluation per iteration over every bracket.
    """
    diag = evaluate.sig.diag

    def f(ts):
        pts = evaluate(ts)
        d = pts - queries[q_idx]
        return np.sum(d * d * diag, axis=1)

    h = hi - lo
    c = lo + _INV_PHI2 * h
    d = lo + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(iters):
        left = yc < yd
        new_lo = np.where(left, lo, c)
        new_hi = np.where(left, d, hi)
        h = new_hi - new_lo
        probe = np.where(left, new_lo + _INV_PHI2 * h, new_lo + _INV_PHI * h)
        y_probe = f(probe)
        new_c = np.where(left, probe, d)
        new_yc = np.where(left, y_probe, yd)
        new_d = np.where(left, c, probe)
        new_yd = np.where(left, yc, y_probe)
        lo, hi, c, d, yc, yd = new_lo, new_hi, new_c, new_d, new_yc, new_yd
    t_star = 0.5 * (lo + hi)
    pts = evaluate(t_star)
    dd = pts - queries[q_idx]
    vals = np.sum(dd * dd * diag, axis=1)
    return t_star, pts, vals


def _local_minima_brackets(sub_vals, params):
    """Per-row local minima of sampled values, as bracket triples.

    Returns (row_idx, lo, hi, center_col) arrays with at most
    ``_MAX_BRACKETS`` entries per row, best values first.
    """
    m, k = sub_vals.shape
    mask = np.zeros_like(sub_vals, dtype=bool)
    if k >= 3:
        mask[:, 1:-1] = (sub_vals[:, 1:-1] <= sub_vals[:, :-2]) & (sub_vals[:, 1:-1] <= sub_vals[:, 2:])
    mask[:, 0] = sub_vals[:, 0] <= sub_vals[:, 1]
    mask[:, -1] = sub_vals[:, -1] <= sub_vals[:, -2]
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return rows, np.empty(0), np.empty(0), cols
    # keep at most _MAX_BRACKETS per row, by value
    order = np.lexsort((sub_vals[rows, cols], rows))
    rows, cols = rows[order], cols[order]
    keep = np.ones(rows.size, dtype=bool)
    start = 0
    while start < rows.size:
        stop = start
        while stop < rows.size and rows[stop] == rows[start]:
            stop += 1
        if stop - start > _MAX_BRACKETS:
            keep[start + _MAX_BRACKETS:stop] = False
        start = stop
    rows, cols = rows[keep], cols[keep]
    lo = params[np.maximum(cols - 1, 0)]
    hi = params[np.minimum(cols + 1, len(params) - 1)]
    return rows, lo, hi, cols


class _UnionFind:
    def __init__(self, m):
        self.parent = list(range(m))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _chain_points(points, deltas):
    """Union-find over points: (i, j) link when within max(delta_i, delta_j)."""
    m = len(points)
    uf = _UnionFind(m)
    for start in range(0, m, _CHAIN_EXACT):
        block = slice(start, min(start + _CHAIN_EXACT, m))
        diff = points[block, None, :] - points[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        thr = np.maximum(deltas[block, None], deltas[None, :])
        link_i, link_j = np.nonzero(dist <= thr)
        for i, j in zip(link_i, link_j):
            gi = int(i) + start
            if gi < j:
                uf.union(gi, int(j))
    return uf


@dataclass
class _Basin:
    """One plain-band sublevel component of Q(. - a) on a piece."""

    value: float
    point: np.ndarray
    piece: int
    param: Optional[float]
    delta: float
    seed_member: int     # global sample index anchoring the basin, -1 if none


def _escape_scan(prep: PreparedScene, queries: np.ndarray, opts: QueryOpts) -> np.ndarray:
    """Escape evidence per query; returns int8 array of Status values.

    For every extendable one-parameter piece end with a negative one-sided
    outward slope, probe the analytic form at doubling parameter offsets.
    Monotone decrease until Q < q_floor or until the probe leaves the r_max
    ball counts as vacancy evidence (UNBOUNDED) provided the block-norm ratio
    ||probe - a||_p / ||probe - a||_l reached at least 1 - 1e-6; a turnaround
    downgrades the verdict to CAPPED_SEARCH.
    """
    mq = queries.shape[0]
    out = np.zeros(mq, dtype=np.int8)
    sig = prep.signature
    diag = sig.diag
    l = sig.l
    r_max = _resolve_r_max(prep, opts)
    for ctx in prep.pieces:
        if ctx.kind != "param1d" or not ctx.extendable:
            continue
        t0, t1 = float(ctx.params[0]), float(ctx.params[-1])
        length = t1 - t0
        h = 1e-6 * length
        for end, direction in ((t0, -1.0), (t1, 1.0)):
            pts = ctx.evaluate(np.array([end, end - direction * h]))
            d_end = pts[0] - queries
            f_end = np.sum(d_end * d_end * diag, axis=1)
            d_in = pts[1] - queries
            f_in = np.sum(d_in * d_in * diag, axis=1)
            slope_out = (f_end - f_in) / h
            active = slope_out < -1e-9 * (1.0 + np.abs(f_end))
            if not active.any():
                continue
            alive = active.copy()
            prev = f_end.copy()
            verdict = np.zeros(mq, dtype=np.int8)
            ratio_ok = np.zeros(mq, dtype=bool)
            step = max(length, 1.0)
            for k in range(_MAX_DOUBLINGS):
                offset = step * (2.0 ** k)
                if offset > 1e12:
                    break
                t = end + direction * offset
                pt = ctx.evaluate(np.array([t]))[0]
                d = pt - queries[alive]
                vals = np.sum(d * d * diag, axis=1)
                dl = np.sqrt(np.sum(d[:, :l] ** 2, axis=1))
                dp = np.sqrt(np.sum(d[:, l:] ** 2, axis=1))
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(dl > 0, dp / np.where(dl > 0, dl, 1.0), np.inf)
                radius = np.sqrt(np.sum(d * d, axis=1))
                idx = np.flatnonzero(alive)
                ratio_ok[idx] |= ratios >= _RATIO_EVIDENCE
                decreasing = vals < prev[idx] - 1e-12 * (1.0 + np.abs(prev[idx]))
                # turnaround: inconclusive end
                turned = ~decreasing
                verdict[idx[turned]] = np.maximum(verdict[idx[turned]], Status.CAPPED_SEARCH)
                still = idx[decreasing]
                vals_dec = vals[decreasing]
                hit_floor = vals_dec < opts.q_floor
                hit_radius = radius[decreasing] > r_max
                finished = hit_floor | hit_radius
                fin_idx = still[finished]
                unb = ratio_ok[fin_idx]
                verdict[fin_idx[unb]] = np.maximum(verdict[fin_idx[unb]], Status.UNBOUNDED)
                verdict[fin_idx[~unb]] = np.maximum(verdict[fin_idx[~unb]], Status.CAPPED_SEARCH)
                prev[still] = vals_dec
                alive[:] = False
                alive[still[~finished]] = True
                if not alive.any():
                    break
            # probe budget exhausted while still decreasing: inconclusive
            verdict[alive] = np.maximum(verdict[alive], Status.CAPPED_SEARCH)
            out = np.maximum(out, verdict)
    return out


def query_batch(scene, queries, opts: QueryOpts = DEFAULT_OPTS) -> list:
    """Full DistanceResult for every query row."""
    prep = prepare(scene)
    sig = prep.signature
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[-1] != sig.n:
        raise SignatureMismatchError(
            f"queries of dimension {queries.shape[-1]} against signature ({sig.l}, {sig.p})")
    out = []
    for start in range(0, queries.shape[0], _QUERY_CHUNK):
        chunk = queries[start:start + _QUERY_CHUNK]
        out.extend(_chunk_results(prep, chunk, opts))
    return out


def _chunk_results(prep: PreparedScene, queries: np.ndarray, opts: QueryOpts) -> list:
    mq = queries.shape[0]
    vmat = prep.q_to_queries(queries)
    statuses = _escape_scan(prep, queries, opts)

    # refined local minima per query and one-parameter piece, kept in
    # parameter order so the ridge test between neighbours is well-defined
    refined = [[] for _ in range(mq)]  # per query: (piece, col, value, point, param)
    for ctx in prep.pieces:
        if ctx.kind != "param1d":
            continue
        sub = vmat[:, ctx.slc]
        rows, lo, hi, cols = _local_minima_brackets(sub, ctx.params)
        if rows.size == 0:
            continue
        t_star, pts, vals = _golden_refine(ctx.evaluate, queries, rows, lo, hi, opts.refine_iters)
        for r, t, p, v, c in zip(rows, t_star, pts, vals, cols):
            refined[int(r)].append((ctx.index, int(c), float(v), p, float(t)))

    deltas_by_piece = np.array([ctx.delta for ctx in prep.pieces])
    if opts.delta is not None:
        deltas_by_piece = np.full_like(deltas_by_piece, float(opts.delta))

    results = []
    for i in range(mq):
        row = vmat[i]
        rho = float(row.min())
        for entry in refined[i]:
            rho = min(rho, entry[2])
        status = Status(int(statuses[i]))
        if status is Status.UNBOUNDED:
            results.append(DistanceResult(float("nan"), status, []))
            continue

        eps_plain = opts.eps if opts.eps is not None else 1e-6 * (1.0 + abs(rho))
        margin_max = max(eps_plain, opts.tie_cells * opts.grid_spacing * 2.0 * prep.diameter)

        # basins: sublevel components of the plain band, one per merged group
        # of refined minima (ridge between neighbours must stay in-band) plus
        # every near-minimal sample of non-parametric pieces
        basins = []
        per_piece = {}
        for piece, col, v, p, t in refined[i]:
            per_piece.setdefault(piece, []).append((col, v, p, t))
        for piece, minima in per_piece.items():
            minima.sort(key=lambda e: e[0])
            ctx = prep.pieces[piece]
            sub = row[ctx.slc]
            group = [minima[0]]
            merged = []
            for prev, cur in zip(minima[:-1], minima[1:]):
                ridge = float(np.max(sub[prev[0]:cur[0] + 1]))
                if ridge <= max(prev[1], cur[1]) + eps_plain:
                    group.append(cur)
                else:
                    merged.append(group)
                    group = [cur]
            merged.append(group)
            for group in merged:
                col, v, p, t = min(group, key=lambda e: e[1])
                basins.append(_Basin(v, p, piece, t, float(deltas_by_piece[piece]),
                                     ctx.slc.start + col))
        for ctx in prep.pieces:
            if ctx.kind == "param1d":
                continue
            sub = row[ctx.slc]
            near = np.flatnonzero(sub <= rho + margin_max)
            for local in near:
                j = ctx.slc.start + int(local)
                basins.append(_Basin(float(sub[local]), prep.points[j], ctx.index,
                                     None, float(deltas_by_piece[ctx.index]), j))

        # sub-resolution basins merge by delta proximity
        b_points = np.array([b.point for b in basins])
        b_deltas = np.array([b.delta for b in basins])
        uf = _chain_points(b_points, b_deltas)
        grouped = {}
        for k in range(len(basins)):
            grouped.setdefault(uf.find(k), []).append(k)
        merged_basins = []
        for group in grouped.values():
            k = min(group, key=lambda g: (basins[g].value, basins[g].seed_member))
            b = basins[k]
            b.delta = float(max(basins[g].delta for g in group))
            merged_basins.append(b)

        # tie test: a basin joins when its value gap fits the band, which
        # widens with the distance between the representatives on grids
        best = min(merged_basins, key=lambda b: (b.value, b.seed_member))
        kept = []
        for b in merged_basins:
            sep = float(np.linalg.norm(b.point - best.point))
            thr = max(eps_plain, opts.tie_cells * opts.grid_spacing * 2.0 * sep)
            if b.value - rho <= thr:
                kept.append(b)

        # members: plain-band samples, each assigned to the nearest kept basin
        member_idx = np.flatnonzero(row <= rho + eps_plain)
        reps = np.array([b.point for b in kept])
        assignment = {}
        if member_idx.size:
            d = np.linalg.norm(prep.points[member_idx][:, None, :] - reps[None, :, :], axis=2)
            nearest = np.argmin(d, axis=1)
            for j, b_idx in zip(member_idx, nearest):
                assignment.setdefault(int(b_idx), []).append(int(j))

        clusters = []
        for b_idx, b in enumerate(kept):
            members = np.array(sorted(assignment.get(b_idx, [])), dtype=int)
            clusters.append(ClosestCluster(
                representative=np.asarray(b.point, dtype=float).copy(),
                members=members,
                radius=b.delta,
                value=b.value,
                piece=b.piece,
                param=b.param,
            ))
        clusters.sort(key=lambda c: (c.value, c.members[0] if c.members.size else -1))
        results.append(DistanceResult(rho, status, clusters))
    return results


def rho(a, scene, opts: QueryOpts = DEFAULT_OPTS) -> DistanceResult:
    """Distance query at a single point."""
    return query_batch(scene, np.atleast_2d(np.asarray(a, dtype=float)), opts)[0]


def closest_points(a, scene, opts: QueryOpts = DEFAULT_OPTS) -> list:
    """Clusters of the near-minimal set; requires an attained infimum."""
    result = rho(a, scene, opts)
    if result.status is not Status.ATTAINED:
        raise VacantPointError(f"infimum not attained at {np.asarray(a)} ({result.status.label})")
    return result.closest_clusters


def grad_rho(a, scene, opts: QueryOpts = DEFAULT_OPTS) -> np.ndarray:
    """Gradient 2A(a - y) for the unique closest cluster representative y."""
    prep = prepare(scene)
    clusters = closest_points(a, prep, opts)
    if len(clusters) != 1:
        raise OnMedialAxisError(f"{len(clusters)} closest clusters at {np.asarray(a)}")
    y = clusters[0].representative
    a = np.asarray(a, dtype=float)
    return 2.0 * prep.signature.diag * (a - y)


def fd_grad_rho(a, scene, h: float, opts: QueryOpts = DEFAULT_OPTS, detect_kinks: bool = False):
    """Central-difference gradient of rho; the validation oracle.

    With ``detect_kinks`` the one-sided differences are compared per
    coordinate and the boolean disagreement mask is returned alongside.
    """
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    prep = prepare(scene)
    a = np.asarray(a, dtype=float).reshape(prep.signature.n)
    stencil = [a]
    for i in range(a.size):
        e = np.zeros_like(a)
        e[i] = h
        stencil.extend([a + e, a - e])
    results = query_batch(prep, np.array(stencil), opts)
    for r, point in zip(results, stencil):
        if r.status is not Status.ATTAINED:
            raise VacantPointError(f"stencil point {point} is vacant")
    r0 = results[0].rho
    grad = np.empty_like(a)
    kinks = np.zeros(a.size, dtype=bool)
    for i in range(a.size):
        rp = results[1 + 2 * i].rho
        rm = results[2 + 2 * i].rho
        grad[i] = (rp - rm) / (2.0 * h)
        forward = (rp - r0) / h
        backward = (r0 - rm) / h
        kinks[i] = abs(forward - backward) > 50.0 * h * (1.0 + abs(r0))
    if detect_kinks:
        return grad, kinks
    return grad


def recover_m(a, grad, signature: Signature) -> np.ndarray:
    """Invert the gradient formula: the closest point is a - A grad / 2."""
    a = signature.check_vector(a)
    grad = signature.check_vector(grad)
    return a - signature.diag * grad / 2.0


def subdifferential(a, scene, opts: QueryOpts = DEFAULT_OPTS) -> SubdifferentialHull:
    """Generators of the convex subdifferential hull at an attained query."""
    prep = prepare(scene)
    clusters = closest_points(a, prep, opts)
    a = np.asarray(a, dtype=float)
    gens = [2.0 * prep.signature.diag * (a - c.representative) for c in clusters]
    return SubdifferentialHull(gens)


def localized_rho_check(a0, scene, radius: float, opts: QueryOpts = DEFAULT_OPTS,
                        points_per_axis: int = 5) -> bool:
    """Check rho(x, X) == min_j rho(x, X_j) on a grid around ``a0``.

    Pieces must be pairwise disjoint as sampled.  A False return is a
    finding, not an error.
    """
    prep = prepare(scene)
    desc = prep.descriptor
    sig = prep.signature
    for i in range(len(desc.pieces)):
        si = prep.sample.points[prep.sample.piece_slices[i]]
        for j in range(i + 1, len(desc.pieces)):
            sj = prep.sample.points[prep.sample.piece_slices[j]]
            d = np.sqrt(np.sum((si[:, None, :] - sj[None, :, :]) ** 2, axis=2))
            if float(d.min()) == 0.0:
                raise ValidationError("pieces share sample points; localization needs disjoint pieces")
    a0 = np.asarray(a0, dtype=float).reshape(sig.n)
    axes = [np.linspace(a0[k] - radius, a0[k] + radius, points_per_axis) for k in range(sig.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    whole = query_batch(prep, grid, opts)
    piece_preps = [prepare(desc.piece_descriptor(j)) for j in range(len(desc.pieces))]
    piece_results = [query_batch(pp, grid, opts) for pp in piece_preps]
    for k in range(grid.shape[0]):
        whole_r = whole[k]
        stats = [piece_results[j][k].status for j in range(len(piece_preps))]
        vals = [piece_results[j][k].rho for j in range(len(piece_preps))]
        # the min over pieces inherits the most severe piece status
        combined = Status(max(int(s) for s in stats))
        if whole_r.status is not combined:
            return False
        if combined is Status.UNBOUNDED:
            continue
        best = min(vals)
        if abs(whole_r.rho - best) > 1e-10 * (1.0 + abs(best)):
            return False
    return True
