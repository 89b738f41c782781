"""Closed-set descriptors: finite point lists, parametric curves, graphs.

A descriptor owns its signature and a list of pieces.  Sampling is
deterministic and nested: a uniform grid with resolution 2r-1 contains the
grid with resolution r, so refinement-monotonicity checks are exact.
Pairwise scans (acausality, pseudo-Lipschitz constant) run in row chunks and
report the lexicographically first witness, independent of chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    BoundaryParameterError,
    DimensionMismatchError,
    EmptyDomainError,
    EmptySetError,
    NonFiniteValueError,
    PointListHasNoTangentError,
    ValidationError,
)
from .space import Signature

# Relative finite-difference step for tangents without analytic derivatives.
H_TAN_REL = 1e-5


@dataclass(frozen=True)
class PointList:
    """A finite list of points, stored as an (k, n) array."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError("PointList needs a non-empty (k, n) array")
        object.__setattr__(self, "points", arr)


@dataclass(frozen=True)
class Curve:
    """A parametric curve t -> R^n over a closed interval.

    ``func`` maps a float array (m,) to points (m, n); scalar-only callables
    are tolerated and looped over.  ``deriv`` optionally supplies the analytic
    derivative with the same calling convention.  ``extendable`` marks the
    analytic form as valid beyond the truncated domain, which enables escape
    evidence tests for unbounded sets.
    """

    func: Callable
    domain: tuple
    samples: int
    deriv: Optional[Callable] = None
    extendable: bool = True

    def __post_init__(self):
        t0, t1 = float(self.domain[0]), float(self.domain[1])
        if not np.isfinite([t0, t1]).all() or t1 <= t0:
            raise EmptyDomainError(f"curve domain [{t0}, {t1}] is empty")
        if self.samples < 2:
            raise ValidationError("curves need at least 2 samples")
        object.__setattr__(self, "domain", (t0, t1))


@dataclass(frozen=True)
class Graph:
    """The graph of g: R^l -> R^p over a box, embedded as (x, g(x)).

    ``func`` maps (m, l) arrays to (m, p) arrays; ``grad`` optionally maps
    (m, l) to the Jacobian stack (m, p, l).
    """

    func: Callable
    domain: tuple          # ((lo, hi),) * l
    resolution: tuple      # per-axis sample counts
    grad: Optional[Callable] = None
    extendable: bool = True

    def __post_init__(self):
        dom = tuple((float(a), float(b)) for a, b in self.domain)
        res = tuple(int(r) for r in self.resolution)
        if len(dom) != len(res):
            raise ValidationError("graph domain and resolution lengths differ")
        for (a, b) in dom:
            if not np.isfinite([a, b]).all() or b <= a:
                raise EmptyDomainError(f"graph domain [{a}, {b}] is empty")
        for r in res:
            if r < 2:
                raise ValidationError("graphs need at least 2 samples per axis")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "resolution", res)


Piece = Union[PointList, Curve, Graph]


@dataclass(frozen=True)
class SetDescriptor:
    """A closed set given as a list of pieces against one signature."""

    signature: Signature
    pieces: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise EmptySetError(f"descriptor {self.label!r} has no pieces")
        object.__setattr__(self, "pieces", tuple(self.pieces))

    def piece_descriptor(self, index: int) -> "SetDescriptor":
        return SetDescriptor(self.signature, (self.pieces[index],),
                             label=f"{self.label}[{index}]")


@dataclass
class PointSample:
    """Flattened deterministic samples of a descriptor.

    ``piece_params`` holds, per piece, the parameter rows behind each sample:
    (k,) for curves, (k, l) for graphs, None for point lists.  ``spacings``
    is the largest Euclidean step between neighbouring samples of the piece,
    used to derive default cluster radii.
    """

    points: np.ndarray
    origin_piece: np.ndarray
    piece_slices: list
    piece_params: list
    spacings: list

    def __len__(self):
        return self.points.shape[0]


def eval_curve(piece: Curve, ts: np.ndarray, n: int) -> np.ndarray:
    """Evaluate a curve on a parameter array, tolerating scalar callables."""
    ts = np.asarray(ts, dtype=float)
    try:
        out = np.asarray(piece.func(ts), dtype=float)
        if out.shape == (ts.shape[0], n):
            return out
        if out.shape == (n, ts.shape[0]):
            return out.T
    except (TypeError, ValueError, IndexError):
        pass
    return np.array([np.asarray(piece.func(float(t)), dtype=float).reshape(n) for t in ts])


def eval_graph(piece: Graph, x: np.ndarray, p: int) -> np.ndarray:
    """Evaluate graph heights on an (m, l) array, tolerating scalar callables."""
    x = np.asarray(x, dtype=float)
    try:
        out = np.asarray(piece.func(x), dtype=float)
        if out.shape == (x.shape[0], p):
            return out
        if p == 1 and out.shape == (x.shape[0],):
            return out[:, None]
    except (TypeError, ValueError, IndexError):
        pass
    rows = []
    for row in x:
        val = np.asarray(piece.func(row), dtype=float).reshape(p)
        rows.append(val)
    return np.array(rows)


def graph_points(piece: Graph, x: np.ndarray, sig: Signature) -> np.ndarray:
    """Embed graph parameters (m, l) as points (x, g(x)) in R^n."""
    heights = eval_graph(piece, x, sig.p)
    return np.concatenate([x, heights], axis=1)


def _curve_samples(piece: Curve, sig: Signature):
    ts = np.linspace(piece.domain[0], piece.domain[1], piece.samples)
    pts = eval_curve(piece, ts, sig.n)
    if pts.shape != (piece.samples, sig.n):
        raise DimensionMismatchError(
            f"curve evaluates to shape {pts.shape}, expected ({piece.samples}, {sig.n})")
    spacing = float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return pts, ts, spacing


def _graph_samples(piece: Graph, sig: Signature):
    l = sig.l
    if len(piece.domain) != l:
        raise DimensionMismatchError(
            f"graph domain has {len(piece.domain)} axes, signature has l = {l}")
    axes = [np.linspace(a, b, r) for (a, b), r in zip(piece.domain, piece.resolution)]
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.stack([m.ravel() for m in mesh], axis=1)
    pts = graph_points(piece, x, sig)
    shape = tuple(piece.resolution) + (sig.n,)
    grid = pts.reshape(shape)
    spacing = 0.0
    for axis in range(l):
        step = np.diff(grid, axis=axis)
        if step.size:
            spacing = max(spacing, float(np.max(np.linalg.norm(step, axis=-1))))
    return pts, x, spacing


def sample(descriptor: SetDescriptor) -> PointSample:
    """Deterministically sample every piece of a descriptor."""
    sig = descriptor.signature
    blocks, params, spacings, slices, owners = [], [], [], [], []
    start = 0
    for idx, piece in enumerate(descriptor.pieces):
        if isinstance(piece, PointList):
            pts = sig.check_vector(piece.points)
            if pts.ndim != 2:
                raise ValidationError("point list must be a 2-d array")
            par, spacing = None, 0.0
        elif isinstance(piece, Curve):
            pts, par, spacing = _curve_samples(piece, sig)
        elif isinstance(piece, Graph):
            pts, par, spacing = _graph_samples(piece, sig)
        else:
            raise ValidationError(f"unknown piece type {type(piece).__name__}")
        if not np.isfinite(pts).all():
            raise NonFiniteValueError(
                f"piece {idx} of {descriptor.label!r} evaluated to a non-finite point")
        blocks.append(pts)
        params.append(par)
        spacings.append(spacing)
        slices.append(slice(start, start + pts.shape[0]))
        owners.append(np.full(pts.shape[0], idx, dtype=np.int64))
        start += pts.shape[0]
    points = np.concatenate(blocks, axis=0)
    if points.shape[0] == 0:
        raise EmptySetError(f"descriptor {descriptor.label!r} sampled to nothing")
    return PointSample(points, np.concatenate(owners), slices, params, spacings)


@dataclass
class AcausalityReport:
    """Outcome of the all-pairs separation scan.

    ``acausal`` is true iff every pair of distinct points satisfies
    Q(x - y) > 0; otherwise ``witness`` holds the lexicographically first
    violating index pair with its Q value.
    """

    acausal: bool
    witness: Optional[tuple] = None          # (i, j, q)
    witness_points: Optional[tuple] = None   # (x, y)
    violations: int = 0


@dataclass
class LipschitzEstimate:
    """Max pairwise ratio ||x-y||_p / ||x-y||_l over the sample."""

    l_hat: float
    witness: Optional[tuple] = None          # (i, j)


def check_acausal(sample_or_points, signature: Signature = None,
                  early_exit: bool = True) -> AcausalityReport:
    """Scan all pairs for Q(x - y) <= 0 with x != y.

    Accepts a PointSample plus the descriptor signature, or a raw (N, n)
    array with an explicit signature.  The witness is the first violating
    pair in lexicographic (i, j) order.  With ``early_exit`` off the scan
    continues and counts every violation.
    """
    pts, sig = _coerce(sample_or_points, signature)
    if pts.shape[0] < 1:
        raise ValidationError("check_acausal needs at least one point")
    diag = sig.diag
    n_pts = pts.shape[0]
    witness = None
    witness_points = None
    violations = 0
    for i in range(n_pts - 1):
        d = pts[i + 1:] - pts[i]
        q = np.sum(d * d * diag, axis=1)
        same = np.all(d == 0.0, axis=1)
        bad = np.flatnonzero((q <= 0.0) & ~same)
        if bad.size:
            if witness is None:
                j = int(bad[0]) + i + 1
                witness = (i, j, float(q[bad[0]]))
                witness_points = (pts[i].copy(), pts[j].copy())
                if early_exit:
                    return AcausalityReport(False, witness, witness_points, 1)
            violations += int(bad.size)
    if witness is None:
        return AcausalityReport(True)
    return AcausalityReport(False, witness, witness_points, violations)


def estimate_pseudo_lipschitz(sample_or_points, signature: Signature = None) -> LipschitzEstimate:
    """Max of ||x-y||_p / ||x-y||_l over all pairs; +inf when the projection
    onto the leading block is not injective on the sample."""
    pts, sig = _coerce(sample_or_points, signature)
    if pts.shape[0] < 2:
        raise ValidationError("the pseudo-Lipschitz estimate needs at least two points")
    l = sig.l
    best = 0.0
    witness = None
    n_pts = pts.shape[0]
    for i in range(n_pts - 1):
        d = pts[i + 1:] - pts[i]
        dl = np.sqrt(np.sum(d[:, :l] ** 2, axis=1))
        dp = np.sqrt(np.sum(d[:, l:] ** 2, axis=1))
        same = np.all(d == 0.0, axis=1)
        degenerate = (dl == 0.0) & ~same
        if degenerate.any():
            j = int(np.flatnonzero(degenerate)[0]) + i + 1
            return LipschitzEstimate(float("inf"), (i, j))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dl > 0.0, dp / np.where(dl > 0.0, dl, 1.0), 0.0)
        k = int(np.argmax(ratio)) if ratio.size else 0
        if ratio.size and ratio[k] > best:
            best = float(ratio[k])
            witness = (i, k + i + 1)
    return LipschitzEstimate(best, witness)


def _coerce(sample_or_points, signature):
    if isinstance(sample_or_points, PointSample):
        if signature is None:
            raise ValidationError("pass the descriptor signature along with a PointSample")
        return sample_or_points.points, signature
    if hasattr(sample_or_points, "points") and hasattr(sample_or_points, "signature"):
        # prepared scene duck type
        return sample_or_points.points, sample_or_points.signature
    if signature is None:
        raise ValidationError("raw point arrays need an explicit signature")
    return signature.check_vector(np.atleast_2d(np.asarray(sample_or_points, dtype=float))), signature


def curve_derivative(piece: Curve, t: float, sig: Signature) -> np.ndarray:
    """Analytic derivative when available, otherwise a central difference."""
    if piece.deriv is not None:
        return np.asarray(piece.deriv(t), dtype=float).reshape(sig.n)
    h = H_TAN_REL * (piece.domain[1] - piece.domain[0])
    pts = eval_curve(piece, np.array([t - h, t + h]), sig.n)
    return (pts[1] - pts[0]) / (2.0 * h)


def graph_jacobian(piece: Graph, x: np.ndarray, sig: Signature) -> np.ndarray:
    """Jacobian of g at a single parameter point, shape (p, l)."""
    x = np.asarray(x, dtype=float).reshape(1, sig.l)
    if piece.grad is not None:
        jac = np.asarray(piece.grad(x), dtype=float)
        return jac.reshape(sig.p, sig.l)
    jac = np.empty((sig.p, sig.l))
    for axis, (a, b) in enumerate(piece.domain):
        h = H_TAN_REL * (b - a)
        hi = x.copy()
        lo = x.copy()
        hi[0, axis] += h
        lo[0, axis] -= h
        jac[:, axis] = (eval_graph(piece, hi, sig.p)[0] - eval_graph(piece, lo, sig.p)[0]) / (2.0 * h)
    return jac


def tangent_directions(descriptor: SetDescriptor, piece_index: int, at) -> list:
    """Unit tangent directions (both signs) at an interior parameter.

    Curves give one +- pair from the parameter derivative; graphs give one
    +- pair per axis from the coordinate partials.  Point lists carry no
    tangent data.
    """
    sig = descriptor.signature
    piece = descriptor.pieces[piece_index]
    if isinstance(piece, PointList):
        raise PointListHasNoTangentError("point lists have no tangent directions")
    if isinstance(piece, Curve):
        t = float(at)
        t0, t1 = piece.domain
        if not (t0 < t < t1):
            raise BoundaryParameterError(f"parameter {t} is not interior to [{t0}, {t1}]")
        d = curve_derivative(piece, t, sig)
        norm = float(np.linalg.norm(d))
        if norm == 0.0:
            raise ValidationError("curve derivative vanishes; no tangent direction")
        u = d / norm
        return [u, -u]
    if isinstance(piece, Graph):
        x = np.asarray(at, dtype=float).reshape(sig.l)
        for axis, (a, b) in enumerate(piece.domain):
            if not (a < x[axis] < b):
                raise BoundaryParameterError(
                    f"parameter {x[axis]} is not interior to [{a}, {b}] on axis {axis}")
        jac = graph_jacobian(piece, x, sig)
        dirs = []
        for axis in range(sig.l):
            v = np.zeros(sig.n)
            v[axis] = 1.0
            v[sig.l:] = jac[:, axis]
            v = v / np.linalg.norm(v)
            dirs.extend([v, -v])
        return dirs
    raise ValidationError(f"unknown piece type {type(piece).__name__}")
