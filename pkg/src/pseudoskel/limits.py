"""Kuratowski convergence certificates for families of sets.

A family holds descriptors X_t for a finite decreasing parameter list that
must include the limit member t = 0 (extrapolating to an unsampled limit is
refused).  Convergence is certified on compact windows only: finite samples
cannot witness global set convergence.  Rate thresholds fit c1 * t + c2 over
the family's parameter grid and require the offset c2 to vanish at the
sampling resolution, the weakest usable certificate when no rates are known.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distance import QueryOpts, Status, prepare, query_batch
from .errors import EmptyInWindowError, ValidationError, VacantProbeError
from .sets import SetDescriptor, estimate_pseudo_lipschitz
from .skeleton import GridSpec, medial_axis_field


@dataclass(frozen=True)
class SetFamily:
    """Descriptors X_t for t decreasing to 0, with the limit member at t = 0."""

    members: tuple   # ((t, SetDescriptor), ...) sorted by decreasing t

    def __post_init__(self):
        pairs = sorted(((float(t), d) for t, d in self.members), key=lambda p: -p[0])
        if not pairs:
            raise ValidationError("a set family needs at least the t = 0 member")
        ts = [t for t, _ in pairs]
        if len(set(ts)) != len(ts):
            raise ValidationError("family parameters must be distinct")
        if any(t < 0 for t in ts):
            raise ValidationError("family parameters must be non-negative")
        if ts[-1] != 0.0:
            raise ValidationError("the t = 0 limit member is mandatory")
        sig = pairs[0][1].signature
        for _, d in pairs:
            if d.signature != sig:
                raise ValidationError("family members must share one signature")
        object.__setattr__(self, "members", tuple(pairs))

    @property
    def signature(self):
        return self.members[0][1].signature

    @property
    def limit(self) -> SetDescriptor:
        return self.members[-1][1]

    def positive(self):
        return self.members[:-1]


def _clip_to_window(points: np.ndarray, window) -> np.ndarray:
    keep = np.ones(points.shape[0], dtype=bool)
    for axis, (lo, hi) in enumerate(window):
        keep &= (points[:, axis] >= lo) & (points[:, axis] <= hi)
    return points[keep]


def kuratowski_window_distance(a_points, b_points, window) -> tuple:
    """Two-sided sup-inf Euclidean deviations restricted to a compact window.

    Returns (sup_{a in A & W} inf_B ||a-b||, sup_{b in B & W} inf_A ||a-b||).
    The inf runs over the full other sample; only the sup side is clipped.
    """
    a_points = np.atleast_2d(np.asarray(a_points, dtype=float))
    b_points = np.atleast_2d(np.asarray(b_points, dtype=float))
    window = tuple((float(lo), float(hi)) for lo, hi in window)
    a_in = _clip_to_window(a_points, window)
    b_in = _clip_to_window(b_points, window)
    if a_in.shape[0] == 0 or b_in.shape[0] == 0:
        raise EmptyInWindowError("both samples need points inside the window")

    def one_sided(src, dst):
        out = 0.0
        for start in range(0, src.shape[0], 1024):
            chunk = src[start:start + 1024]
            d = np.sqrt(np.sum((chunk[:, None, :] - dst[None, :, :]) ** 2, axis=2))
            out = max(out, float(d.min(axis=1).max()))
        return out

    return one_sided(a_in, b_points), one_sided(b_in, a_points)


def _fit_line(ts, values):
    """Least-squares fit values ~ c1 * t + c2."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size == 1:
        return 0.0, float(values[0])
    design = np.stack([ts, np.ones_like(ts)], axis=1)
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(coef[0]), float(coef[1])


@dataclass
class RhoLimitReport:
    t_values: list
    eta: list                 # per-t excess deviation beyond the Lipschitz cone
    rho_limit: float
    l0_hat: float
    c1: float
    c2: float
    eta_tol: float
    passed: bool


def rho_family_limit(family: SetFamily, a, probes, opts: QueryOpts = QueryOpts(),
                     eta_tol: Optional[float] = None) -> RhoLimitReport:
    """Certify rho_t(x) -> rho_0(a) as (t, x) -> (0, a) on given probe points.

    The deviation |rho_t(x) - rho_0(a)| must fit under L0 ||x - a|| + eta(t)
    with the empirical local Lipschitz constant L0 and eta fitted linearly
    in t; the certificate passes when the fitted offset is at most eta_tol
    (default: twice the median probe offset).
    """
    sig = family.signature
    a = np.asarray(a, dtype=float).reshape(sig.n)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    pts = np.vstack([a[None, :], probes])
    offsets = np.linalg.norm(probes - a, axis=1)

    rho_at = {}
    for t, desc in family.members:
        results = query_batch(prepare(desc), pts, opts)
        for r, p in zip(results, pts):
            if r.status is not Status.ATTAINED:
                raise VacantProbeError(f"probe {p} vacant for family member t = {t}")
        rho_at[t] = np.array([r.rho for r in results])

    rho0_a = float(rho_at[0.0][0])
    l0 = 0.0
    for t, vals in rho_at.items():
        diffs = np.abs(vals[1:] - vals[0])
        nz = offsets > 0
        if nz.any():
            l0 = max(l0, float(np.max(diffs[nz] / offsets[nz])))
    ts, eta = [], []
    for t, vals in sorted(rho_at.items(), reverse=True):
        excess = np.abs(vals[1:] - rho0_a) - l0 * offsets
        excess = np.concatenate([[abs(vals[0] - rho0_a)], np.maximum(excess, 0.0)])
        ts.append(t)
        eta.append(float(np.max(excess)))
    pos = [(t, e) for t, e in zip(ts, eta) if t > 0]
    c1, c2 = _fit_line([t for t, _ in pos], [e for _, e in pos])
    if eta_tol is None:
        eta_tol = 2.0 * float(np.median(offsets)) if offsets.size else 1e-9
    passed = c2 <= eta_tol and eta[-1] <= eta_tol + 1e-12
    return RhoLimitReport(ts, eta, rho0_a, l0, c1, c2, eta_tol, passed)


@dataclass
class MUpperLimitReport:
    t_values: list
    deviations: list          # per-t excess of reps beyond delta of the limit reps
    delta_limit: float
    c1: float
    c2: float
    kappa_tol: float
    passed: bool


def m_upper_limit(family: SetFamily, a, opts: QueryOpts = QueryOpts(),
                  kappa_tol: Optional[float] = None) -> MUpperLimitReport:
    """Certify limsup m_t(a) inside m_0(a): every representative of m_t(a)
    must come within delta + kappa(t) of a representative of m_0(a), with
    kappa fitted linearly in t.  The converse inclusion is not claimed."""
    sig = family.signature
    a = np.asarray(a, dtype=float).reshape(sig.n)

    reps = {}
    radii = {}
    for t, desc in family.members:
        result = query_batch(prepare(desc), a[None, :], opts)[0]
        if result.status is not Status.ATTAINED:
            raise VacantProbeError(f"probe {a} vacant for family member t = {t}")
        reps[t] = np.array([c.representative for c in result.closest_clusters])
        radii[t] = max(c.radius for c in result.closest_clusters)
    delta0 = radii[0.0]
    reps0 = reps[0.0]
    ts, devs = [], []
    for t in sorted(reps, reverse=True):
        d = np.sqrt(np.sum((reps[t][:, None, :] - reps0[None, :, :]) ** 2, axis=2))
        worst = float(np.max(np.min(d, axis=1)))
        ts.append(t)
        devs.append(max(0.0, worst - delta0))
    pos = [(t, e) for t, e in zip(ts, devs) if t > 0]
    c1, c2 = _fit_line([t for t, _ in pos], [e for _, e in pos])
    if kappa_tol is None:
        prep0 = prepare(family.limit)
        kappa_tol = max(2.0 * max(prep0.sample.spacings), delta0, 1e-9)
    passed = c2 <= kappa_tol and devs[-1] <= kappa_tol + 1e-12
    return MUpperLimitReport(ts, devs, delta0, c1, c2, kappa_tol, passed)


@dataclass
class MedialLiminfReport:
    t_values: list
    deviations: list          # per-t one-sided deviation of M_0 into M_t
    tol: float
    threshold: Optional[float]
    worst_witness: Optional[np.ndarray]
    limit_medial_count: int
    warnings: list
    passed: bool


def medial_liminf_check(family: SetFamily, grid: GridSpec, eta_cells: float = 2.0,
                        opts: Optional[QueryOpts] = None, workers: int = 1) -> MedialLiminfReport:
    """Certify liminf M_t contains M_0 on a window grid.

    For every medial point of the limit member there must be a medial point
    of X_t within eta_cells grid cells, for all t below the reported
    threshold.  An empty limit medial set passes vacuously (the converse
    inclusion is never claimed).  Members violating acausality or the
    pseudo-Lipschitz bound on window samples produce warnings.
    """
    notes = []
    window = grid.bounds
    for t, desc in family.members:
        prep = prepare(desc)
        inside = _clip_to_window(prep.points, window)
        if inside.shape[0] >= 2:
            est = estimate_pseudo_lipschitz(inside, family.signature)
            if not est.l_hat < 1.0:
                notes.append(f"member t = {t}: window sample pseudo-Lipschitz ratio "
                             f"{est.l_hat:.3g} is not < 1")
    for note in notes:
        warnings.warn(note, stacklevel=2)

    fields = {t: medial_axis_field(desc, grid, opts, workers=workers)
              for t, desc in family.members}
    m0 = fields[0.0].M_points
    tol = eta_cells * grid.max_spacing
    ts, devs = [], []
    worst_witness = None
    if m0.shape[0] == 0:
        ts = [t for t, _ in family.positive()]
        return MedialLiminfReport(ts, [0.0] * len(ts), tol, max(ts) if ts else None,
                                  None, 0, notes, True)
    worst = -1.0
    for t, _ in family.positive():
        mt = fields[t].M_points
        if mt.shape[0] == 0:
            ts.append(t)
            devs.append(float("inf"))
            continue
        d = np.sqrt(np.sum((m0[:, None, :] - mt[None, :, :]) ** 2, axis=2))
        mins = d.min(axis=1)
        k = int(np.argmax(mins))
        ts.append(t)
        devs.append(float(mins[k]))
        if mins[k] > worst:
            worst = float(mins[k])
            worst_witness = m0[k]
    # threshold = largest t with every smaller positive t passing
    threshold = None
    for t, dev in sorted(zip(ts, devs)):
        if dev <= tol:
            threshold = t
        else:
            break
    passed = threshold is not None
    return MedialLiminfReport(ts, devs, tol, threshold, worst_witness,
                              int(m0.shape[0]), notes, passed)
