"""Quadratic forms of signature (l, p) and causal classification.

The space is R^n, n = l + p, with the diagonal form matrix
A = diag(+1 x l, -1 x p) and Q(x) = x^T A x.  All operations are pure and
accept batched arrays of shape (..., n).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import DependentVectorsError, DimensionMismatchError

# Scale-relative zero test used for causal and span classification.
TOL_ZERO = 1e-12


class CausalClass(Enum):
    """Causal type of a vector: sign of Q(x)."""

    SPACE_LIKE = "space_like"  # Q(x) > 0
    LIGHT_LIKE = "light_like"  # Q(x) < 0
    ISOTROPIC = "isotropic"    # Q(x) = 0


class PlaneClass(Enum):
    """Type of Q restricted to a 2-dimensional span."""

    EUCLIDEAN = "euclidean"                # definite (positive or negative)
    PSEUDO_EUCLIDEAN = "pseudo_euclidean"  # non-singular indefinite
    ISOTROPIC_PLANE = "isotropic_plane"    # singular


@dataclass(frozen=True)
class Signature:
    """Counts of +1 and -1 eigenvalues of the diagonal form matrix.

    ``l`` leading coordinates enter Q with +1, the remaining ``p`` with -1.
    Only diagonal +-1 matrices are representable, which makes A @ A == I exact.
    """

    l: int
    p: int

    def __post_init__(self):
        if int(self.l) != self.l or int(self.p) != self.p:
            raise ValueError("signature counts must be integers")
        if self.l < 1 or self.p < 0:
            raise ValueError(f"signature needs l >= 1 and p >= 0, got ({self.l}, {self.p})")

    @property
    def n(self) -> int:
        return self.l + self.p

    @cached_property
    def matrix(self) -> np.ndarray:
        a = np.ones(self.n)
        a[self.l:] = -1.0
        return np.diag(a)

    @cached_property
    def diag(self) -> np.ndarray:
        a = np.ones(self.n)
        a[self.l:] = -1.0
        return a

    def check_vector(self, x) -> np.ndarray:
        """Validate the trailing dimension of ``x`` and return it as float array."""
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.n:
            raise DimensionMismatchError(
                f"vector of shape {arr.shape} does not match signature ({self.l}, {self.p})"
            )
        return arr

    def quadratic_form(self, x) -> float | np.ndarray:
        """Q(x) = sum_{i<=l} x_i^2 - sum_{i>l} x_i^2, batched over leading axes."""
        arr = self.check_vector(x)
        q = np.sum(arr * arr * self.diag, axis=-1)
        return float(q) if q.ndim == 0 else q

    def pseudo_dot(self, x, y) -> float | np.ndarray:
        """Pseudo-scalar product x^T A y; symmetric and bilinear."""
        ax = self.check_vector(x)
        ay = self.check_vector(y)
        d = np.sum(ax * ay * self.diag, axis=-1)
        return float(d) if d.ndim == 0 else d

    def norms(self, x) -> tuple:
        """Euclidean norms of the leading l and trailing p coordinate blocks."""
        arr = self.check_vector(x)
        nl = np.sqrt(np.sum(arr[..., : self.l] ** 2, axis=-1))
        np_ = np.sqrt(np.sum(arr[..., self.l:] ** 2, axis=-1))
        if nl.ndim == 0:
            return float(nl), float(np_)
        return nl, np_

    def classify_vector(self, x) -> CausalClass:
        """Causal class of a single vector, with a scale-relative zero band."""
        arr = self.check_vector(x)
        if arr.ndim != 1:
            raise DimensionMismatchError("classify_vector expects a single vector")
        q = float(np.sum(arr * arr * self.diag))
        tol = TOL_ZERO * max(1.0, float(np.dot(arr, arr)))
        if q > tol:
            return CausalClass.SPACE_LIKE
        if q < -tol:
            return CausalClass.LIGHT_LIKE
        return CausalClass.ISOTROPIC

    def classify_span(self, x, y) -> PlaneClass:
        """Classify Q restricted to span{x, y} from the 2x2 pseudo Gram matrix.

        Uses the closed-form sign pattern of the symmetric 2x2 eigenvalues:
        det > 0 means definite, det < 0 means non-singular indefinite and
        |det| within the zero band means singular.  Raises
        DependentVectorsError when x, y are not linearly independent in the
        Euclidean sense.
        """
        ax = self.check_vector(x)
        ay = self.check_vector(y)
        if ax.ndim != 1 or ay.ndim != 1:
            raise DimensionMismatchError("classify_span expects single vectors")
        xx = float(np.dot(ax, ax))
        yy = float(np.dot(ay, ay))
        xy = float(np.dot(ax, ay))
        gram_e = xx * yy - xy * xy
        if gram_e <= TOL_ZERO * max(1.0, xx * yy):
            raise DependentVectorsError("span classification needs rank-2 input vectors")

        g00 = float(np.sum(ax * ax * self.diag))
        g11 = float(np.sum(ay * ay * self.diag))
        g01 = float(np.sum(ax * ay * self.diag))
        det = g00 * g11 - g01 * g01
        scale = max(abs(g00), abs(g11), abs(g01), 1.0)
        if abs(det) <= TOL_ZERO * scale * scale:
            return PlaneClass.ISOTROPIC_PLANE
        if det > 0.0:
            return PlaneClass.EUCLIDEAN
        return PlaneClass.PSEUDO_EUCLIDEAN

    def require_same(self, other: "Signature") -> None:
        if self != other:
            from .errors import SignatureMismatchError

            raise SignatureMismatchError(f"signatures differ: {self} vs {other}")
