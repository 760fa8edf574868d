"""Cubic spline basis on [0, 1] with a whitened roughness penalty.

The basis starts from clamped cubic B-splines with equally spaced interior
knots.  The curvature penalty matrix Omega (integrals of products of second
derivatives) is diagonalized and the B-spline columns are rotated/scaled so
that the penalty becomes the identity.  In those coordinates an i.i.d.
Gaussian prior on the spline coefficients encodes smoothness, and the design
matrix is [1, x, z_1(x), ..., z_K(x)].
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import BadBasisSize, EigFailure, OutOfRange, RankDeficient

DEGREE = 3
MIN_BASIS = 5
# Eigenvalues at or below NULL_TOL * max eigenvalue are the constant+linear
# null space of the curvature penalty.
NULL_TOL = 1e-10


@dataclass(frozen=True)
class SplineDesign:
    """Whitened spline basis evaluated on a fixed grid.

    ``canonical_transform`` maps B-spline coefficients (K+2 of them) to the
    K penalized coordinates; ``design`` holds rows (1, x_l, z_1(x_l), ...,
    z_K(x_l)) for the construction points.  The object can evaluate the same
    row layout at arbitrary points in [0, 1].
    """

    knots: np.ndarray
    canonical_transform: np.ndarray
    design: np.ndarray

    @property
    def K(self) -> int:
        return self.canonical_transform.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """Rows (1, x, z_1(x), ..., z_K(x)) at new points in [0, 1]."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        B = bspline_design(x, self.knots)
        out = np.empty((x.size, 2 + self.K))
        out[:, 0] = 1.0
        out[:, 1] = x
        out[:, 2:] = B @ self.canonical_transform
        return out


def default_knots(K: int) -> np.ndarray:
    """Full clamped cubic knot sequence with K - 2 equally spaced interior knots.

    Boundary knots 0 and 1 are repeated four times, so the sequence supports
    K + 2 cubic B-splines and, after removal of the two-dimensional penalty
    null space, exactly K penalized basis functions.
    """
    if K < MIN_BASIS:
        raise BadBasisSize(f"need at least {MIN_BASIS} basis functions, got {K}")
    interior = np.arange(1, K - 1, dtype=float) / (K - 1)
    return np.concatenate([np.zeros(4), interior, np.ones(4)])


def bspline_design(x, knots) -> np.ndarray:
    """Evaluate all cubic B-splines at points x in [0, 1].

    Returns a dense |x| x (K+2) matrix; rows sum to one and have at most
    four nonzero entries.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size and (x.min() < knots[0] or x.max() > knots[-1]):
        raise OutOfRange("evaluation points must lie within the knot span")
    return BSpline.design_matrix(x, knots, DEGREE).toarray()


def omega_penalty(knots) -> np.ndarray:
    """Curvature penalty Omega[j, k] = integral of B_j'' * B_k'' over [0, 1].

    Second derivatives of cubics are piecewise linear, so their products are
    piecewise quadratic and three-point Simpson quadrature per inter-knot
    interval is exact.
    """
    breaks = np.unique(knots)
    a, b = breaks[:-1], breaks[1:]
    h = b - a
    pts = np.concatenate([a, 0.5 * (a + b), b])
    wts = np.concatenate([h / 6.0, 4.0 * h / 6.0, h / 6.0])
    nbas = len(knots) - DEGREE - 1
    d2 = BSpline(knots, np.eye(nbas), DEGREE).derivative(2)(pts)
    omega = d2.T @ (wts[:, None] * d2)
    return 0.5 * (omega + omega.T)


def canonical_basis(B, omega, x, knots) -> SplineDesign:
    """Whiten the penalty and assemble the design matrix.

    Eigendecomposes Omega, keeps the K eigenvectors with positive
    eigenvalues, and scales them by inverse square-root eigenvalues, so the
    penalized coordinates satisfy transform' Omega transform = I.  The two
    zero eigenvalues correspond to constant and linear functions, which the
    design carries explicitly in its first two columns.
    """
    omega = np.asarray(omega, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    try:
        eigval, eigvec = np.linalg.eigh(omega)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(str(exc)) from exc
    tol = NULL_TOL * float(eigval[-1])
    positive = eigval > tol
    K = omega.shape[0] - 2
    if int(positive.sum()) != K:
        raise RankDeficient(
            f"expected {K} positive eigenvalues and a 2-dim null space, "
            f"found {int(positive.sum())} above tolerance"
        )
    transform = eigvec[:, positive] / np.sqrt(eigval[positive])
    design = np.empty((x.size, 2 + K))
    design[:, 0] = 1.0
    design[:, 1] = x
    design[:, 2:] = B @ transform
    return SplineDesign(
        knots=np.asarray(knots, dtype=float),
        canonical_transform=transform,
        design=design,
    )


def build_design(x, K: int) -> SplineDesign:
    """Convenience composition: knots -> B-splines -> penalty -> whitened design."""
    knots = default_knots(K)
    B = bspline_design(x, knots)
    omega = omega_penalty(knots)
    return canonical_basis(B, omega, x, knots)
