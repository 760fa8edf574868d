"""Exception hierarchy shared by all bayesdens modules."""


class BayesDensError(Exception):
    """Base class for all errors raised by this package."""


# --- data / preprocessing ---

class TooFewPoints(BayesDensError):
    """Fewer than the minimum number of finite data points."""


class DegenerateRange(BayesDensError):
    """All data values are equal; no range to map to the unit interval."""


class NonFinite(BayesDensError):
    """Input contains NaN or infinite values."""


class NonPositiveForLog(BayesDensError):
    """Log pre-transform requested but some values are <= 0."""


class OutOfRange(BayesDensError):
    """Evaluation points fall outside the supported interval."""


class GridTooSmall(BayesDensError):
    """Binning grid has too few points."""


# --- spline construction ---

class BadBasisSize(BayesDensError):
    """Requested number of basis functions outside the supported range."""


class EigFailure(BayesDensError):
    """Symmetric eigendecomposition of the penalty matrix did not converge."""


class RankDeficient(BayesDensError):
    """Penalty matrix does not have the expected two-dimensional null space."""


# --- model / sampling ---

class NonFiniteResult(BayesDensError):
    """A log density, gradient, or curve evaluation overflowed to non-finite."""


class SliceStuck(BayesDensError):
    """Slice sampler failed to accept after the shrinkage limit."""


class DivergenceLimit(BayesDensError):
    """Too many divergent transitions after warmup; the chain is mis-tuned."""


# --- estimation ---

class TooFewDraws(BayesDensError):
    """Not enough retained posterior draws to form credible bands."""
