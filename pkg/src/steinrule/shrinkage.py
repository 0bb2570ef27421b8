"""The combined-estimator class: base + c * h(base, competitor) * (base - competitor),
its named members, and the weight-function contracts they must satisfy."""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .core_model import fit_ols

INVERSE_SQ_NORM = "inverse-sq-norm"
SMOOTH_INVERSE = "smooth-inverse"
ZERO = "zero"
ONE = "one"
CUSTOM = "custom"

# differences with norm under this count as "base equals competitor"
DEGENERATE_NORM = 1e-14


class InvalidRiskMomentError(ValueError):
    """The curvature moment must be positive to define an optimal c."""


class DegenerateDifferenceWarning(UserWarning):
    """Base and competitor coincide, so the shrinkage direction is undefined."""


@dataclass(frozen=True)
class HFunction:
    """Weight function h applied to the pair (base, competitor).

    q0 is the constant with |h(x, y)| * ||x - y||^2 <= q0 over all pairs;
    the bound checks need it. Weights that look only at x - y are marked
    depends_only_on_difference, which the singular-case theory requires.
    """

    kind: str
    q0: float
    depends_only_on_difference: bool = True
    p: Optional[float] = None
    fn: Optional[Callable] = None

    @classmethod
    def inverse_sq_norm(cls):
        """h = 1 / ||x - y||^2; the weight behind the classical rule."""
        return cls(INVERSE_SQ_NORM, q0=1.0)

    @classmethod
    def smooth_inverse(cls, p):
        """h = 1 / (1 + ||x - y||^p), bounded everywhere, for p >= 2."""
        if p < 2:
            raise ValueError(f"smooth inverse needs p >= 2, got {p}")
        return cls(SMOOTH_INVERSE, q0=_smooth_inverse_q0(float(p)), p=float(p))

    @classmethod
    def zero(cls):
        """h = 0: the combined estimator collapses to the base."""
        return cls(ZERO, q0=0.0)

    @classmethod
    def one(cls):
        """h = 1: with c = -1 the combined estimator is the competitor.

        Unbounded product ||x - y||^2 * |h|, so no finite q0 exists.
        """
        return cls(ONE, q0=np.inf)

    @classmethod
    def custom(cls, fn, q0, depends_only_on_difference=True):
        return cls(CUSTOM, q0=float(q0),
                   depends_only_on_difference=depends_only_on_difference, fn=fn)

    def values(self, beta_hat, beta_tilde):
        """Evaluate on rows of estimate pairs; returns one weight per row."""
        beta_hat = np.atleast_2d(np.asarray(beta_hat, dtype=float))
        beta_tilde = np.atleast_2d(np.asarray(beta_tilde, dtype=float))
        diff = beta_hat - beta_tilde
        sq = np.einsum("ij,ij->i", diff, diff)
        return self._values_from(beta_hat, beta_tilde, sq)

    def _values_from(self, beta_hat, beta_tilde, sq_norms):
        if self.kind == ZERO:
            return np.zeros_like(sq_norms)
        if self.kind == ONE:
            return np.ones_like(sq_norms)
        if self.kind == INVERSE_SQ_NORM:
            with np.errstate(divide="ignore"):
                return 1.0 / sq_norms
        if self.kind == SMOOTH_INVERSE:
            return 1.0 / (1.0 + sq_norms ** (self.p / 2.0))
        return np.array([self.fn(x, y) for x, y in zip(beta_hat, beta_tilde)],
                        dtype=float)

    def __call__(self, x, y):
        return float(self.values(np.asarray(x)[None, :], np.asarray(y)[None, :])[0])


def _smooth_inverse_q0(p):
    # sup over s > 0 of s / (1 + s^(p/2)); at p = 2 the sup is the limit 1
    if p == 2.0:
        return 1.0
    res = minimize_scalar(lambda t: -np.exp(t) / (1.0 + np.exp(t * p / 2.0)),
                          bounds=(-40.0, 40.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(-res.fun)


@dataclass(frozen=True)
class ShrinkageSpec:
    """One member of the class: a weight function and a fixed multiplier c."""

    h: HFunction
    c: float

    def __post_init__(self):
        if not np.isfinite(self.c):
            raise ValueError(f"c must be finite, got {self.c}")


@dataclass(frozen=True)
class EstimatorDef:
    """A named estimator for sweeps and reports.

    c = None means the multiplier is recomputed from each sample as minus
    the plug-in risk-gap estimate (the data-driven member of the class).
    """

    name: str
    h: HFunction
    c: Optional[float] = None

    def __post_init__(self):
        if self.c is not None and not np.isfinite(self.c):
            raise ValueError(f"c must be finite or None, got {self.c}")


def spsl(name="spsl"):
    """The data-driven member: inverse-square-norm weight, c fitted per sample."""
    return EstimatorDef(name, HFunction.inverse_sq_norm(), None)


def apply_rule(beta_hat, beta_tilde, h, c):
    """Vectorized rule over rows: base + c * h * (base - competitor).

    c may be a scalar or one value per row. Rows where the two estimates
    coincide (norm below 1e-14) are returned as the base, with a warning,
    since the direction is undefined there.
    """
    beta_hat = np.atleast_2d(np.asarray(beta_hat, dtype=float))
    beta_tilde = np.atleast_2d(np.asarray(beta_tilde, dtype=float))
    diff = beta_hat - beta_tilde
    sq = np.einsum("ij,ij->i", diff, diff)
    hv = h._values_from(beta_hat, beta_tilde, sq)
    degen = sq < DEGENERATE_NORM**2
    if degen.any():
        warnings.warn(
            f"{int(degen.sum())} degenerate difference(s): returning the base estimate",
            DegenerateDifferenceWarning,
        )
        hv = np.where(degen, 0.0, hv)
    c = np.asarray(c, dtype=float)
    return beta_hat + (c * hv)[:, None] * diff


def combine(pair, spec):
    """Apply one ShrinkageSpec to one EstimatePair."""
    return apply_rule(pair.beta_hat, pair.beta_tilde, spec.h, spec.c)[0]


def combine_batch(beta_hat, beta_tilde, spec):
    return apply_rule(beta_hat, beta_tilde, spec.h, spec.c)


def spsl_c_hat(model, sigma_hat_matrix):
    """Plug-in risk gap a_hat = S^2 trace((X'X)^-1) - trace(Sigma_hat).

    S^2 is the residual variance estimate from the base fit. The
    data-driven member of the class uses c = -a_hat with the
    inverse-square-norm weight.
    """
    resid = model.y - model.X @ fit_ols(model)
    s2 = float(resid @ resid) / (model.n - model.k)
    gram_inv_trace = float(np.trace(np.linalg.inv(model.X.T @ model.X)))
    return s2 * gram_inv_trace - float(np.trace(np.asarray(sigma_hat_matrix)))


def optimal_c(eta_h, omega_h):
    """Risk-minimizing shrink weight eta(h) / omega(h).

    Shrink-weight convention: weight c pulls the base estimate toward the
    competitor, so the equivalent apply_rule coefficient is -c.
    """
    if not (np.isfinite(omega_h) and omega_h > 0):
        raise InvalidRiskMomentError(f"omega(h) must be positive, got {omega_h}")
    return eta_h / omega_h


def dominance_interval(eta_h, omega_h):
    """Open interval of shrink weights with risk strictly below the base."""
    c_star = optimal_c(eta_h, omega_h)
    return (min(0.0, 2.0 * c_star), max(0.0, 2.0 * c_star))
