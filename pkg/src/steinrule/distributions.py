"""Samplers for the joint law of the estimator errors (Gaussian, scale
mixtures of Gaussians, restriction-induced singular Gaussians) and the
inverse-moment series they are checked against."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaincinv, gammaln

from . import _rng
from .core_model import PSD_TOL, MomentConsistencyError

DIRAC_AT_ONE = "dirac-at-one"
GAMMA_MIXTURE = "gamma-mixture"
TWO_POINT_MIXTURE = "two-point-mixture"

SERIES_TAIL = 1e-12


class DivergentMomentError(ValueError):
    """The requested inverse moment does not exist."""


@dataclass(frozen=True)
class EllipticalSpec:
    """Scale-mixture weighting: a draw z from the mixing law scales one
    whole Gaussian sample by z^(-1/2).

    first_abs_moment is the integral of t times the absolute weighting
    function; for these nonnegative mixtures it is the mixing mean.
    """

    kind: str
    nu: Optional[float] = None
    z1: Optional[float] = None
    z2: Optional[float] = None
    w: Optional[float] = None

    @classmethod
    def dirac(cls):
        """Point mass at 1: plain Gaussian sampling."""
        return cls(DIRAC_AT_ONE)

    @classmethod
    def gamma_mixture(cls, nu):
        """Gamma(nu/2, rate nu/2) mixing; the draws are multivariate t(nu)."""
        if nu <= 2:
            raise ValueError(f"gamma mixing needs nu > 2 for finite covariance, got {nu}")
        return cls(GAMMA_MIXTURE, nu=float(nu))

    @classmethod
    def two_point(cls, z1, z2, w):
        """Mass w at z1 and 1 - w at z2."""
        if not (z1 > 0 and z2 > 0):
            raise ValueError("mixing atoms must be positive")
        if not 0 < w < 1:
            raise ValueError(f"weight must lie in (0, 1), got {w}")
        return cls(TWO_POINT_MIXTURE, z1=float(z1), z2=float(z2), w=float(w))

    @property
    def first_abs_moment(self):
        if self.kind == DIRAC_AT_ONE:
            return 1.0
        if self.kind == GAMMA_MIXTURE:
            return 1.0
        return self.w * self.z1 + (1.0 - self.w) * self.z2

    @property
    def inv_mean(self):
        """E[1/z]: the factor by which mixing inflates the covariance."""
        if self.kind == DIRAC_AT_ONE:
            return 1.0
        if self.kind == GAMMA_MIXTURE:
            return self.nu / (self.nu - 2.0)
        return self.w / self.z1 + (1.0 - self.w) / self.z2

    def mixing_draws(self, seed, count, stream=_rng.STREAM_MIXING, start=0):
        """One mixing value per sample, one uniform consumed per draw."""
        if self.kind == DIRAC_AT_ONE:
            return np.ones(count)
        u = _rng.uniforms(seed, count, 1, stream=stream, start=start)[:, 0]
        if self.kind == GAMMA_MIXTURE:
            half = self.nu / 2.0
            return gammaincinv(half, u) / half
        return np.where(u < self.w, self.z1, self.z2)


def _block_factor(m):
    # factor L with L L' equal to the 2k x 2k covariance of (U1, U2)
    C = np.block([[m.A, m.Sigma], [m.Sigma.T, m.Phi]])
    C = 0.5 * (C + C.T)
    vals, vecs = np.linalg.eigh(C)
    if vals[0] < -PSD_TOL * max(np.trace(C), 1.0):
        raise MomentConsistencyError(
            f"joint covariance has eigenvalue {vals[0]:.3e} below tolerance"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_joint_gaussian(m, count, seed, start=0):
    """Draws of (U1, U2): U1 mean zero with covariance A, U2 mean gamma with
    covariance Phi, cross-covariance Sigma. Returns two (count, k) arrays.

    Draw i is addressed by (seed, start + i), so index ranges can be
    generated in any batching and concatenated.
    """
    L = _block_factor(m)
    g = _rng.normals(seed, count, 2 * m.k, stream=_rng.STREAM_NOISE, start=start)
    U = g @ L.T
    U[:, m.k:] += m.gamma
    return U[:, :m.k], U[:, m.k:]


def sample_joint_elliptical(m, spec, count, seed, start=0):
    """Scale-mixture draws: z from the mixing law, then the Gaussian pair
    scaled by z^(-1/2) about its mean. Mixing uses its own stream, so the
    Gaussian deviates match sample_joint_gaussian draw for draw."""
    L = _block_factor(m)
    g = _rng.normals(seed, count, 2 * m.k, stream=_rng.STREAM_NOISE, start=start)
    z = spec.mixing_draws(seed, count, start=start)
    U = (g / np.sqrt(z)[:, None]) @ L.T
    U[:, m.k:] += m.gamma
    return U[:, :m.k], U[:, m.k:]


def sample_joint_singular(model, restriction, beta_true, sigma, count, seed, start=0):
    """Simulate (U1, U2) for the restricted competitor directly from
    regression noise, so the difference lives in the q-dimensional range
    of the constraint map by construction."""
    beta_true = np.asarray(beta_true, dtype=float)
    X = model.X
    XtX = X.T @ X
    XG = X @ np.linalg.inv(XtX)
    GRt = np.linalg.solve(XtX, restriction.Rmat.T)
    S = restriction.Rmat @ GRt
    J = GRt @ np.linalg.solve(0.5 * (S + S.T), np.eye(restriction.q))

    eps = sigma * _rng.normals(seed, count, model.n, stream=_rng.STREAM_NOISE,
                               start=start)
    U1 = eps @ XG
    beta_hat = beta_true + U1
    constraint_gap = beta_hat @ restriction.Rmat.T - restriction.r
    U2 = beta_hat - constraint_gap @ J.T - beta_true
    return U1, U2


def inv_chisq_mean(k, lam):
    """Mean of the inverse noncentral chi-square with k degrees of freedom
    and noncentrality lam, through its Poisson mixture of central terms:

        sum_j Poisson(lam/2)(j) / (k + 2j - 2)

    truncated once the remaining Poisson mass over the next denominator
    drops below 1e-12, a true tail bound since the terms decrease in j.
    """
    if k <= 2:
        raise DivergentMomentError(f"inverse mean needs k >= 3, got k={k}")
    if lam < 0:
        raise ValueError(f"noncentrality must be nonnegative, got {lam}")
    half = lam / 2.0
    if half == 0.0:
        return 1.0 / (k - 2)
    log_half = math.log(half)
    total = 0.0
    cum = 0.0
    j = 0
    while True:
        weight = math.exp(-half + j * log_half - gammaln(j + 1))
        total += weight / (k + 2 * j - 2)
        cum += weight
        j += 1
        if (1.0 - cum) / (k + 2 * j - 2) < SERIES_TAIL:
            return total


def elliptical_inv_quadnorm_mean(spec, k, mu_sq=0.0):
    """E[1 / Z'Z] for an elliptical Z with identity shape, dimension k, and
    location norm-squared mu_sq: the inverse chi-square mean mixed over the
    scale, E_z[z * inv_chisq_mean(k, z * mu_sq)]."""
    if k <= 2:
        raise DivergentMomentError(f"inverse quadratic mean needs k >= 3, got k={k}")
    if spec.kind == DIRAC_AT_ONE:
        return inv_chisq_mean(k, mu_sq)
    if spec.kind == TWO_POINT_MIXTURE:
        return (spec.w * spec.z1 * inv_chisq_mean(k, spec.z1 * mu_sq)
                + (1.0 - spec.w) * spec.z2 * inv_chisq_mean(k, spec.z2 * mu_sq))
    a = spec.nu / 2.0

    def integrand(t):
        log_dens = a * math.log(a) + (a - 1.0) * math.log(t) - a * t - gammaln(a)
        return t * math.exp(log_dens) * inv_chisq_mean(k, t * mu_sq)

    value, _ = quad(integrand, 0.0, np.inf)
    return value
