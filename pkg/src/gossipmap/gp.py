"""Gaussian process regression over TSDF observations.

Three posterior paths share one squared-exponential kernel:

* ``exact_gp_posterior`` conditions on raw (location, value) pairs.
* ``spgp_posterior_reference`` is the pseudo-input approximation written
  out through its information-form intermediates. It exists as a test
  oracle for the compressed path and is not used at runtime.
* ``compressed_gp_posterior`` is the runtime path. It consumes only the
  aggregated per-lattice-point statistics (zeta, m): the noise term
  becomes sigma^2 * diag(m)^-1, so repeated observations at a pseudo-point
  collapse into one entry without changing the posterior.

All dense solves go through a symmetrized Cholesky with escalating jitter
(1e-10 up to 1e-4) before raising NumericalFailure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._backend import rbf_gram
from .grid import PseudoPointStats


class NumericalFailure(RuntimeError):
    """A regularized dense solve failed even after jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel settings: k(a,b) = c^2 exp(-|a-b|^2 / 2 l^2)."""

    amplitude: float = 1.0      # c
    length_scale: float = 0.1   # l (meters)
    noise_std: float = 0.1      # sigma (meters)

    def __post_init__(self):
        if self.amplitude <= 0 or self.length_scale <= 0 or self.noise_std <= 0:
            raise ValueError("kernel parameters must be positive")


@dataclass(frozen=True)
class GpPrior:
    """Constant prior mean plus kernel. The mean is the map value assumed
    for unobserved space (free space at full truncation distance)."""

    mean: float
    kernel: KernelParams

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError("prior mean must be finite")


@dataclass(frozen=True)
class GpPosterior:
    """Pointwise posterior over a query batch: mean and variance arrays."""

    mean: np.ndarray
    variance: np.ndarray


@dataclass(frozen=True)
class SpgpDerivation:
    """Intermediates of the pseudo-input derivation (information form)."""

    Gamma: np.ndarray
    Lambda: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    Omega: np.ndarray


_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def kernel_eval(a, b, kp: KernelParams) -> float:
    """Kernel value between two points."""
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    c2 = kp.amplitude * kp.amplitude
    return c2 * math.exp(-(dx * dx + dy * dy) * 0.5 / (kp.length_scale ** 2))


def _cholesky(mat: np.ndarray):
    """Factor a symmetric system, symmetrizing first and escalating jitter."""
    sym = 0.5 * (mat + mat.T)
    eye = np.eye(sym.shape[0])
    for jit in _JITTERS:
        try:
            return cho_factor(sym + jit * eye, lower=True, check_finite=False)
        except LinAlgError:
            continue
    raise NumericalFailure(
        f"Cholesky failed for a {sym.shape[0]}x{sym.shape[0]} system "
        f"even with jitter {_JITTERS[-1]:g}")


def _solve(factor, rhs: np.ndarray) -> np.ndarray:
    return cho_solve(factor, rhs, check_finite=False)


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    return arr.reshape(-1, 2)


def _check_distinct(locs: np.ndarray, what: str) -> None:
    if locs.shape[0] < 2:
        return
    dx = locs[:, 0][:, None] - locs[:, 0][None, :]
    dy = locs[:, 1][:, None] - locs[:, 1][None, :]
    d2 = dx * dx + dy * dy
    np.fill_diagonal(d2, np.inf)
    if d2.min() < 1e-24:
        raise NumericalFailure(f"coincident {what} make the system singular")


def _prior_posterior(query: np.ndarray, prior: GpPrior, noise_var: float) -> GpPosterior:
    k = query.shape[0]
    c2 = prior.kernel.amplitude ** 2
    return GpPosterior(mean=np.full(k, prior.mean),
                       variance=np.full(k, c2 + noise_var))


def exact_gp_posterior(train: Sequence, query, prior: GpPrior,
                       observation_noise: bool = True) -> GpPosterior:
    """Full GP posterior conditioned on raw (point, value) pairs.

    ``observation_noise=True`` adds sigma^2 to the predictive variance
    (noisy-target convention); the aggregated runtime path omits it, so
    comparisons against that path should pass False.
    """
    kp = prior.kernel
    q = _as_points(query)
    noise_var = kp.noise_std ** 2 if observation_noise else 0.0
    if len(train) == 0:
        return _prior_posterior(q, prior, noise_var)

    x = _as_points([p for p, _ in train])
    y = np.asarray([v for _, v in train], dtype=np.float64)

    kxx = rbf_gram(x, x, kp.amplitude, kp.length_scale)
    kxx[np.diag_indices_from(kxx)] += kp.noise_std ** 2
    factor = _cholesky(kxx)

    kqx = rbf_gram(q, x, kp.amplitude, kp.length_scale)
    alpha = _solve(factor, y - prior.mean)
    mean = prior.mean + kqx @ alpha

    w = _solve(factor, kqx.T)
    var = kp.amplitude ** 2 - np.einsum("ij,ji->i", kqx, w) + noise_var
    return GpPosterior(mean=mean, variance=np.maximum(var, 0.0))


def spgp_derivation(train: Sequence, pseudo_locs, prior: GpPrior) -> SpgpDerivation:
    """Information-form intermediates of the pseudo-input approximation."""
    kp = prior.kernel
    p = _as_points(pseudo_locs)
    if p.shape[0] == 0:
        raise ValueError("pseudo_locs must be non-empty")
    _check_distinct(p, "pseudo-points")

    x = _as_points([pt for pt, _ in train])
    y = np.asarray([v for _, v in train], dtype=np.float64)

    kpp = rbf_gram(p, p, kp.amplitude, kp.length_scale)
    kpp_f = _cholesky(kpp)

    m = p.shape[0]
    if x.shape[0] == 0:
        Gamma = np.zeros((m, m))
        Lam = np.zeros((0, 0))
        gam = np.zeros(m)
    else:
        kxp = rbf_gram(x, p, kp.amplitude, kp.length_scale)
        kxx = rbf_gram(x, x, kp.amplitude, kp.length_scale)
        Lam = kxx - kxp @ _solve(kpp_f, kxp.T)
        lam_noise = Lam + (kp.noise_std ** 2) * np.eye(x.shape[0])
        lam_f = _cholesky(lam_noise)
        Gamma = kxp.T @ _solve(lam_f, kxp)
        gam = kxp.T @ _solve(lam_f, y - prior.mean)

    kg_f = _cholesky(kpp + Gamma)
    inner = _solve(kpp_f, kpp + Gamma)       # kpp^-1 (kpp + Gamma)
    Omega = _solve(kpp_f, inner.T)           # kpp^-1 (kpp + Gamma) kpp^-1
    Omega = 0.5 * (Omega + Omega.T)
    mu_p = prior.mean + kpp @ _solve(kg_f, gam)
    omega = Omega @ mu_p
    return SpgpDerivation(Gamma=Gamma, Lambda=Lam, gamma=gam, omega=omega,
                          Omega=Omega)


def spgp_posterior_reference(train: Sequence, pseudo_locs, query,
                             prior: GpPrior,
                             observation_noise: bool = False) -> GpPosterior:
    """Pseudo-input GP posterior via the information-form derivation.

    Test-oracle path only; the runtime uses compressed_gp_posterior.
    """
    kp = prior.kernel
    q = _as_points(query)
    der = spgp_derivation(train, pseudo_locs, prior)
    p = _as_points(pseudo_locs)

    noise_var = kp.noise_std ** 2 if observation_noise else 0.0

    kpp = rbf_gram(p, p, kp.amplitude, kp.length_scale)
    kpp_f = _cholesky(kpp)
    omega_f = _cholesky(der.Omega)

    mu_bar = _solve(omega_f, der.omega)      # Omega^-1 omega = mu(P)
    kqp = rbf_gram(q, p, kp.amplitude, kp.length_scale)
    mean = prior.mean + kqp @ _solve(kpp_f, mu_bar - prior.mean)

    a = _solve(kpp_f, kqp.T)                 # kpp^-1 kpq, shape (m, k)
    sig = _solve(omega_f, a)                 # Omega^-1 kpp^-1 kpq
    var = (np.einsum("ij,ij->j", a, sig)
           + kp.amplitude ** 2
           - np.einsum("ij,ji->i", kqp, a)
           + noise_var)
    return GpPosterior(mean=mean, variance=np.maximum(var, 0.0))


def compressed_gp_posterior(stats: Sequence[PseudoPointStats], query,
                            prior: GpPrior,
                            observation_noise: bool = False) -> GpPosterior:
    """Posterior from aggregated pseudo-point statistics.

    Solves with Z^-1 = k0(P,P) + sigma^2 diag(m)^-1; equivalent to exact
    conditioning on every raw observation snapped to the pseudo-points.
    """
    kp = prior.kernel
    q = _as_points(query)
    noise_var = kp.noise_std ** 2 if observation_noise else 0.0
    if len(stats) == 0:
        return _prior_posterior(q, prior, noise_var)

    p = np.asarray([s.location for s in stats], dtype=np.float64)
    zeta = np.asarray([s.zeta for s in stats], dtype=np.float64)
    m = np.asarray([s.m for s in stats], dtype=np.float64)
    if np.any(m <= 0.0):
        raise NumericalFailure("pseudo-point weight m must be positive")
    _check_distinct(p, "pseudo-points")

    zinv = rbf_gram(p, p, kp.amplitude, kp.length_scale)
    zinv[np.diag_indices_from(zinv)] += kp.noise_std ** 2 / m
    factor = _cholesky(zinv)

    kqp = rbf_gram(q, p, kp.amplitude, kp.length_scale)
    mean = prior.mean + kqp @ _solve(factor, zeta - prior.mean)

    w = _solve(factor, kqp.T)
    var = kp.amplitude ** 2 - np.einsum("ij,ji->i", kqp, w) + noise_var
    return GpPosterior(mean=mean, variance=np.maximum(var, 0.0))
