"""Gaussian mixture kernel function and its parameter derivatives.

The mixture GMM(x) = sum_i  w_i * G(x; mu_i, sigma_i), with G the normal
density, maps a scalar node-to-key correlation to a convolution weight.
Component weights are unconstrained (the mixture is a function
approximator, not a probability density). Analytic partials:

    d/dw_i    = G(x; mu_i, sigma_i)
    d/dmu_i   = w_i * (x - mu_i) / sigma_i^2 * G(x; mu_i, sigma_i)
    d/dsigma_i= w_i * G(x; mu_i, sigma_i) * ((x - mu_i)^2 / sigma_i^3 - 1 / sigma_i)

All three are validated against the central finite-difference oracle in the
test suite; correctness is defined by that agreement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)

# Floor applied to every std-dev after a gradient step; keeps the density
# away from the sigma -> 0 singularity.
SIGMA_MIN = 1e-3


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: float
    std_dev: float


@dataclass
class GmmParams:
    """Parameter arrays of an m-component mixture (weights unconstrained)."""

    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        self.means = np.atleast_1d(np.asarray(self.means, dtype=np.float64))
        self.sigmas = np.atleast_1d(np.asarray(self.sigmas, dtype=np.float64))
        if not (self.weights.shape == self.means.shape == self.sigmas.shape) or self.weights.ndim != 1:
            raise ValueError("weights, means and sigmas must be 1-D arrays of equal length")
        if self.weights.size < 1:
            raise ValueError("a mixture needs at least one component")
        if np.any(self.sigmas <= 0):
            raise ValueError("all std-devs must be positive")

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(float(w), float(m), float(s)) for w, m, s in zip(self.weights, self.means, self.sigmas)]

    @classmethod
    def from_components(cls, components) -> "GmmParams":
        return cls(
            weights=np.array([c.weight for c in components]),
            means=np.array([c.mean for c in components]),
            sigmas=np.array([c.std_dev for c in components]),
        )


@dataclass
class GmmGradient:
    """Per-component partials (d_weights, d_means, d_sigmas), 3m values."""

    d_weights: np.ndarray
    d_means: np.ndarray
    d_sigmas: np.ndarray

    def to_array(self) -> np.ndarray:
        """Interleave as (w_1, mu_1, sigma_1, ..., w_m, mu_m, sigma_m)."""
        return np.column_stack([self.d_weights, self.d_means, self.d_sigmas]).ravel()


def gaussian_pdf(x, means, sigmas):
    """Normal density, broadcasting x against component arrays."""
    diff = np.subtract(x, means)
    return np.exp(-(diff * diff) / (2.0 * sigmas * sigmas)) / (SQRT_2PI * sigmas)


def gaussian_eval(component: GaussianComponent, x: float) -> float:
    """Density of one component at x; the component weight is NOT applied."""
    if component.std_dev <= 0:
        raise ValueError("std_dev must be positive")
    return float(gaussian_pdf(x, component.mean, component.std_dev))


def gmm_eval(params: GmmParams, x):
    """Weighted sum of component densities at x (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    g = gaussian_pdf(x[..., None], params.means, params.sigmas)
    out = g @ params.weights
    return float(out) if out.ndim == 0 else out


def gmm_grad(params: GmmParams, x: float) -> GmmGradient:
    """Analytic partials of gmm_eval(params, x) w.r.t. every parameter."""
    g = gaussian_pdf(x, params.means, params.sigmas)
    diff = x - params.means
    d_means = params.weights * diff / (params.sigmas**2) * g
    d_sigmas = params.weights * g * (diff**2 / params.sigmas**3 - 1.0 / params.sigmas)
    return GmmGradient(d_weights=g, d_means=d_means, d_sigmas=d_sigmas)


def gmm_eval_dx(params: GmmParams, x: float) -> float:
    """Derivative of the mixture in its argument x (used for cross-checks)."""
    g = gaussian_pdf(x, params.means, params.sigmas)
    return float(np.sum(params.weights * g * (params.means - x) / params.sigmas**2))


def finite_diff_grad(f, params: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a parameter vector.

    Returns (f(p + h e_j) - f(p - h e_j)) / (2h) for every coordinate j.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    work = np.array(params, dtype=np.float64)
    grad = np.zeros(work.size)
    flat = work.ravel()
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        hi = f(work)
        flat[j] = orig - h
        lo = f(work)
        flat[j] = orig
        grad[j] = (hi - lo) / (2.0 * h)
    return grad


def init_gmm_params(m: int, rng: np.random.Generator) -> GmmParams:
    """Seeded initialization: means spread over [0, 1] (the theta range under
    the inverse-hop rule), sigma 0.5, weights uniform in [-0.5, 0.5]."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return GmmParams(
        weights=rng.uniform(-0.5, 0.5, m),
        means=np.linspace(0.0, 1.0, m),
        sigmas=np.full(m, 0.5),
    )
