"""The disordered graph convolutional layer.

Each of the E filters owns an m-component Gaussian mixture, a learned
projection vector over node attributes, and a bias. For receptive field j
and filter e the forward output is

    out[j, e] = sum_i GMM_e(theta_i) * <projection_e, X_i> + bias_e

summed over the field's entries i, however many there are. Empty pad
fields contribute only the bias. The backward pass produces one gradient
per learnable scalar: E * (3m + d + 1) in total. theta and X are data, so
no input-side gradients exist (this layer sits first in the network).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import SIGMA_MIN, GmmParams, gaussian_pdf, init_gmm_params
from .preprocess import ReceptiveFieldSet


@dataclass
class DgclFilter:
    gmm: GmmParams
    projection: np.ndarray
    bias: float


@dataclass
class DgclLayer:
    """E filters stored as stacked arrays: (E, m) mixtures, (E, d) projections."""

    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    projections: np.ndarray
    biases: np.ndarray
    sigma_min: float = SIGMA_MIN

    def __post_init__(self):
        for name in ("weights", "means", "sigmas", "projections", "biases"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        E, m = self.weights.shape
        if self.means.shape != (E, m) or self.sigmas.shape != (E, m):
            raise ValueError("weights, means and sigmas must share shape (E, m)")
        if self.projections.ndim != 2 or self.projections.shape[0] != E:
            raise ValueError("projections must have shape (E, d)")
        if self.biases.shape != (E,):
            raise ValueError("biases must have shape (E,)")
        if np.any(self.sigmas <= 0):
            raise ValueError("all std-devs must be positive")

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    @property
    def attr_dim(self) -> int:
        return self.projections.shape[1]

    @property
    def filters(self) -> list[DgclFilter]:
        return [
            DgclFilter(
                gmm=GmmParams(self.weights[e].copy(), self.means[e].copy(), self.sigmas[e].copy()),
                projection=self.projections[e].copy(),
                bias=float(self.biases[e]),
            )
            for e in range(self.n_filters)
        ]

    @classmethod
    def from_filters(cls, filters: list[DgclFilter], sigma_min: float = SIGMA_MIN) -> "DgclLayer":
        return cls(
            weights=np.stack([f.gmm.weights for f in filters]),
            means=np.stack([f.gmm.means for f in filters]),
            sigmas=np.stack([f.gmm.sigmas for f in filters]),
            projections=np.stack([np.asarray(f.projection, dtype=np.float64) for f in filters]),
            biases=np.array([f.bias for f in filters]),
            sigma_min=sigma_min,
        )

    @classmethod
    def init(cls, n_filters: int, n_components: int, attr_dim: int, rng: np.random.Generator, sigma_min: float = SIGMA_MIN) -> "DgclLayer":
        """Seeded initialization; draw order is fixed (mixture weights, then
        projections) so identical seeds give identical layers."""
        gmms = [init_gmm_params(n_components, rng) for _ in range(n_filters)]
        limit = np.sqrt(6.0 / (attr_dim + 1))
        return cls(
            weights=np.stack([g.weights for g in gmms]),
            means=np.stack([g.means for g in gmms]),
            sigmas=np.stack([g.sigmas for g in gmms]),
            projections=rng.uniform(-limit, limit, (n_filters, attr_dim)),
            biases=np.zeros(n_filters),
            sigma_min=sigma_min,
        )

    def copy(self) -> "DgclLayer":
        return DgclLayer(
            weights=self.weights.copy(),
            means=self.means.copy(),
            sigmas=self.sigmas.copy(),
            projections=self.projections.copy(),
            biases=self.biases.copy(),
            sigma_min=self.sigma_min,
        )

    def n_parameters(self) -> int:
        E, m = self.weights.shape
        return E * (3 * m + self.attr_dim + 1)


@dataclass
class DgclCache:
    """Forward-pass bookkeeping reused by the backward pass."""

    thetas: np.ndarray        # (T,) concatenated entry thetas
    attrs: np.ndarray         # (T, d) concatenated entry attributes
    field_index: np.ndarray   # (T,) owning field per entry
    n_fields: int
    gmm_values: np.ndarray    # (T, E) mixture value per entry and filter
    projected: np.ndarray     # (T, E) projected attribute per entry and filter


@dataclass
class DgclGradients:
    d_weights: np.ndarray
    d_means: np.ndarray
    d_sigmas: np.ndarray
    d_projections: np.ndarray
    d_biases: np.ndarray


def dgcl_forward(layer: DgclLayer, rf: ReceptiveFieldSet) -> tuple[np.ndarray, DgclCache]:
    """Convolve one receptive-field set; returns a (w, E) map and the cache."""
    thetas, attrs, field_index = rf.packed()
    if attrs.shape[0] and attrs.shape[1] != layer.attr_dim:
        bad = int(field_index[0])
        raise ValueError(f"field {bad}: attribute dim {attrs.shape[1]} does not match layer attr_dim {layer.attr_dim}")
    if attrs.shape[0] == 0:
        attrs = attrs.reshape(0, layer.attr_dim)

    # (T, E, m) densities -> (T, E) mixture values.
    g = gaussian_pdf(thetas[:, None, None], layer.means[None], layer.sigmas[None])
    gmm_values = np.einsum("tem,em->te", g, layer.weights)
    projected = attrs @ layer.projections.T

    out = np.tile(layer.biases, (len(rf), 1))
    np.add.at(out, field_index, gmm_values * projected)

    cache = DgclCache(
        thetas=thetas,
        attrs=attrs,
        field_index=field_index,
        n_fields=len(rf),
        gmm_values=gmm_values,
        projected=projected,
    )
    return out, cache


def dgcl_backward(layer: DgclLayer, cache: DgclCache, upstream: np.ndarray) -> DgclGradients:
    """Chain upstream dLoss/dout (w, E) into gradients for every parameter."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (cache.n_fields, layer.n_filters):
        raise ValueError(f"upstream shape {upstream.shape} does not match ({cache.n_fields}, {layer.n_filters})")

    up = upstream[cache.field_index]                    # (T, E)
    d_biases = upstream.sum(axis=0)
    d_projections = (up * cache.gmm_values).T @ cache.attrs

    diff = cache.thetas[:, None, None] - layer.means[None]
    g = gaussian_pdf(cache.thetas[:, None, None], layer.means[None], layer.sigmas[None])
    scale = up * cache.projected                        # (T, E)
    d_weights = np.einsum("te,tem->em", scale, g)
    d_means = np.einsum("te,tem->em", scale, layer.weights[None] * diff / layer.sigmas[None] ** 2 * g)
    d_sigmas = np.einsum(
        "te,tem->em",
        scale,
        layer.weights[None] * g * (diff**2 / layer.sigmas[None] ** 3 - 1.0 / layer.sigmas[None]),
    )
    return DgclGradients(d_weights, d_means, d_sigmas, d_projections, d_biases)


def dgcl_forward_op_count(layer: DgclLayer, rf: ReceptiveFieldSet) -> dict[str, int]:
    """Operation counters for one forward call (used by scaling tests).

    Gaussian evaluations dominate: one per (entry, filter, component).
    """
    total_entries = int(rf.packed()[0].size)
    E, m = layer.weights.shape
    return {
        "gauss_evals": total_entries * E * m,
        "projection_mults": total_entries * E * layer.attr_dim,
    }
