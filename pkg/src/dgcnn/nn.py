"""Network head and training math: 1-D convolution over the key-node axis,
dense layers, softmax, squared-error loss, SGD updates and whole-network
forward/backward orchestration.

The stack is fixed: disordered graph convolution -> one standard 1-D
convolutional layer (kernel 5, ReLU) -> one ReLU dense hidden layer ->
one linear dense layer -> softmax. Squared error on the softmax outputs is
the default objective; cross-entropy is available as a non-default
alternative. All gradients are computed by hand and checked against the
central finite-difference oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dgcl import DgclCache, DgclGradients, DgclLayer, dgcl_backward, dgcl_forward
from .gmm import SIGMA_MIN
from .preprocess import PreprocessConfig, ReceptiveFieldSet

CONV_KERNEL = 5

LOSSES = ("squared_error", "cross_entropy")


@dataclass
class Conv1dLayer:
    """Valid-mode 1-D convolution along the key-node axis, ReLU activation."""

    weights: np.ndarray  # (C, E, CONV_KERNEL)
    bias: np.ndarray     # (C,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 3 or self.weights.shape[2] != CONV_KERNEL:
            raise ValueError(f"conv weights must have shape (C, E, {CONV_KERNEL})")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("conv bias must have shape (C,)")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def init(cls, in_channels: int, out_channels: int, rng: np.random.Generator) -> "Conv1dLayer":
        fan_in = in_channels * CONV_KERNEL
        fan_out = out_channels * CONV_KERNEL
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return cls(weights=rng.uniform(-limit, limit, (out_channels, in_channels, CONV_KERNEL)), bias=np.zeros(out_channels))

    def copy(self) -> "Conv1dLayer":
        return Conv1dLayer(self.weights.copy(), self.bias.copy())


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("dense weights must be 2-D")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("dense bias must match the output dimension")
        if self.activation not in ("relu", "identity"):
            raise ValueError("activation must be 'relu' or 'identity'")

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator, activation: str = "relu") -> "DenseLayer":
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        return cls(weights=rng.uniform(-limit, limit, (out_dim, in_dim)), bias=np.zeros(out_dim), activation=activation)

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass(frozen=True)
class ModelConfig:
    """Learnable-layer sizes: E filters with m mixture components each,
    C conv channels, H hidden units."""

    filters: int = 8
    components: int = 10
    conv_channels: int = 8
    hidden_dim: int = 64
    sigma_min: float = SIGMA_MIN

    def __post_init__(self):
        for name in ("filters", "components", "conv_channels", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.sigma_min <= 0:
            raise ValueError("sigma_min must be positive")


@dataclass(frozen=True)
class LearningRates:
    """Per-group step sizes: mixture weights, means, std-devs, and everything
    else (projections, biases, conv and dense parameters)."""

    gmm_w: float
    gmm_mu: float
    gmm_sigma: float
    head: float

    @classmethod
    def from_base(cls, rate: float, sigma_scale: float = 0.1) -> "LearningRates":
        # std-dev updates are stiff near the floor, so they get a smaller step
        return cls(gmm_w=rate, gmm_mu=rate, gmm_sigma=rate * sigma_scale, head=rate)

    def __post_init__(self):
        for name in ("gmm_w", "gmm_mu", "gmm_sigma", "head"):
            if getattr(self, name) <= 0:
                raise ValueError(f"learning rate {name} must be positive")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    loss: str = "squared_error"
    sigma_lr_scale: float = 0.1
    rates: LearningRates | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")

    def learning_rates(self) -> LearningRates:
        return self.rates if self.rates is not None else LearningRates.from_base(self.learning_rate, self.sigma_lr_scale)


@dataclass
class Network:
    """The full classifier, bundled with the preprocessing that feeds it."""

    dgcl: DgclLayer
    conv: Conv1dLayer
    hidden: DenseLayer
    output: DenseLayer
    preprocess: PreprocessConfig
    class_count: int

    def __post_init__(self):
        w = self.preprocess.key_node_count
        if w < CONV_KERNEL:
            raise ValueError(f"key_node_count {w} is smaller than the conv kernel {CONV_KERNEL}")
        if self.conv.in_channels != self.dgcl.n_filters:
            raise ValueError("conv in_channels must equal the number of DGCL filters")
        flat = (w - CONV_KERNEL + 1) * self.conv.out_channels
        if self.hidden.weights.shape[1] != flat:
            raise ValueError(f"hidden layer expects input dim {self.hidden.weights.shape[1]}, conv produces {flat}")
        if self.output.weights.shape != (self.class_count, self.hidden.weights.shape[0]):
            raise ValueError("output layer shape must be (class_count, hidden_dim)")

    @property
    def hidden_dim(self) -> int:
        return self.hidden.weights.shape[0]

    def copy(self) -> "Network":
        return Network(
            dgcl=self.dgcl.copy(),
            conv=self.conv.copy(),
            hidden=self.hidden.copy(),
            output=self.output.copy(),
            preprocess=self.preprocess,
            class_count=self.class_count,
        )


def build_network(model: ModelConfig, preprocess: PreprocessConfig, attr_dim: int, class_count: int, seed: int) -> Network:
    """Construct a seeded network; the parameter draw order is fixed."""
    rng = np.random.default_rng(seed)
    dgcl = DgclLayer.init(model.filters, model.components, attr_dim, rng, sigma_min=model.sigma_min)
    conv = Conv1dLayer.init(model.filters, model.conv_channels, rng)
    flat = (preprocess.key_node_count - CONV_KERNEL + 1) * model.conv_channels
    hidden = DenseLayer.init(flat, model.hidden_dim, rng, activation="relu")
    output = DenseLayer.init(model.hidden_dim, class_count, rng, activation="identity")
    return Network(dgcl=dgcl, conv=conv, hidden=hidden, output=output, preprocess=preprocess, class_count=class_count)


# ---------------------------------------------------------------------------
# layer forward/backward


@dataclass
class ConvCache:
    x: np.ndarray
    pre: np.ndarray


@dataclass
class ConvGradients:
    d_weights: np.ndarray
    d_bias: np.ndarray


def conv1d_forward(layer: Conv1dLayer, x: np.ndarray) -> tuple[np.ndarray, ConvCache]:
    """x: (w, E) -> ReLU valid convolution of length w - 4, shape (w-4, C)."""
    w, E = x.shape
    if E != layer.in_channels:
        raise ValueError(f"input has {E} channels, conv expects {layer.in_channels}")
    if w < CONV_KERNEL:
        raise ValueError(f"input length {w} is smaller than the kernel {CONV_KERNEL}")
    out_len = w - CONV_KERNEL + 1
    pre = np.tile(layer.bias, (out_len, 1))
    for t in range(CONV_KERNEL):
        pre += x[t : t + out_len] @ layer.weights[:, :, t].T
    return np.maximum(pre, 0.0), ConvCache(x=x, pre=pre)


def conv1d_backward(layer: Conv1dLayer, cache: ConvCache, upstream: np.ndarray) -> tuple[ConvGradients, np.ndarray]:
    out_len = cache.pre.shape[0]
    if upstream.shape != cache.pre.shape:
        raise ValueError(f"upstream shape {upstream.shape} does not match conv output {cache.pre.shape}")
    d_pre = upstream * (cache.pre > 0)
    d_weights = np.zeros_like(layer.weights)
    d_input = np.zeros_like(cache.x)
    for t in range(CONV_KERNEL):
        d_weights[:, :, t] = d_pre.T @ cache.x[t : t + out_len]
        d_input[t : t + out_len] += d_pre @ layer.weights[:, :, t]
    return ConvGradients(d_weights=d_weights, d_bias=d_pre.sum(axis=0)), d_input


@dataclass
class DenseCache:
    x: np.ndarray
    pre: np.ndarray


@dataclass
class DenseGradients:
    d_weights: np.ndarray
    d_bias: np.ndarray


def dense_forward(layer: DenseLayer, x: np.ndarray) -> tuple[np.ndarray, DenseCache]:
    if x.shape != (layer.weights.shape[1],):
        raise ValueError(f"dense input shape {x.shape} does not match weight shape {layer.weights.shape}")
    pre = layer.weights @ x + layer.bias
    out = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    return out, DenseCache(x=x, pre=pre)


def dense_backward(layer: DenseLayer, cache: DenseCache, upstream: np.ndarray) -> tuple[DenseGradients, np.ndarray]:
    if upstream.shape != cache.pre.shape:
        raise ValueError(f"upstream shape {upstream.shape} does not match dense output {cache.pre.shape}")
    d_pre = upstream * (cache.pre > 0) if layer.activation == "relu" else upstream
    return DenseGradients(d_weights=np.outer(d_pre, cache.x), d_bias=d_pre), layer.weights.T @ d_pre


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax; outputs sum to 1 and never overflow."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_backward(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    """Jacobian-vector product of softmax: d_logits from d_probs."""
    return probs * (d_probs - float(d_probs @ probs))


def loss_and_grad(predicted: np.ndarray, target: np.ndarray, kind: str = "squared_error") -> tuple[float, np.ndarray]:
    """Loss and its gradient in the predicted class probabilities.

    Default is the squared error 0.5 * sum_b (t_b - p_b)^2 with gradient
    (p_b - t_b); ``cross_entropy`` is the optional alternative.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ValueError("predicted and target must have the same shape")
    ones = np.count_nonzero(target == 1.0)
    if ones != 1 or np.count_nonzero(target) != 1:
        raise ValueError("target must be one-hot")
    if kind == "squared_error":
        diff = predicted - target
        return 0.5 * float(diff @ diff), diff
    if kind == "cross_entropy":
        p = np.clip(predicted, 1e-12, None)
        return -float(target @ np.log(p)), -target / p
    raise ValueError(f"loss must be one of {LOSSES}")


def one_hot(label: int, class_count: int) -> np.ndarray:
    if not (0 <= label < class_count):
        raise ValueError(f"label {label} outside [0, {class_count})")
    t = np.zeros(class_count)
    t[label] = 1.0
    return t


# ---------------------------------------------------------------------------
# whole-network forward/backward


@dataclass
class NetCaches:
    dgcl_out: np.ndarray
    dgcl_cache: DgclCache
    conv_out: np.ndarray
    conv_cache: ConvCache
    hidden_out: np.ndarray
    hidden_cache: DenseCache
    logits: np.ndarray
    logits_cache: DenseCache
    probs: np.ndarray


@dataclass
class NetworkGradients:
    dgcl: DgclGradients
    conv: ConvGradients
    hidden: DenseGradients
    output: DenseGradients

    def add_(self, other: "NetworkGradients") -> "NetworkGradients":
        self.dgcl.d_weights += other.dgcl.d_weights
        self.dgcl.d_means += other.dgcl.d_means
        self.dgcl.d_sigmas += other.dgcl.d_sigmas
        self.dgcl.d_projections += other.dgcl.d_projections
        self.dgcl.d_biases += other.dgcl.d_biases
        self.conv.d_weights += other.conv.d_weights
        self.conv.d_bias += other.conv.d_bias
        self.hidden.d_weights += other.hidden.d_weights
        self.hidden.d_bias += other.hidden.d_bias
        self.output.d_weights += other.output.d_weights
        self.output.d_bias += other.output.d_bias
        return self

    def scale_(self, factor: float) -> "NetworkGradients":
        for arr in (
            self.dgcl.d_weights, self.dgcl.d_means, self.dgcl.d_sigmas,
            self.dgcl.d_projections, self.dgcl.d_biases,
            self.conv.d_weights, self.conv.d_bias,
            self.hidden.d_weights, self.hidden.d_bias,
            self.output.d_weights, self.output.d_bias,
        ):
            arr *= factor
        return self


def zero_gradients(network: Network) -> NetworkGradients:
    return NetworkGradients(
        dgcl=DgclGradients(
            d_weights=np.zeros_like(network.dgcl.weights),
            d_means=np.zeros_like(network.dgcl.means),
            d_sigmas=np.zeros_like(network.dgcl.sigmas),
            d_projections=np.zeros_like(network.dgcl.projections),
            d_biases=np.zeros_like(network.dgcl.biases),
        ),
        conv=ConvGradients(d_weights=np.zeros_like(network.conv.weights), d_bias=np.zeros_like(network.conv.bias)),
        hidden=DenseGradients(d_weights=np.zeros_like(network.hidden.weights), d_bias=np.zeros_like(network.hidden.bias)),
        output=DenseGradients(d_weights=np.zeros_like(network.output.weights), d_bias=np.zeros_like(network.output.bias)),
    )


def net_forward(network: Network, rf: ReceptiveFieldSet) -> tuple[np.ndarray, NetCaches]:
    """Class probabilities for one receptive-field set, with caches."""
    dgcl_out, dgcl_cache = dgcl_forward(network.dgcl, rf)
    conv_out, conv_cache = conv1d_forward(network.conv, dgcl_out)
    flat = conv_out.ravel()
    hidden_out, hidden_cache = dense_forward(network.hidden, flat)
    logits, logits_cache = dense_forward(network.output, hidden_out)
    probs = softmax(logits)
    return probs, NetCaches(
        dgcl_out=dgcl_out,
        dgcl_cache=dgcl_cache,
        conv_out=conv_out,
        conv_cache=conv_cache,
        hidden_out=hidden_out,
        hidden_cache=hidden_cache,
        logits=logits,
        logits_cache=logits_cache,
        probs=probs,
    )


def net_backward(network: Network, caches: NetCaches, target: np.ndarray, loss: str = "squared_error") -> tuple[float, NetworkGradients]:
    """Backpropagate the loss; returns (loss value, gradients for every
    learnable scalar, each exactly once)."""
    loss_value, d_probs = loss_and_grad(caches.probs, target, kind=loss)
    d_logits = softmax_backward(caches.probs, d_probs)
    out_grads, d_hidden = dense_backward(network.output, caches.logits_cache, d_logits)
    hidden_grads, d_flat = dense_backward(network.hidden, caches.hidden_cache, d_hidden)
    conv_grads, d_dgcl_out = conv1d_backward(network.conv, caches.conv_cache, d_flat.reshape(caches.conv_out.shape))
    dgcl_grads = dgcl_backward(network.dgcl, caches.dgcl_cache, d_dgcl_out)
    return loss_value, NetworkGradients(dgcl=dgcl_grads, conv=conv_grads, hidden=hidden_grads, output=out_grads)


def sgd_apply(network: Network, grads: NetworkGradients, rates: LearningRates) -> None:
    """In-place descent step, per-group step sizes, std-devs clamped to the
    layer's floor afterwards."""
    network.dgcl.weights -= rates.gmm_w * grads.dgcl.d_weights
    network.dgcl.means -= rates.gmm_mu * grads.dgcl.d_means
    network.dgcl.sigmas -= rates.gmm_sigma * grads.dgcl.d_sigmas
    np.maximum(network.dgcl.sigmas, network.dgcl.sigma_min, out=network.dgcl.sigmas)
    network.dgcl.projections -= rates.head * grads.dgcl.d_projections
    network.dgcl.biases -= rates.head * grads.dgcl.d_biases
    network.conv.weights -= rates.head * grads.conv.d_weights
    network.conv.bias -= rates.head * grads.conv.d_bias
    network.hidden.weights -= rates.head * grads.hidden.d_weights
    network.hidden.bias -= rates.head * grads.hidden.d_bias
    network.output.weights -= rates.head * grads.output.d_weights
    network.output.bias -= rates.head * grads.output.d_bias


# ---------------------------------------------------------------------------
# flat parameter vector (canonical order, used by checkpoints and gradcheck)

PARAM_GROUPS = (
    ("gmm_w", lambda n: n.dgcl.weights, lambda g: g.dgcl.d_weights),
    ("gmm_mu", lambda n: n.dgcl.means, lambda g: g.dgcl.d_means),
    ("gmm_sigma", lambda n: n.dgcl.sigmas, lambda g: g.dgcl.d_sigmas),
    ("projection", lambda n: n.dgcl.projections, lambda g: g.dgcl.d_projections),
    ("dgcl_bias", lambda n: n.dgcl.biases, lambda g: g.dgcl.d_biases),
    ("conv_w", lambda n: n.conv.weights, lambda g: g.conv.d_weights),
    ("conv_b", lambda n: n.conv.bias, lambda g: g.conv.d_bias),
    ("hidden_w", lambda n: n.hidden.weights, lambda g: g.hidden.d_weights),
    ("hidden_b", lambda n: n.hidden.bias, lambda g: g.hidden.d_bias),
    ("output_w", lambda n: n.output.weights, lambda g: g.output.d_weights),
    ("output_b", lambda n: n.output.bias, lambda g: g.output.d_bias),
)


def params_to_vector(network: Network) -> np.ndarray:
    return np.concatenate([get(network).ravel() for _, get, _ in PARAM_GROUPS])


def vector_to_params(network: Network, vec: np.ndarray) -> None:
    """Write a flat vector back into the network's arrays (in place)."""
    pos = 0
    for _, get, _ in PARAM_GROUPS:
        arr = get(network)
        arr.flat[:] = vec[pos : pos + arr.size]
        pos += arr.size
    if pos != vec.size:
        raise ValueError(f"vector has {vec.size} entries, network has {pos} parameters")


def grads_to_vector(grads: NetworkGradients) -> np.ndarray:
    return np.concatenate([get(grads).ravel() for _, _, get in PARAM_GROUPS])


def param_group_slices(network: Network) -> dict[str, slice]:
    slices = {}
    pos = 0
    for name, get, _ in PARAM_GROUPS:
        size = get(network).size
        slices[name] = slice(pos, pos + size)
        pos += size
    return slices
