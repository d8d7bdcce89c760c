"""Dense numeric core: ReLU MLPs with analytic backprop, softmax cross-entropy,
SGD with momentum and parameter interpolation.

Matrices are 2-D float64 numpy arrays in row-major order (one sample per row).
A parameter snapshot is an ordered ``dict`` mapping a parameter name to an
array; two snapshots are congruent when they have the same names in the same
order with the same shapes.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, InputError


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    hidden_dims: tuple = ()
    output_dim: int = 1
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ConfigError(f"all MLP dimensions must be >= 1, got {dims}")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")

    @property
    def layer_dims(self):
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def n_layers(self):
        return len(self.hidden_dims) + 1


@dataclass
class ForwardCache:
    spec: MLPSpec
    params: dict
    inputs: list = field(default_factory=list)  # input to each linear layer
    pre_acts: list = field(default_factory=list)  # pre-activation of hidden layers


@dataclass
class GradCheckReport:
    max_rel_error: float
    param_count: int


def param_names(spec):
    names = []
    for i in range(spec.n_layers):
        names += [f"W{i}", f"b{i}"]
    return names


def init_mlp(spec, rng):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    params = {}
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        bound = 1.0 / np.sqrt(fan_in)
        params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = rng.uniform(-bound, bound, size=(fan_out,))
    return params


def zeros_like(params):
    return {name: np.zeros_like(v) for name, v in params.items()}


def copy_params(params):
    return {name: v.copy() for name, v in params.items()}


def check_congruent(a, b, what="snapshots"):
    if list(a) != list(b):
        raise ConfigError(f"{what} have different parameter names: {list(a)} vs {list(b)}")
    for name in a:
        if np.shape(a[name]) != np.shape(b[name]):
            raise ConfigError(
                f"{what} disagree on shape of {name!r}: {np.shape(a[name])} vs {np.shape(b[name])}"
            )


def _check_params(spec, params):
    expected = param_names(spec)
    if list(params) != expected:
        raise ConfigError(f"parameters {list(params)} do not match spec layers {expected}")
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        if params[f"W{i}"].shape != (fan_in, fan_out) or params[f"b{i}"].shape != (fan_out,):
            raise ConfigError(f"layer {i} parameters do not match dims ({fan_in}, {fan_out})")


def as_matrix(x, name="batch"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"{name} must be 2-D, got shape {x.shape}")
    return x


def mlp_forward(spec, params, batch):
    """Run ``batch`` through the MLP; return the output and a cache for backprop."""
    batch = as_matrix(batch)
    if batch.shape[1] != spec.input_dim:
        raise ConfigError(f"batch has {batch.shape[1]} columns, spec expects {spec.input_dim}")
    _check_params(spec, params)
    cache = ForwardCache(spec, params)
    h = batch
    last = spec.n_layers - 1
    for i in range(spec.n_layers):
        cache.inputs.append(h)
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        if i < last:
            cache.pre_acts.append(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
    return h, cache


def mlp_backward(cache, upstream_grad):
    """Backpropagate ``upstream_grad`` (d loss / d output) through a forward cache."""
    spec, params = cache.spec, cache.params
    g = as_matrix(upstream_grad, "upstream_grad")
    n = cache.inputs[0].shape[0]
    if g.shape != (n, spec.output_dim):
        raise ConfigError(f"upstream gradient shape {g.shape} != output shape {(n, spec.output_dim)}")
    grads = {}
    for i in reversed(range(spec.n_layers)):
        if i < spec.n_layers - 1:
            g = g * (cache.pre_acts[i] > 0.0)
        grads[f"W{i}"] = cache.inputs[i].T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        g = g @ params[f"W{i}"].T
    return {name: grads[name] for name in param_names(spec)}, g


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    logits = as_matrix(logits, "logits")
    labels = np.asarray(labels)
    n, m = logits.shape
    if labels.shape != (n,):
        raise InputError(f"expected {n} labels, got shape {labels.shape}")
    if n == 0:
        raise InputError("cannot compute a loss on an empty batch")
    if labels.min() < 0 or labels.max() >= m:
        raise InputError(f"labels must lie in [0, {m})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n


def sgd_momentum_step(params, grads, velocity, lr, momentum):
    """One SGD step with heavy-ball momentum.

    The convention is ``v <- momentum * v + grad`` followed by
    ``theta <- theta - lr * v``. Returns new ``(params, velocity)`` dicts.
    """
    check_congruent(params, grads, "params and grads")
    check_congruent(params, velocity, "params and velocity")
    if not lr > 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
    new_params, new_velocity = {}, {}
    for name in params:
        v = momentum * velocity[name] + grads[name]
        new_velocity[name] = v
        new_params[name] = params[name] - lr * v
    return new_params, new_velocity


def interpolate_params(current, init, alpha):
    """Elementwise ``(1 - alpha) * current + alpha * init``.

    Evaluated as ``current + alpha * (init - current)`` so that equal inputs
    come back unchanged bit for bit.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    check_congruent(current, init)
    if alpha == 0.0:
        return copy_params(current)
    if alpha == 1.0:
        return copy_params(init)
    return {name: current[name] + alpha * (init[name] - current[name]) for name in current}


def grad_check(loss_fn, params, grads, step=1e-5):
    """Compare analytic ``grads`` against central finite differences of ``loss_fn``.

    ``loss_fn`` maps a params dict to a scalar. The relative error of each
    entry is ``|a - n| / max(|a| + |n|, 1e-6)``; the floor keeps
    entries whose gradient is numerically zero from dominating on roundoff.
    """
    worst = 0.0
    count = 0
    probe = copy_params(params)
    for name, value in params.items():
        flat = probe[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss_fn(probe)
            flat[j] = orig - step
            down = loss_fn(probe)
            flat[j] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].reshape(-1)[j]
            err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)
            worst = max(worst, err)
            count += 1
    return GradCheckReport(max_rel_error=float(worst), param_count=count)
