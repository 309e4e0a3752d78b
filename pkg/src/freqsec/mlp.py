"""Multilayer perceptron nadir predictor with selectable asymmetric losses.

ReLU hidden layers, linear output.  The loss families are plain L1/L2 when
the over- and under-prediction weights agree, and their lin-lin / quad-quad
asymmetric variants otherwise: over-predicting the nadir (claiming the
system is safer than it is) can be penalised harder via ``c_plus``.

Training is deterministic mini-batch gradient descent (plain SGD or Adam)
on numpy arrays; no external ML framework is involved so the exact piecewise
-linear function that gets encoded into the MILP is fully reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Topology",
    "MlpParams",
    "LossSpec",
    "TrainConfig",
    "Metrics",
    "DivergenceError",
    "ZeroVarianceError",
    "forward",
    "forward_batch",
    "loss_value",
    "loss_gradient",
    "loss_and_gradients",
    "init_params",
    "train",
    "evaluate",
    "save_model",
    "load_model",
]


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


class ZeroVarianceError(ValueError):
    """R^2 is undefined when every label is identical."""


@dataclass(frozen=True)
class Topology:
    hidden_sizes: tuple[int, ...]
    input_dim: int
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if len(self.hidden_sizes) < 1:
            raise ValueError("at least one hidden layer is required")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")
        if self.input_dim < 1 or self.output_dim != 1:
            raise ValueError("input_dim must be >= 1 and output_dim must be 1")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, self.output_dim)


@dataclass
class MlpParams:
    """Layer weights/biases plus the input-scaling record.

    ``weights[l]`` has shape (fan_out, fan_in).  ``input_scale`` is the
    multiplier that was applied to each raw input to produce the training
    features (1 for commitment bits, 1/Gamma for the MW dispatch slot); the
    MILP encoder folds it into the first layer.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    topology: Topology
    input_scale: np.ndarray

    def check(self) -> None:
        dims = self.topology.layer_dims
        assert len(self.weights) == len(self.biases) == len(dims) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            assert w.shape == (dims[l + 1], dims[l])
            assert b.shape == (dims[l + 1],)
            assert np.all(np.isfinite(w)) and np.all(np.isfinite(b))
        assert self.input_scale.shape == (dims[0],)


@dataclass(frozen=True)
class LossSpec:
    family: str = "l2"       # "l1" | "l2"
    c_plus: float = 1.0      # weight on over-prediction (yhat >= y)
    c_minus: float = 1.0     # weight on under-prediction

    def __post_init__(self):
        if self.family not in ("l1", "l2"):
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.c_plus <= 0 or self.c_minus <= 0:
            raise ValueError("c_plus and c_minus must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"  # "sgd" | "adam"

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.seed + 1) < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size, learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class Metrics:
    mae: float
    r2: float
    conservative_proportion: float


def forward(params: MlpParams, x: np.ndarray) -> float:
    """Predicted nadir in Hz for one (already scaled) feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.topology.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected "
                         f"({params.topology.input_dim},)")
    h = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = w @ h + b
        if l != last:
            h = np.maximum(h, 0.0)
    return float(h[0])


def forward_batch(params: MlpParams, X: np.ndarray) -> np.ndarray:
    h = np.asarray(X, dtype=float)
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if l != last:
            h = np.maximum(h, 0.0)
    return h[:, 0]


def loss_value(spec: LossSpec, y: float, yhat: float) -> float:
    err = yhat - y
    c = spec.c_plus if err >= 0 else spec.c_minus
    return c * abs(err) if spec.family == "l1" else c * err * err


def loss_gradient(spec: LossSpec, y: float, yhat: float) -> float:
    """d loss / d yhat; the L1 kink at yhat == y takes subgradient 0."""
    err = yhat - y
    if spec.family == "l1":
        if err > 0:
            return spec.c_plus
        if err < 0:
            return -spec.c_minus
        return 0.0
    return 2.0 * (spec.c_plus if err >= 0 else spec.c_minus) * err


def _loss_batch(spec: LossSpec, y: np.ndarray, yhat: np.ndarray) -> float:
    err = yhat - y
    c = np.where(err >= 0, spec.c_plus, spec.c_minus)
    per = c * np.abs(err) if spec.family == "l1" else c * err * err
    return float(per.mean())


def _loss_grad_batch(spec: LossSpec, y: np.ndarray, yhat: np.ndarray) -> np.ndarray:
    err = yhat - y
    if spec.family == "l1":
        return np.where(err > 0, spec.c_plus, np.where(err < 0, -spec.c_minus, 0.0))
    return 2.0 * np.where(err >= 0, spec.c_plus, spec.c_minus) * err


def loss_and_gradients(params: MlpParams, X: np.ndarray, y: np.ndarray,
                       spec: LossSpec):
    """Mean loss over the batch and its gradients w.r.t. every weight/bias."""
    n = X.shape[0]
    last = len(params.weights) - 1
    pre, post = [], [np.asarray(X, dtype=float)]
    h = post[0]
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if l != last else z
        post.append(h)
    yhat = h[:, 0]
    loss = _loss_batch(spec, y, yhat)

    dW = [np.zeros_like(w) for w in params.weights]
    db = [np.zeros_like(b) for b in params.biases]
    delta = (_loss_grad_batch(spec, y, yhat) / n)[:, None]
    for l in range(last, -1, -1):
        dW[l] = delta.T @ post[l]
        db[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l]) * (pre[l - 1] > 0)
    return loss, dW, db


def init_params(topo: Topology, seed: int,
                input_scale: np.ndarray | None = None) -> MlpParams:
    """Glorot-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    dims = topo.layer_dims
    weights, biases = [], []
    for l in range(len(dims) - 1):
        bound = np.sqrt(6.0 / (dims[l] + dims[l + 1]))
        weights.append(rng.uniform(-bound, bound, size=(dims[l + 1], dims[l])))
        biases.append(np.zeros(dims[l + 1]))
    if input_scale is None:
        input_scale = np.ones(topo.input_dim)
    return MlpParams(weights=weights, biases=biases, topology=topo,
                     input_scale=np.asarray(input_scale, dtype=float))


def train(data, topo: Topology, loss: LossSpec, cfg: TrainConfig,
          init: MlpParams | None = None):
    """Mini-batch gradient descent on the train split.

    Returns the trained parameters and a per-epoch history of train/test
    loss.  Bit-for-bit deterministic for a fixed config.  ``init`` continues
    from existing parameters instead of a fresh seed, e.g. to push an
    already-fitted predictor toward an asymmetric loss.
    """
    X_train, y_train = data.train_xy()
    if len(y_train) == 0:
        raise ValueError("train split is empty")
    X_test, y_test = data.test_xy()

    n_gen_scale = np.ones(topo.input_dim)
    gamma = getattr(data, "gamma", None)
    if gamma is not None:
        half = topo.input_dim // 2
        n_gen_scale[half:] = 1.0 / gamma
    if init is not None:
        if init.topology != topo:
            raise ValueError("init parameters have a different topology")
        params = MlpParams(weights=[w.copy() for w in init.weights],
                           biases=[b.copy() for b in init.biases],
                           topology=topo, input_scale=n_gen_scale)
    else:
        params = init_params(topo, cfg.seed, input_scale=n_gen_scale)

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xBA7C4]))
    m = [np.zeros_like(w) for w in params.weights + params.biases]
    v = [np.zeros_like(w) for w in params.weights + params.biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    n = len(y_train)

    for epoch in range(cfg.epochs):
        # stepped decay: large steps to travel to the label scale, small
        # steps to settle tightly at the end
        lr = cfg.learning_rate
        if epoch >= int(0.92 * cfg.epochs):
            lr *= 0.04
        elif epoch >= int(0.75 * cfg.epochs):
            lr *= 0.2
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch_loss, dW, db = loss_and_gradients(params, X_train[idx],
                                                    y_train[idx], loss)
            if not np.isfinite(batch_loss):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}")
            grads = dW + db
            tensors = params.weights + params.biases
            step += 1
            for k, (theta, g) in enumerate(zip(tensors, grads)):
                if cfg.optimizer == "sgd":
                    theta -= lr * g
                else:
                    m[k] = beta1 * m[k] + (1 - beta1) * g
                    v[k] = beta2 * v[k] + (1 - beta2) * g * g
                    mhat = m[k] / (1 - beta1 ** step)
                    vhat = v[k] / (1 - beta2 ** step)
                    theta -= lr * mhat / (np.sqrt(vhat) + eps)
        train_loss = _loss_batch(loss, y_train, forward_batch(params, X_train))
        test_loss = (_loss_batch(loss, y_test, forward_batch(params, X_test))
                     if len(y_test) else float("nan"))
        if not np.isfinite(train_loss):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "test_loss": test_loss})
    return params, history


def evaluate(params: MlpParams, data, split: str = "test") -> Metrics:
    """MAE, R^2 and the fraction of conservative (yhat <= y) predictions."""
    if split not in ("train", "test"):
        raise ValueError("split must be 'train' or 'test'")
    X, y = data.train_xy() if split == "train" else data.test_xy()
    if len(y) == 0:
        raise ValueError(f"{split} split is empty")
    yhat = forward_batch(params, X)
    resid = yhat - y
    var = float(np.sum((y - y.mean()) ** 2))
    if var == 0.0:
        raise ZeroVarianceError("all labels identical; R^2 undefined")
    return Metrics(
        mae=float(np.abs(resid).mean()),
        r2=1.0 - float(np.sum(resid ** 2)) / var,
        conservative_proportion=float((yhat <= y).mean()),
    )


def save_model(params: MlpParams, path: str, loss_spec: LossSpec | None = None,
               train_seed: int | None = None) -> None:
    doc = {
        "topology": {"hidden_sizes": list(params.topology.hidden_sizes),
                     "input_dim": params.topology.input_dim,
                     "output_dim": params.topology.output_dim},
        "weights": [w.flatten().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "input_scale": params.input_scale.tolist(),
        "loss_spec": (None if loss_spec is None else
                      {"family": loss_spec.family, "c_plus": loss_spec.c_plus,
                       "c_minus": loss_spec.c_minus}),
        "train_seed": train_seed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path: str):
    """Returns (params, loss_spec_or_None, train_seed_or_None)."""
    with open(path) as fh:
        doc = json.load(fh)
    topo = Topology(hidden_sizes=tuple(doc["topology"]["hidden_sizes"]),
                    input_dim=doc["topology"]["input_dim"],
                    output_dim=doc["topology"]["output_dim"])
    dims = topo.layer_dims
    weights = [np.array(w).reshape(dims[l + 1], dims[l])
               for l, w in enumerate(doc["weights"])]
    biases = [np.array(b) for b in doc["biases"]]
    params = MlpParams(weights=weights, biases=biases, topology=topo,
                       input_scale=np.array(doc["input_scale"]))
    params.check()
    ls = doc.get("loss_spec")
    loss_spec = None if ls is None else LossSpec(**ls)
    return params, loss_spec, doc.get("train_seed")
