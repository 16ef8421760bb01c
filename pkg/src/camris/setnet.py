"""Beam-set prediction networks with explicit numpy forward/backward passes.

The main architecture applies one shared fully-connected ReLU stack to every
detection column, sums the resulting per-detection score vectors, and
squashes the sum through a sigmoid, so the output is invariant to the order
of the detections and to extra zero padding. Two baselines share the code:

  set_sum       shared stack -> masked sum pooling -> sigmoid
  reuse_concat  shared stack -> concatenation -> linear head -> sigmoid
  vanilla_fc    one flat MLP on the flattened input matrix -> sigmoid

Padded (all-zero) columns are excluded from the sum pooling, and the summed
columns are first brought into a canonical lexicographic order, which makes
the permutation and padding invariances bit-exact rather than approximate.
Training is mini-batch descent (adam by default; plain sgd and momentum
selectable) on the elementwise binary cross-entropy, averaged over codebook
entries and batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import json
import numpy as np

from .seeding import substream

VARIANTS = ("set_sum", "reuse_concat", "vanilla_fc")

MODEL_FORMAT = "camris-model"
MODEL_VERSION = 1

_CLAMP = 1e-12


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(scores, target) -> float:
    """Elementwise binary cross-entropy, averaged over every entry.

    Scores are clamped away from {0, 1} before the logs, so saturated
    predictions stay finite.
    """
    scores = np.clip(np.asarray(scores, dtype=np.float64), _CLAMP, 1.0 - _CLAMP)
    target = np.asarray(target, dtype=np.float64)
    return float(-np.mean(target * np.log(scores) + (1.0 - target) * np.log1p(-scores)))


class MlpStack:
    """Fully-connected stack, ReLU on hidden layers, linear output."""

    def __init__(self, widths, rng: np.random.Generator | None = None):
        self.widths = [int(w) for w in widths]
        if len(self.widths) < 2:
            raise ValueError("a stack needs at least input and output widths")
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray):
        """x: (n, d0) -> output (n, dL) plus caches for backward."""
        caches = []
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            caches.append((a, z))
            a = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
        return a, caches

    def backward(self, caches, grad_out: np.ndarray):
        """Gradient of a scalar loss w.r.t. parameters and the stack input."""
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        dz = grad_out
        for i in reversed(range(self.n_layers)):
            a_in, z = caches[i]
            if i < self.n_layers - 1:
                dz = dz * (z > 0)
            grads_w[i] = a_in.T @ dz
            grads_b[i] = dz.sum(axis=0)
            dz = dz @ self.weights[i].T
        return dz, grads_w, grads_b

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def _canonical_columns(v: np.ndarray) -> np.ndarray:
    """Nonzero columns of v in lexicographic order, shape (n, d)."""
    mask = np.any(v != 0.0, axis=0)
    cols = v[:, mask]
    if cols.shape[1] == 0:
        return cols.T
    order = np.lexsort(cols[::-1])
    return cols[:, order].T


class _Network:
    """Shared plumbing for the three variants."""

    variant: str = ""

    def __init__(self, class_count: int, u_max: int, codebook_size: int, hidden):
        self.class_count = int(class_count)
        self.u_max = int(u_max)
        self.codebook_size = int(codebook_size)
        self.hidden = tuple(int(h) for h in hidden)
        if self.class_count < 1 or self.u_max < 1 or self.codebook_size < 1:
            raise ValueError("network dimensions must be positive")

    @property
    def input_dim(self) -> int:
        return self.class_count + 4

    def forward(self, v: np.ndarray) -> np.ndarray:
        """Scores in (0, 1) for one input matrix."""
        return self.forward_batch(np.asarray(v, dtype=np.float64)[None])[0]

    def sample_loss(self, v: np.ndarray, target: np.ndarray) -> float:
        return bce_loss(self.forward(v), target)

    def params(self) -> list[np.ndarray]:
        raise NotImplementedError

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat_params(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        offset = 0
        for p in self.params():
            p.flat[:] = values[offset : offset + p.size]
            offset += p.size
        if offset != values.size:
            raise ValueError(f"expected {offset} parameter values, got {values.size}")


class SetSumNet(_Network):
    """Shared stack, canonical-order sum pooling over nonzero columns, sigmoid."""

    variant = "set_sum"

    def __init__(self, class_count, u_max, codebook_size, hidden=(128, 128), rng=None):
        super().__init__(class_count, u_max, codebook_size, hidden)
        self.stack = MlpStack([self.input_dim, *self.hidden, self.codebook_size], rng)

    def _check(self, v_batch: np.ndarray) -> None:
        # Any column count is accepted: extra zero padding must not matter.
        if v_batch.ndim != 3 or v_batch.shape[1] != self.input_dim:
            raise ValueError(
                f"expected input of shape (B, {self.input_dim}, columns), got {v_batch.shape}"
            )

    def _gather(self, v_batch: np.ndarray):
        rows = []
        counts = []
        for b in range(v_batch.shape[0]):
            cols = _canonical_columns(v_batch[b])
            rows.append(cols)
            counts.append(cols.shape[0])
        x = np.concatenate(rows, axis=0) if rows else np.zeros((0, self.input_dim))
        return x, np.array(counts)

    def logits_batch(self, v_batch: np.ndarray) -> np.ndarray:
        v_batch = np.asarray(v_batch, dtype=np.float64)
        self._check(v_batch)
        x, counts = self._gather(v_batch)
        z = np.zeros((v_batch.shape[0], self.codebook_size))
        if x.shape[0]:
            h, _ = self.stack.forward(x)
            start = 0
            for b, n in enumerate(counts):
                if n:
                    z[b] = h[start : start + n].sum(axis=0)
                start += n
        return z

    def forward_batch(self, v_batch: np.ndarray) -> np.ndarray:
        return stable_sigmoid(self.logits_batch(v_batch))

    def loss_and_grads(self, v_batch: np.ndarray, targets: np.ndarray):
        v_batch = np.asarray(v_batch, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        self._check(v_batch)
        batch = v_batch.shape[0]
        x, counts = self._gather(v_batch)
        z = np.zeros((batch, self.codebook_size))
        if x.shape[0]:
            h, caches = self.stack.forward(x)
            start = 0
            for b, n in enumerate(counts):
                if n:
                    z[b] = h[start : start + n].sum(axis=0)
                start += n
        scores = stable_sigmoid(z)
        loss = bce_loss(scores, targets)
        # d(loss)/d(logit) for the clamp-free region of the mean BCE.
        dz = (scores - targets) / (self.codebook_size * batch)
        grads_w = [np.zeros_like(w) for w in self.stack.weights]
        grads_b = [np.zeros_like(b) for b in self.stack.biases]
        if x.shape[0]:
            owners = np.repeat(np.arange(batch), counts)
            dh = dz[owners]
            _, gw, gb = self.stack.backward(caches, dh)
            for i in range(self.stack.n_layers):
                grads_w[i] += gw[i]
                grads_b[i] += gb[i]
        grads = []
        for gw_i, gb_i in zip(grads_w, grads_b):
            grads.extend((gw_i, gb_i))
        return loss, grads

    def params(self) -> list[np.ndarray]:
        return self.stack.params()


class ReuseConcatNet(_Network):
    """Shared stack per column, concatenated features, linear head, sigmoid."""

    variant = "reuse_concat"

    def __init__(self, class_count, u_max, codebook_size, hidden=(128, 128), rng=None):
        super().__init__(class_count, u_max, codebook_size, hidden)
        self.stack = MlpStack([self.input_dim, *self.hidden, self.codebook_size], rng)
        fan_in = self.u_max * self.codebook_size
        if rng is None:
            self.head_w = np.zeros((fan_in, self.codebook_size))
        else:
            self.head_w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, self.codebook_size))
        self.head_b = np.zeros(self.codebook_size)

    def _check(self, v_batch: np.ndarray) -> None:
        expected = (self.input_dim, self.u_max)
        if v_batch.ndim != 3 or v_batch.shape[1:] != expected:
            raise ValueError(f"expected input of shape (B, {expected[0]}, {expected[1]}), got {v_batch.shape}")

    def _features(self, v_batch: np.ndarray):
        batch = v_batch.shape[0]
        x = v_batch.transpose(0, 2, 1).reshape(batch * self.u_max, self.input_dim)
        h, caches = self.stack.forward(x)
        return h.reshape(batch, self.u_max * self.codebook_size), caches

    def forward_batch(self, v_batch: np.ndarray) -> np.ndarray:
        v_batch = np.asarray(v_batch, dtype=np.float64)
        self._check(v_batch)
        feats, _ = self._features(v_batch)
        return stable_sigmoid(feats @ self.head_w + self.head_b)

    def loss_and_grads(self, v_batch: np.ndarray, targets: np.ndarray):
        v_batch = np.asarray(v_batch, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        self._check(v_batch)
        batch = v_batch.shape[0]
        feats, caches = self._features(v_batch)
        z = feats @ self.head_w + self.head_b
        scores = stable_sigmoid(z)
        loss = bce_loss(scores, targets)
        dz = (scores - targets) / (self.codebook_size * batch)
        d_head_w = feats.T @ dz
        d_head_b = dz.sum(axis=0)
        dfeats = dz @ self.head_w.T
        dh = dfeats.reshape(batch * self.u_max, self.codebook_size)
        _, gw, gb = self.stack.backward(caches, dh)
        grads = []
        for gw_i, gb_i in zip(gw, gb):
            grads.extend((gw_i, gb_i))
        grads.extend((d_head_w, d_head_b))
        return loss, grads

    def params(self) -> list[np.ndarray]:
        return [*self.stack.params(), self.head_w, self.head_b]


class VanillaNet(_Network):
    """Single MLP on the flattened input matrix, sigmoid output."""

    variant = "vanilla_fc"

    def __init__(self, class_count, u_max, codebook_size, hidden=(128, 128), rng=None):
        super().__init__(class_count, u_max, codebook_size, hidden)
        flat = self.input_dim * self.u_max
        self.stack = MlpStack([flat, *self.hidden, self.codebook_size], rng)

    def _check(self, v_batch: np.ndarray) -> None:
        expected = (self.input_dim, self.u_max)
        if v_batch.ndim != 3 or v_batch.shape[1:] != expected:
            raise ValueError(f"expected input of shape (B, {expected[0]}, {expected[1]}), got {v_batch.shape}")

    def _flatten(self, v_batch: np.ndarray) -> np.ndarray:
        # Column-major flatten: detection columns are concatenated.
        batch = v_batch.shape[0]
        return v_batch.transpose(0, 2, 1).reshape(batch, self.u_max * self.input_dim)

    def forward_batch(self, v_batch: np.ndarray) -> np.ndarray:
        v_batch = np.asarray(v_batch, dtype=np.float64)
        self._check(v_batch)
        out, _ = self.stack.forward(self._flatten(v_batch))
        return stable_sigmoid(out)

    def loss_and_grads(self, v_batch: np.ndarray, targets: np.ndarray):
        v_batch = np.asarray(v_batch, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        self._check(v_batch)
        batch = v_batch.shape[0]
        z, caches = self.stack.forward(self._flatten(v_batch))
        scores = stable_sigmoid(z)
        loss = bce_loss(scores, targets)
        dz = (scores - targets) / (self.codebook_size * batch)
        _, gw, gb = self.stack.backward(caches, dz)
        grads = []
        for gw_i, gb_i in zip(gw, gb):
            grads.extend((gw_i, gb_i))
        return loss, grads

    def params(self) -> list[np.ndarray]:
        return self.stack.params()


_VARIANT_CLASSES = {
    SetSumNet.variant: SetSumNet,
    ReuseConcatNet.variant: ReuseConcatNet,
    VanillaNet.variant: VanillaNet,
}


def build_network(variant, class_count, u_max, codebook_size, hidden=(128, 128), rng=None):
    if variant not in _VARIANT_CLASSES:
        raise ValueError(f"unknown variant {variant!r}; valid tags: {', '.join(VARIANTS)}")
    return _VARIANT_CLASSES[variant](class_count, u_max, codebook_size, hidden, rng)


@dataclass(eq=False)
class TrainConfig:
    """Defaults picked on the desk benchmark; adam trains the sum-pooled
    network far faster than plain momentum at these label sparsities."""

    learning_rate: float = 3e-3
    batch_size: int = 32
    epochs: int = 300
    optimizer: str = "adam"  # or "momentum" / "sgd"
    momentum: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden: tuple[int, ...] = (128, 128)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.optimizer not in ("sgd", "momentum", "adam"):
            raise ValueError("optimizer must be one of 'sgd', 'momentum', 'adam'")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "optimizer": self.optimizer,
            "momentum": self.momentum,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
            "hidden": list(self.hidden),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass(eq=False)
class LearningCurves:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)


def _batch_arrays(samples):
    v = np.stack([s.features for s in samples]).astype(np.float64)
    t = np.stack([s.label for s in samples]).astype(np.float64)
    return v, t


def train(variant: str, train_samples, test_samples, cfg: TrainConfig):
    """Mini-batch gradient descent; deterministic given cfg.seed.

    Returns (net, LearningCurves) with full-pass train/test loss recorded
    after every epoch. A non-finite batch loss aborts with a diagnostic.
    """
    train_samples = list(train_samples)
    test_samples = list(test_samples)
    if not train_samples or not test_samples:
        raise ValueError("train and test sets must both be nonempty")

    first = train_samples[0]
    class_count = first.features.shape[0] - 4
    u_max = first.features.shape[1]
    codebook_size = first.label.shape[0]
    net = build_network(
        variant, class_count, u_max, codebook_size, cfg.hidden, substream(cfg.seed, "init")
    )

    v_train, t_train = _batch_arrays(train_samples)
    v_test, t_test = _batch_arrays(test_samples)
    rng = substream(cfg.seed, "shuffle")
    params = net.params()
    velocity = [np.zeros_like(p) for p in params]
    second = [np.zeros_like(p) for p in params]
    step = 0
    curves = LearningCurves()

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_samples))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = net.loss_and_grads(v_train[idx], t_train[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch starting at {start} (variant {variant})"
                )
            step += 1
            if cfg.optimizer == "adam":
                b1, b2 = cfg.momentum, cfg.adam_beta2
                for p, g, m1, m2 in zip(params, grads, velocity, second):
                    m1 *= b1
                    m1 += (1.0 - b1) * g
                    m2 *= b2
                    m2 += (1.0 - b2) * g * g
                    m1_hat = m1 / (1.0 - b1**step)
                    m2_hat = m2 / (1.0 - b2**step)
                    p -= cfg.learning_rate * m1_hat / (np.sqrt(m2_hat) + cfg.adam_eps)
            elif cfg.optimizer == "momentum":
                for p, g, vel in zip(params, grads, velocity):
                    vel *= cfg.momentum
                    vel += g
                    p -= cfg.learning_rate * vel
            else:
                for p, g in zip(params, grads):
                    p -= cfg.learning_rate * g
        curves.train_loss.append(bce_loss(net.forward_batch(v_train), t_train))
        curves.test_loss.append(bce_loss(net.forward_batch(v_test), t_test))
    return net, curves


def save_checkpoint(path, net, extra: dict | None = None) -> None:
    """Versioned JSON header line plus row-major float64 parameters."""
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": net.variant,
        "class_count": net.class_count,
        "u_max": net.u_max,
        "codebook_size": net.codebook_size,
        "hidden": list(net.hidden),
    }
    if extra:
        overlap = set(extra) & set(header)
        if overlap:
            raise ValueError(f"extra metadata would shadow header fields: {sorted(overlap)}")
        header.update(extra)
    payload = net.flat_params().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_checkpoint(path):
    """Returns (net, header). Bad format, version or size raise ValueError."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupted checkpoint header: {exc}") from exc
    if header.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if header.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    net = build_network(
        header["variant"],
        header["class_count"],
        header["u_max"],
        header["codebook_size"],
        tuple(header["hidden"]),
    )
    expected = net.flat_params().size * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} parameter bytes, got {len(payload)}")
    net.set_flat_params(np.frombuffer(payload, dtype="<f8"))
    return net, header
