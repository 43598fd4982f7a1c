"""Complex-valued feed-forward networks in plain numpy.

Layers hold real and imaginary weight parts separately; the forward pass uses
complex arithmetic, which is the same map as the real 2x2 block form. Gradients
are taken with respect to every real parameter: for a real loss L and a complex
pre-activation z, the backward pass carries g = dL/dRe(z) + j dL/dIm(z).
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import Divergence, InvalidArgument, UnsupportedShape

MODEL_MAGIC = b"CNN1"
DATASET_MAGIC = b"DSET"
NUM_CLASSES = 5


@dataclass
class ComplexLinearLayer:
    w_real: np.ndarray
    w_imag: np.ndarray
    b_real: np.ndarray
    b_imag: np.ndarray

    def __post_init__(self):
        so, si = np.shape(self.w_real)
        if np.shape(self.w_imag) != (so, si) or np.shape(self.b_real) != (so,) or np.shape(self.b_imag) != (so,):
            raise InvalidArgument("inconsistent layer parameter shapes")

    @property
    def shape(self):
        return self.w_real.shape

    @classmethod
    def init(cls, s_in: int, s_out: int, rng: np.random.Generator) -> "ComplexLinearLayer":
        bound = 1.0 / math.sqrt(s_in)
        u = lambda *shape: rng.uniform(-bound, bound, size=shape)
        return cls(u(s_out, s_in), u(s_out, s_in), u(s_out), u(s_out))

    @property
    def weight(self) -> np.ndarray:
        return self.w_real + 1j * self.w_imag

    @property
    def bias(self) -> np.ndarray:
        return self.b_real + 1j * self.b_imag

    def params(self) -> list:
        return [self.w_real, self.w_imag, self.b_real, self.b_imag]


def complex_linear_forward(layer: ComplexLinearLayer, z_in: np.ndarray) -> np.ndarray:
    """W z + b for a vector or a batch of row vectors."""
    z_in = np.asarray(z_in)
    return z_in @ layer.weight.T + layer.bias


def complex_conv_forward(filt, signal) -> np.ndarray:
    """Valid-mode complex convolution from four real convolutions."""
    filt = np.asarray(filt, dtype=complex)
    signal = np.asarray(signal, dtype=complex)
    if filt.size > signal.size:
        raise InvalidArgument("filter longer than signal")
    wr, wi, x, y = filt.real, filt.imag, signal.real, signal.imag
    conv = lambda a, b: np.convolve(a, b, mode="valid")
    return (conv(wr, x) - conv(wi, y)) + 1j * (conv(wi, x) + conv(wr, y))


def crelu(z):
    z = np.asarray(z)
    return np.maximum(z.real, 0.0) + 1j * np.maximum(z.imag, 0.0)


@dataclass(frozen=True)
class NetworkSpec:
    input_size: int
    head: str = "regression"
    n_out: int = 2
    normalize_input: bool = True

    def __post_init__(self):
        if self.head not in ("regression", "classifier"):
            raise InvalidArgument(f"unknown head {self.head!r}")
        if min(self.hidden_sizes) < 1:
            raise InvalidArgument(f"input size {self.input_size} too small for three halvings")
        if self.head == "regression" and self.n_out % 2:
            raise InvalidArgument("regression head needs 2q outputs")
        if self.head == "classifier" and self.n_out != NUM_CLASSES:
            raise InvalidArgument(f"classifier head has {NUM_CLASSES} outputs")

    @property
    def hidden_sizes(self) -> list:
        s = self.input_size
        return [s // 2, s // 4, s // 8]

    @property
    def layer_sizes(self) -> list:
        return [self.input_size] + self.hidden_sizes + [self.n_out]

    @classmethod
    def regression(cls, n_tx: int, n_rx: int, q: int = 1, **kw) -> "NetworkSpec":
        return cls(n_tx * n_rx, "regression", 2 * q, **kw)

    @classmethod
    def classifier(cls, n_tx: int, n_rx: int, **kw) -> "NetworkSpec":
        return cls(n_tx * n_rx, "classifier", NUM_CLASSES, **kw)


@dataclass
class ComplexMLP:
    spec: NetworkSpec
    layers: list

    @classmethod
    def create(cls, spec: NetworkSpec, seed: int = 0) -> "ComplexMLP":
        rng = np.random.default_rng(seed)
        sizes = spec.layer_sizes
        return cls(spec, [ComplexLinearLayer.init(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])])

    def params(self) -> list:
        return [p for layer in self.layers for p in layer.params()]

    def copy(self) -> "ComplexMLP":
        return ComplexMLP(self.spec, [ComplexLinearLayer(*(p.copy() for p in l.params())) for l in self.layers])


def prepare_input(snapshots, normalize: bool = True) -> np.ndarray:
    """Flatten N_r x N_t snapshots column-major into network inputs.

    With ``normalize`` each sample is scaled to unit mean power and rotated so
    that its first entry is real positive.
    """
    snaps = np.asarray(snapshots, dtype=complex)
    if snaps.ndim == 2:
        snaps = snaps[None]
    x = np.transpose(snaps, (0, 2, 1)).reshape(snaps.shape[0], -1)
    if normalize:
        x = normalize_rows(x)
    return x


def normalize_rows(x: np.ndarray) -> np.ndarray:
    power = np.sqrt(np.mean(np.abs(x) ** 2, axis=1, keepdims=True))
    power[power == 0] = 1.0
    ref = x[:, :1]
    rot = np.where(np.abs(ref) > 0, np.conj(ref) / np.where(np.abs(ref) > 0, np.abs(ref), 1.0), 1.0)
    return x * rot / power


def _forward_cache(model: ComplexMLP, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    for i, layer in enumerate(model.layers):
        z = complex_linear_forward(layer, h)
        pre.append(z)
        h = crelu(z) if i < len(model.layers) - 1 else z
        acts.append(h)
    return pre, acts


def _softmax(logits):
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: ComplexMLP, inputs: np.ndarray) -> np.ndarray:
    """Predictions for prepared inputs (B, S) or a single vector (S,).

    Regression: real parts of the output neurons (angles in rad).
    Classifier: softmax over output magnitudes.
    """
    x = np.asarray(inputs, dtype=complex)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.spec.input_size:
        raise InvalidArgument(f"input size {x.shape[1]} != {model.spec.input_size}")
    _, acts = _forward_cache(model, x)
    z = acts[-1]
    out = z.real if model.spec.head == "regression" else _softmax(np.abs(z))
    return out[0] if single else out


def predict_snapshot(model: ComplexMLP, snapshot: np.ndarray) -> np.ndarray:
    return forward(model, prepare_input(snapshot, model.spec.normalize_input)[0])


def sort_targets(angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Permutation putting (aoa, aod) tuples in ascending AoA order.

    ``angles`` has shape (B, 2q) ordered (aoa_1..aoa_q, aod_1..aod_q).
    Returns the sorted array and the permutation per row.
    """
    a = np.atleast_2d(angles)
    q = a.shape[1] // 2
    aoa, aod = a[:, :q], a[:, q:]
    perm = np.array([np.lexsort((d, t)) for t, d in zip(aoa, aod)]).reshape(a.shape[0], q)
    rows = np.arange(a.shape[0])[:, None]
    return np.concatenate([aoa[rows, perm], aod[rows, perm]], axis=1), perm


def sorted_angle_mse(predictions, truth) -> tuple[float, float]:
    """(MSE_AoA, MSE_AoD) after sorting both sides by AoA."""
    p = np.atleast_2d(np.asarray(predictions, dtype=float))
    t = np.atleast_2d(np.asarray(truth, dtype=float))
    if p.shape != t.shape or p.shape[1] % 2:
        raise InvalidArgument(f"shape mismatch {p.shape} vs {t.shape}")
    q = p.shape[1] // 2
    ps, _ = sort_targets(p)
    ts, _ = sort_targets(t)
    err = (ps - ts) ** 2
    return float(err[:, :q].mean()), float(err[:, q:].mean())


def sorted_mse_loss(predictions, truth) -> float:
    """MSE_AoA + MSE_AoD with sorted target order."""
    return sum(sorted_angle_mse(predictions, truth))


def _sorted_mse_grad(pred: np.ndarray, truth: np.ndarray) -> tuple[float, np.ndarray]:
    b, n = pred.shape
    q = n // 2
    ps, perm = sort_targets(pred)
    ts, _ = sort_targets(truth)
    diff = ps - ts
    loss = float(np.mean(diff[:, :q] ** 2) + np.mean(diff[:, q:] ** 2))
    g_sorted = 2.0 * diff / (b * q)
    grad = np.empty_like(pred)
    rows = np.arange(b)[:, None]
    grad[rows, perm] = g_sorted[:, :q]
    grad[rows, q + perm] = g_sorted[:, q:]
    return loss, grad


def _cross_entropy_grad(z: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and dL/dz for softmax over |z| with 0-based class labels."""
    mag = np.abs(z)
    probs = _softmax(mag)
    b = z.shape[0]
    loss = float(-np.mean(np.log(probs[np.arange(b), labels] + 1e-300)))
    g_mag = probs.copy()
    g_mag[np.arange(b), labels] -= 1.0
    g_mag /= b
    safe = np.where(mag > 0, mag, 1.0)
    unit = np.where(mag > 0, z / safe, 0.0)
    return loss, g_mag * unit


def loss_and_grad(model: ComplexMLP, inputs: np.ndarray, targets: np.ndarray) -> tuple[float, list]:
    """Objective and gradients for every real parameter, in ``model.params()`` order.

    Regression targets are angle arrays (B, 2q); classifier targets are class
    counts 1..5.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=complex))
    pre, acts = _forward_cache(model, x)
    z = acts[-1]
    if model.spec.head == "regression":
        loss, g_out = _sorted_mse_grad(z.real, np.atleast_2d(targets))
        g = g_out.astype(complex)
    else:
        loss, g = _cross_entropy_grad(z, np.asarray(targets, dtype=int).ravel() - 1)
    grads = []
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if i < len(model.layers) - 1:
            zi = pre[i]
            g = (g.real * (zi.real > 0)) + 1j * (g.imag * (zi.imag > 0))
        h = acts[i]
        dw = g.T @ h.conj()
        db = g.sum(axis=0)
        grads.append([dw.real, dw.imag, db.real, db.imag])
        g = g @ layer.weight.conj()
    grads.reverse()
    return loss, [p for layer_grads in grads for p in layer_grads]


def backward(model: ComplexMLP, inputs: np.ndarray, targets: np.ndarray) -> list:
    return loss_and_grad(model, inputs, targets)[1]


def objective(model: ComplexMLP, inputs, targets) -> float:
    x = np.atleast_2d(np.asarray(inputs, dtype=complex))
    _, acts = _forward_cache(model, x)
    z = acts[-1]
    if model.spec.head == "regression":
        return sorted_mse_loss(z.real, targets)
    return _cross_entropy_grad(z, np.asarray(targets, dtype=int).ravel() - 1)[0]


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-4, **kw) -> "AdamState":
        return cls(lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float | None = None) -> AdamState:
    """In-place Adam update of ``params`` with bias correction."""
    lr = state.lr if lr is None else lr
    state.t += 1
    c1 = 1 - state.beta1**state.t
    c2 = 1 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass
class TrainConfig:
    epochs: int = 300
    base_lr: float = 1e-4
    lr_drops: tuple = ((200, 0.5), (250, 0.5))
    batch_size: int = 256
    train_snrs_db: tuple = (5, 10, 15, 20, 25, 30, 40)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidArgument("epochs and batch size must be >= 1")
        if any(f <= 0 for _, f in self.lr_drops):
            raise InvalidArgument("learning-rate drop factors must be positive")

    def lr_at(self, epoch: int) -> float:
        lr = self.base_lr
        for e, f in self.lr_drops:
            if epoch >= e:
                lr *= f
        return lr

    @classmethod
    def scaled(cls, epochs: int, **kw) -> "TrainConfig":
        """Default schedule shape (halve at 2/3 and 5/6 of the run) for any length."""
        drops = ((round(epochs * 2 / 3), 0.5), (round(epochs * 5 / 6), 0.5))
        return cls(epochs=epochs, lr_drops=drops, **kw)


@dataclass
class Dataset:
    inputs: np.ndarray  # (B, S) complex, already prepared
    labels: np.ndarray  # (B, n_out) real
    snr_db: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx) -> "Dataset":
        snr = None if self.snr_db is None else self.snr_db[idx]
        return Dataset(self.inputs[idx], self.labels[idx], snr, dict(self.meta))

    def split(self, fraction: float, seed: int = 0) -> tuple["Dataset", "Dataset"]:
        idx = np.random.default_rng(seed).permutation(len(self))
        cut = int(round(len(self) * (1 - fraction)))
        return self.subset(np.sort(idx[:cut])), self.subset(np.sort(idx[cut:]))


@dataclass
class TrainHistory:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)


def train(model: ComplexMLP, data: Dataset, config: TrainConfig, validation: Dataset | None = None):
    """Minibatch Adam training; returns (model, history) with per-epoch losses."""
    if len(data) == 0:
        raise InvalidArgument("empty training set")
    rng = np.random.default_rng(config.seed)
    params = model.params()
    state = AdamState.for_params(params, config.base_lr)
    hist = TrainHistory()
    targets = data.labels if model.spec.head == "regression" else data.labels[:, 0]
    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        order = rng.permutation(len(data))
        for start in range(0, len(data), config.batch_size):
            idx = order[start:start + config.batch_size]
            _, grads = loss_and_grad(model, data.inputs[idx], targets[idx])
            adam_step(state, params, grads, lr)
        loss = objective(model, data.inputs, targets)
        if not math.isfinite(loss):
            raise Divergence(epoch)
        hist.train.append(loss)
        if validation is not None:
            vt = validation.labels if model.spec.head == "regression" else validation.labels[:, 0]
            hist.validation.append(objective(model, validation.inputs, vt))
    return model, hist


def classify_num_targets(model: ComplexMLP, snapshot: np.ndarray) -> int:
    """Target count 1..5; argmax ties go to the lowest class."""
    if model.spec.head != "classifier":
        raise InvalidArgument("model does not have a classifier head")
    probs = predict_snapshot(model, snapshot)
    return int(np.argmax(probs)) + 1


def mlp_op_counts(spec: NetworkSpec) -> tuple[int, int]:
    """(multiplications, additions) of the three-hidden-layer complex MLP."""
    s = spec.input_size
    h1, h2, h3 = s // 2, s // 4, s // 8
    if spec.hidden_sizes != [h1, h2, h3] or min(h1, h2, h3) < 1:
        raise UnsupportedShape(f"no closed-form count for layer sizes {spec.layer_sizes}")
    n_out = spec.n_out
    mults = 4 * (s * h1 + h1 * h2 + h2 * h3 + 2 * h3) + 2 * (s + h1 + h2 + 2 * n_out)
    adds = 3 * s + 7 * (h1 + h2) + 4 * h3 + 8 * n_out
    return mults, adds


def save_model(path, model: ComplexMLP):
    """Binary weights plus a JSON sidecar for the network spec."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", MODEL_MAGIC, len(model.layers)))
        for layer in model.layers:
            so, si = layer.shape
            fh.write(struct.pack("<II", so, si))
            for p in layer.params():
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    spec = model.spec
    Path(str(path) + ".json").write_text(json.dumps({
        "input_size": spec.input_size, "head": spec.head, "n_out": spec.n_out,
        "normalize_input": spec.normalize_input,
    }))


def load_model(path) -> ComplexMLP:
    blob = Path(path).read_bytes()
    magic, count = struct.unpack_from("<4sI", blob)
    if magic != MODEL_MAGIC:
        raise InvalidArgument(f"bad model magic {magic!r}")
    off = 8
    layers = []
    for _ in range(count):
        so, si = struct.unpack_from("<II", blob, off)
        off += 8
        arrays = []
        for shape in ((so, si), (so, si), (so,), (so,)):
            n = int(np.prod(shape))
            arrays.append(np.frombuffer(blob, "<f8", n, off).reshape(shape).astype(float))
            off += 8 * n
        layers.append(ComplexLinearLayer(*arrays))
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        spec = NetworkSpec(**json.loads(sidecar.read_text()))
    else:
        head = "classifier" if layers[-1].shape[0] == NUM_CLASSES else "regression"
        spec = NetworkSpec(layers[0].shape[1], head, layers[-1].shape[0])
    return ComplexMLP(spec, layers)


def save_dataset(path, data: Dataset):
    n, s = data.inputs.shape
    labels = np.atleast_2d(data.labels).reshape(n, -1)
    inter = np.empty((n, s, 2), dtype="<f8")
    inter[..., 0] = data.inputs.real
    inter[..., 1] = data.inputs.imag
    body = np.concatenate([inter.reshape(n, 2 * s), labels.astype("<f8")], axis=1)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", DATASET_MAGIC, n, s, labels.shape[1]))
        fh.write(np.ascontiguousarray(body, dtype="<f8").tobytes())


def load_dataset(path) -> Dataset:
    blob = Path(path).read_bytes()
    magic, n, s, n_out = struct.unpack_from("<4sIII", blob)
    if magic != DATASET_MAGIC:
        raise InvalidArgument(f"bad dataset magic {magic!r}")
    body = np.frombuffer(blob, "<f8", n * (2 * s + n_out), 16).reshape(n, 2 * s + n_out)
    inter = body[:, :2 * s].reshape(n, s, 2)
    return Dataset(inter[..., 0] + 1j * inter[..., 1], body[:, 2 * s:].copy())
