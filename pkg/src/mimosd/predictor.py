"""Per-sub-tree minimum path-metric prediction.

Feature extraction from the reduced system, Gaussian-RBF network inference,
training-set generation (exact sub-tree minima as targets), a Moller scaled
conjugate gradient trainer with a plain gradient-descent fallback, and file
round-trips for datasets and trained models.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .channel import Constellation, draw_channel_instance
from .numerics import RankDeficient, qrd
from .search import SearchProblem, subtree_min_metric


class DimensionMismatch(Exception):
    """Input vector does not match the model architecture."""


class DivergedToNonFinite(Exception):
    """Training loss left the finite range (usually bad feature scaling)."""


class FormatError(Exception):
    """Malformed model or dataset file; message names the offending field."""


def extract_features(z: np.ndarray, r: np.ndarray, noise_variance: float) -> np.ndarray:
    """Reduced input vector [z^H z, Re(R^H z), Im(R^H z), sigma_v^2].

    Length 2 n_t + 2.  The Gram matrix R^H R is deliberately absent: for
    large i.i.d. channels it concentrates around n_r * I and carries no
    per-instance information worth its dimensionality.
    """
    if noise_variance <= 0:
        raise ValueError(f"noise_variance must be > 0, got {noise_variance}")
    z = np.asarray(z, dtype=np.complex128)
    n = z.shape[0]
    if r.shape != (n, n):
        raise ValueError("z and r dimensions disagree")
    rz = r.conj().T @ z
    features = np.empty(2 * n + 2)
    features[0] = z.real @ z.real + z.imag @ z.imag
    features[1:n + 1] = rz.real
    features[n + 1:2 * n + 1] = rz.imag
    features[2 * n + 1] = noise_variance
    return features


def gaussian_activation(gamma):
    """Radial basis activation exp(-gamma^2), center 0 and unit width."""
    return np.exp(-np.square(gamma))


@dataclass
class RbfnModel:
    """Single-hidden-layer Gaussian RBF network with stored input scaling.

    Inference applies the per-feature affine normalization first, so a model
    file is self-contained.  `n_t` and `constellation_size` record which
    detection geometry the model was trained for.
    """

    n_t: int
    constellation_size: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray

    def __post_init__(self):
        hidden, inputs = self.w1.shape
        if self.b1.shape != (hidden,):
            raise ValueError("b1 length must match w1 rows")
        outputs, hidden2 = self.w2.shape
        if hidden2 != hidden:
            raise ValueError("w2 columns must match w1 rows")
        if self.b2.shape != (outputs,):
            raise ValueError("b2 length must match w2 rows")
        if self.feature_mean.shape != (inputs,) or self.feature_std.shape != (inputs,):
            raise ValueError("normalization statistics must match the input width")
        for name in ("w1", "b1", "w2", "b2", "feature_mean", "feature_std"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(self.feature_std <= 0):
            raise ValueError("feature_std must be strictly positive")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]


def hidden_width(n_t: int, constellation_size: int) -> int:
    """Hidden-layer width 2 n_t + 2 |S| used by the reference architecture."""
    return 2 * n_t + 2 * constellation_size


def new_model(n_t: int, constellation_size: int, rng: np.random.Generator) -> RbfnModel:
    """Freshly initialized network: uniform(+-1/sqrt(fan_in)) weights, zero biases."""
    inputs = 2 * n_t + 2
    hidden = hidden_width(n_t, constellation_size)
    outputs = constellation_size
    s1 = 1.0 / math.sqrt(inputs)
    s2 = 1.0 / math.sqrt(hidden)
    return RbfnModel(
        n_t=n_t,
        constellation_size=constellation_size,
        w1=rng.uniform(-s1, s1, size=(hidden, inputs)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-s2, s2, size=(outputs, hidden)),
        b2=np.zeros(outputs),
        feature_mean=np.zeros(inputs),
        feature_std=np.ones(inputs),
    )


def forward(model: RbfnModel, features: np.ndarray) -> np.ndarray:
    """Raw network output w2 @ phi(w1 @ e + b1) + b2 on normalized features."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.input_dim,):
        raise DimensionMismatch(
            f"expected {model.input_dim} features, got {features.shape}")
    e = (features - model.feature_mean) / model.feature_std
    h = gaussian_activation(model.w1 @ e + model.b1)
    return model.w2 @ h + model.b2


def predict(model: RbfnModel, features: np.ndarray) -> np.ndarray:
    """Forward pass clamped at zero; predictions are nonnegative distances."""
    return np.maximum(forward(model, features), 0.0)


@dataclass(frozen=True)
class TrainingExample:
    """One reduced-input vector with its |S| sub-tree minimum root distances."""

    features: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class TrainingReport:
    epochs_run: int
    mse_history: list
    final_mse: float


def generate_dataset(n_t: int, n_r: int, constellation: Constellation,
                     snr_range_db: tuple, sample_count: int,
                     rng: np.random.Generator,
                     max_retries: int = 100) -> list:
    """Independent channel draws at uniform random SNR with exact targets.

    Sample i consumes the i-th child stream spawned from `rng` and draws,
    in order, its SNR and then the channel instance; rank-deficient draws
    are resampled from the same stream (bounded retries).  Targets are the
    square roots of the exact per-sub-tree minimum path metrics, indexed in
    constellation order.
    """
    low, high = snr_range_db
    if low > high:
        raise ValueError(f"snr range is inverted: {snr_range_db}")
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    return examples_from_streams(rng.spawn(sample_count), n_t, n_r,
                                 constellation, snr_range_db, max_retries)


def examples_from_streams(streams, n_t: int, n_r: int,
                          constellation: Constellation, snr_range_db: tuple,
                          max_retries: int = 100) -> list:
    """generate_dataset's per-stream body; lets callers shard the streams.

    Output depends only on the streams themselves, so splitting the spawned
    list across workers and concatenating in order reproduces the serial
    result exactly.
    """
    low, high = snr_range_db
    examples = []
    for stream in streams:
        snr_db = stream.uniform(low, high)
        for attempt in range(max_retries):
            instance = draw_channel_instance(n_t, n_r, constellation, snr_db, stream)
            try:
                factors = qrd(instance.h)
            except RankDeficient:
                continue
            break
        else:
            raise RankDeficient(f"no full-rank channel in {max_retries} draws")
        z = factors.q1.conj().T @ instance.y
        problem = SearchProblem(z=z, r=factors.r, constellation=constellation,
                                squared_radius=math.inf)
        targets = np.array([math.sqrt(subtree_min_metric(problem, q))
                            for q in range(constellation.size)])
        examples.append(TrainingExample(
            features=extract_features(z, factors.r, instance.noise_variance),
            targets=targets))
    return examples


_DATASET_MAGIC = b"MIMOSDDS"
_DATASET_VERSION = 1
_ENDIAN_TAG = 0x01020304


def save_dataset(path, examples: list) -> None:
    """Binary record stream: self-describing header, then float64 records."""
    if not examples:
        raise ValueError("refusing to write an empty dataset")
    feature_len = examples[0].features.shape[0]
    target_len = examples[0].targets.shape[0]
    header = _DATASET_MAGIC + struct.pack(
        "<IIQII", _DATASET_VERSION, _ENDIAN_TAG, len(examples), feature_len, target_len)
    block = np.empty((len(examples), feature_len + target_len), dtype="<f8")
    for i, ex in enumerate(examples):
        if ex.features.shape[0] != feature_len or ex.targets.shape[0] != target_len:
            raise ValueError(f"inconsistent record shape at index {i}")
        block[i, :feature_len] = ex.features
        block[i, feature_len:] = ex.targets
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(block.tobytes())


def load_dataset(path) -> list:
    with open(path, "rb") as fh:
        raw = fh.read()
    head = len(_DATASET_MAGIC) + struct.calcsize("<IIQII")
    if len(raw) < head or raw[:len(_DATASET_MAGIC)] != _DATASET_MAGIC:
        raise FormatError("magic: not a dataset file")
    version, endian, count, feature_len, target_len = struct.unpack(
        "<IIQII", raw[len(_DATASET_MAGIC):head])
    if version != _DATASET_VERSION:
        raise FormatError(f"version: unsupported dataset version {version}")
    if endian != _ENDIAN_TAG:
        raise FormatError(f"endianness: unexpected tag {endian:#x}")
    record = feature_len + target_len
    expected = head + count * record * 8
    if len(raw) != expected:
        raise FormatError(f"records: expected {expected} bytes, file has {len(raw)}")
    block = np.frombuffer(raw[head:], dtype="<f8").reshape(count, record)
    return [TrainingExample(features=block[i, :feature_len].copy(),
                            targets=block[i, feature_len:].copy())
            for i in range(count)]


def export_dataset_csv(path, examples: list) -> None:
    """Plain-text view of a dataset (diagnostics; the binary file is canonical)."""
    feature_len = examples[0].features.shape[0]
    target_len = examples[0].targets.shape[0]
    with open(path, "w") as fh:
        cols = [f"f{i}" for i in range(feature_len)] + [f"g{q}" for q in range(target_len)]
        fh.write(",".join(cols) + "\n")
        for ex in examples:
            row = [repr(float(v)) for v in ex.features] + [repr(float(v)) for v in ex.targets]
            fh.write(",".join(row) + "\n")


@dataclass
class TrainerConfig:
    """Trainer settings; `method` selects Moller SCG or plain gradient descent."""

    method: str = "scg"
    max_epochs: int = 2000
    seed: int = 0
    sigma: float = 1e-4            # finite-difference scale in SCG
    initial_lambda: float = 1e-6   # initial SCG trust-region scale
    gd_step: float = 1e-4
    stop_window: int = 10
    stop_rel_tol: float = 1e-8

    def __post_init__(self):
        if self.method not in ("scg", "gd"):
            raise ValueError(f"method must be 'scg' or 'gd', got {self.method!r}")


def _pack(w1, b1, w2, b2):
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _unpack(theta, hidden, inputs, outputs):
    a = hidden * inputs
    b = a + hidden
    c = b + outputs * hidden
    return (theta[:a].reshape(hidden, inputs), theta[a:b],
            theta[b:c].reshape(outputs, hidden), theta[c:])


def _loss_and_grad(theta, x, g, hidden, inputs, outputs):
    """Batch MSE (1/M) sum ||out - g||^2 and its gradient via backprop."""
    w1, b1, w2, b2 = _unpack(theta, hidden, inputs, outputs)
    m = x.shape[0]
    a1 = x @ w1.T + b1
    z1 = np.exp(-a1 * a1)
    out = z1 @ w2.T + b2
    diff = out - g
    loss = float(np.sum(diff * diff)) / m
    dout = (2.0 / m) * diff
    dw2 = dout.T @ z1
    db2 = dout.sum(axis=0)
    dz1 = dout @ w2
    da1 = dz1 * (-2.0 * a1 * z1)
    dw1 = da1.T @ x
    db1 = da1.sum(axis=0)
    return loss, _pack(dw1, db1, dw2, db2)


def train(dataset: list, config: TrainerConfig | None = None):
    """Fit the network to a dataset; returns (RbfnModel, TrainingReport).

    Full-batch optimization, deterministic for a fixed seed.  Stops at
    max_epochs or when the relative MSE improvement over the trailing window
    falls below the configured tolerance; the returned model carries the
    best parameters seen, while the report logs the whole loss history.
    """
    if config is None:
        config = TrainerConfig()
    if not dataset:
        raise ValueError("dataset is empty")
    x_raw = np.stack([ex.features for ex in dataset])
    g = np.stack([ex.targets for ex in dataset])
    inputs = x_raw.shape[1]
    outputs = g.shape[1]
    if inputs < 4 or inputs % 2 != 0:
        raise ValueError(f"feature width {inputs} is not of the form 2 n_t + 2")
    n_t = (inputs - 2) // 2
    hidden = hidden_width(n_t, outputs)

    mean = x_raw.mean(axis=0)
    std = x_raw.std(axis=0)
    std[std < 1e-12] = 1.0
    x = (x_raw - mean) / std

    rng = np.random.default_rng(config.seed)
    init = new_model(n_t, outputs, rng)
    theta = _pack(init.w1, init.b1, init.w2, init.b2)

    def evaluate(t):
        loss, grad = _loss_and_grad(t, x, g, hidden, inputs, outputs)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise DivergedToNonFinite(f"non-finite loss at epoch {len(history)}")
        return loss, grad

    history = []
    if config.method == "gd":
        theta, history = _train_gd(theta, evaluate, config)
    else:
        theta, history = _train_scg(theta, evaluate, config)

    w1, b1, w2, b2 = _unpack(theta, hidden, inputs, outputs)
    model = RbfnModel(n_t=n_t, constellation_size=outputs,
                      w1=w1.copy(), b1=b1.copy(), w2=w2.copy(), b2=b2.copy(),
                      feature_mean=mean, feature_std=std)
    report = TrainingReport(epochs_run=len(history), mse_history=history,
                            final_mse=history[-1])
    return model, report


def _window_converged(history, window, rel_tol):
    if len(history) <= window:
        return False
    old = history[-1 - window]
    return old - history[-1] < rel_tol * max(abs(old), 1e-30)


def _train_gd(theta, evaluate, config):
    history = []
    best = math.inf
    best_theta = theta.copy()
    for _ in range(config.max_epochs):
        loss, grad = evaluate(theta)
        theta = theta - config.gd_step * grad
        history.append(loss)
        if loss < best:
            best = loss
            best_theta = theta.copy()
        if _window_converged(history, config.stop_window, config.stop_rel_tol):
            break
    return best_theta, history


def _train_scg(theta, evaluate, config):
    """Moller's scaled conjugate gradient on the flattened parameter vector."""
    w = theta
    n_params = w.shape[0]
    history = []
    f_w, grad = evaluate(w)
    r = -grad
    p = r.copy()
    success = True
    lam = config.initial_lambda
    lam_bar = 0.0
    delta = 0.0
    best = f_w
    best_w = w.copy()
    for epoch in range(1, config.max_epochs + 1):
        p2 = float(p @ p)
        if p2 == 0.0:
            break
        if success:
            sigma_k = config.sigma / math.sqrt(p2)
            _, grad_s = evaluate(w + sigma_k * p)
            delta = float(p @ (grad_s - grad)) / sigma_k
        delta = delta + (lam - lam_bar) * p2
        if delta <= 0.0:                      # make the Hessian estimate positive definite
            lam_bar = 2.0 * (lam - delta / p2)
            delta = -delta + lam * p2
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta
        f_new, grad_new = evaluate(w + alpha * p)
        comparison = 2.0 * delta * (f_w - f_new) / (mu * mu)
        if comparison >= 0.0:                 # accept the step
            w = w + alpha * p
            f_w = f_new
            grad = grad_new
            r_new = -grad
            lam_bar = 0.0
            success = True
            if epoch % n_params == 0:
                p = r_new.copy()
            else:
                beta = float(r_new @ r_new - r_new @ r) / mu
                p = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam = 0.25 * lam
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam = lam + delta * (1.0 - comparison) / p2
        history.append(f_w)
        if f_w < best:
            best = f_w
            best_w = w.copy()
        if _window_converged(history, config.stop_window, config.stop_rel_tol):
            break
    if not history:
        history.append(f_w)
    return best_w, history


_MODEL_FORMAT = "mimosd-rbfn"
_MODEL_VERSION = 1


def save_model(model: RbfnModel, path) -> None:
    """JSON document with dims, normalization statistics, and all parameters.

    Floats are serialized with full shortest-round-trip precision, so
    load(save(m)) is bit-exact.
    """
    doc = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "n_t": model.n_t,
        "constellation_size": model.constellation_size,
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _field(doc, name):
    if name not in doc:
        raise FormatError(f"{name}: missing field")
    return doc[name]


def _array_field(doc, name, ndim):
    value = _field(doc, name)
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise FormatError(f"{name}: not a numeric array") from None
    if arr.ndim != ndim:
        raise FormatError(f"{name}: expected {ndim}-d array, got {arr.ndim}-d")
    return arr


def load_model(path) -> RbfnModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise FormatError("document: not valid JSON") from None
    if not isinstance(doc, dict) or doc.get("format") != _MODEL_FORMAT:
        raise FormatError("format: not a model file")
    if doc.get("version") != _MODEL_VERSION:
        raise FormatError(f"version: unsupported model version {doc.get('version')}")
    n_t = _field(doc, "n_t")
    size = _field(doc, "constellation_size")
    if not isinstance(n_t, int) or n_t < 1:
        raise FormatError(f"n_t: expected positive integer, got {n_t!r}")
    if not isinstance(size, int) or size < 2:
        raise FormatError(f"constellation_size: expected integer >= 2, got {size!r}")
    arrays = {
        "w1": _array_field(doc, "w1", 2),
        "b1": _array_field(doc, "b1", 1),
        "w2": _array_field(doc, "w2", 2),
        "b2": _array_field(doc, "b2", 1),
        "feature_mean": _array_field(doc, "feature_mean", 1),
        "feature_std": _array_field(doc, "feature_std", 1),
    }
    try:
        return RbfnModel(n_t=n_t, constellation_size=size, **arrays)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
