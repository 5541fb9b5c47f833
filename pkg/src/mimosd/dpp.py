"""Prediction-aided sphere detection.

Wraps the tree search with three independently switchable sub-schemes driven
by the network's per-sub-tree minimum distance predictions: a tightened
initial radius, best-first sub-tree ordering, and early termination of the
sub-tree loop.  With everything switched off this degrades to plain SE
sphere decoding at the noise-based radius.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import Constellation, zero_forcing_detect
from .numerics import OpCounter, qrd
from .predictor import RbfnModel, extract_features, hidden_width, predict
from .search import SearchProblem, conventional_radius, sphere_decode


class NoSchedule(Exception):
    """No tuned (lambda1, lambda2) values for the requested antenna count."""


@dataclass(frozen=True)
class DetectorConfig:
    """Sub-scheme switches and their scaling margins.

    lambda1 scales the smallest predicted distance into the initial radius;
    lambda2 scales the running radius in the termination test.  +inf for
    either disables the corresponding effect even when the flag is on.
    """

    lambda1: float
    lambda2: float
    epsilon_complement: float = 0.999
    enable_nn_radius: bool = True
    enable_nn_ordering: bool = True
    enable_early_termination: bool = True

    def __post_init__(self):
        if not self.lambda1 >= 1.0:
            raise ValueError(f"lambda1 must be >= 1, got {self.lambda1}")
        if not self.lambda2 >= 1.0:
            raise ValueError(f"lambda2 must be >= 1, got {self.lambda2}")
        if not 0.0 < self.epsilon_complement < 1.0:
            raise ValueError(
                f"epsilon_complement must be in (0, 1), got {self.epsilon_complement}")
        if self.enable_early_termination and not self.enable_nn_ordering:
            raise ValueError("early termination requires sub-tree ordering")

    @property
    def needs_model(self) -> bool:
        return (self.enable_nn_radius or self.enable_nn_ordering
                or self.enable_early_termination)


def baseline_config(epsilon_complement: float = 0.999) -> DetectorConfig:
    """Plain SE sphere decoding at the noise-based radius; no model needed."""
    return DetectorConfig(lambda1=math.inf, lambda2=math.inf,
                          epsilon_complement=epsilon_complement,
                          enable_nn_radius=False, enable_nn_ordering=False,
                          enable_early_termination=False)


@dataclass(frozen=True)
class LambdaSchedule:
    """Tuned (lambda1, lambda2) per (n_t, snr_db) grid point.

    Unlisted SNRs resolve to the nearest listed one; exact midpoints round
    toward the higher SNR.
    """

    entries: dict

    def snr_points(self, n_t: int) -> list:
        return sorted(s for (nt, s) in self.entries if nt == n_t)


def default_lambda_schedule() -> LambdaSchedule:
    """Grid-searched margins for 16 and 24 antenna QPSK systems."""
    return LambdaSchedule(entries={
        (16, 5.0): (1.2, 1.3),
        (16, 7.0): (1.3, 1.4),
        (16, 9.0): (1.4, 1.5),
        (16, 11.0): (1.5, 1.6),
        (16, 13.0): (1.6, 1.7),
        (24, 5.0): (1.2, 1.1),
        (24, 7.0): (1.3, 1.2),
        (24, 9.0): (1.4, 1.4),
        (24, 11.0): (1.4, 1.5),
        (24, 13.0): (1.7, 1.6),
    })


def lambda_lookup(schedule: LambdaSchedule, n_t: int, snr_db: float) -> tuple:
    """(lambda1, lambda2) at the listed SNR nearest to snr_db (ties go up)."""
    points = schedule.snr_points(n_t)
    if not points:
        raise NoSchedule(f"no tuned lambda values for n_t = {n_t}")
    chosen = min(points, key=lambda s: (abs(s - snr_db), -s))
    return schedule.entries[(n_t, chosen)]


@dataclass(frozen=True)
class DetectionResult:
    """One detection: hard decisions plus the work it took.

    metric is the reduced-domain residual ||z - R x||^2 of the returned
    vector.  tree_ops covers the search arithmetic; nn_ops covers feature
    extraction, normalization, and the network forward pass.
    """

    solution: np.ndarray
    metric: float
    used_fallback: bool
    subtrees_searched: int
    terminated_early: bool
    tree_ops: OpCounter
    nn_ops: OpCounter
    nodes_visited: int = 0


def sorted_predictions(raw: np.ndarray):
    """Ascending predictions with the rank -> constellation-index permutation.

    Ties keep ascending constellation index (stable sort).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise ValueError("predictions must be finite")
    permutation = np.argsort(raw, kind="stable")
    return raw[permutation], permutation


def nn_initial_radius(g_tilde_1: float, lambda1: float, conventional: float) -> float:
    """min(lambda1 * g_tilde_1, conventional); +inf lambda1 keeps the fallback."""
    if g_tilde_1 < 0:
        raise ValueError(f"predicted distance must be >= 0, got {g_tilde_1}")
    if math.isinf(lambda1):
        return conventional
    return min(lambda1 * g_tilde_1, conventional)


def early_termination_check(lambda2: float, current_radius: float,
                            next_prediction: float) -> bool:
    """True when lambda2 * current_radius < next_prediction; +inf lambda2 disables."""
    if math.isinf(lambda2):
        return False
    return lambda2 * current_radius < next_prediction


def nn_inference_cost(n_t: int, constellation_size: int) -> OpCounter:
    """Arithmetic of one forward pass under the package counting convention.

    Multiply-accumulates for both layers, one squaring per hidden unit for
    the activation argument, and the bias adds.  The exponential itself is
    a transcendental call, not a counted multiply or add.
    """
    inputs = 2 * n_t + 2
    hidden = hidden_width(n_t, constellation_size)
    outputs = constellation_size
    macs = hidden * inputs + outputs * hidden
    return OpCounter(mults=macs + hidden, adds=macs + hidden + outputs)


def feature_cost(n_t: int) -> OpCounter:
    """Arithmetic to build and normalize the reduced input vector.

    z^H z costs n squared magnitudes plus the fold; R^H z exploits the
    triangular structure; normalization is one subtract and one scale per
    feature.
    """
    inputs = 2 * n_t + 2
    mults = n_t + n_t * (n_t + 1) // 2 + inputs
    adds = (2 * n_t - 1) + n_t * (n_t - 1) // 2 + inputs
    return OpCounter(mults=mults, adds=adds)


def dpp_detect(y: np.ndarray, h: np.ndarray, noise_variance: float,
               model: RbfnModel | None, config: DetectorConfig,
               constellation: Constellation) -> DetectionResult:
    """Detect one received vector; the full pipeline of the aided decoder.

    QRD, prediction, sub-tree ordering, radius choice, the guided tree
    search, and the zero-forcing fallback for an empty sphere.  Preprocessing
    (QRD, the fallback's linear solve) is excluded from the counters: it is
    common to every detector under comparison.  The baseline decoder is this
    function with all sub-schemes off and no model.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    n_r, n_t = h.shape
    if y.shape != (n_r,):
        raise ValueError(f"y must have length {n_r}, got {y.shape}")
    if config.needs_model:
        if model is None:
            raise ValueError("this configuration needs a trained model")
        if model.n_t != n_t or model.constellation_size != constellation.size:
            raise ValueError(
                f"model is for n_t={model.n_t}, |S|={model.constellation_size}; "
                f"problem has n_t={n_t}, |S|={constellation.size}")

    tree_ops = OpCounter()
    nn_ops = OpCounter()
    factors = qrd(h)
    z = factors.q1.conj().T @ y
    if factors.q2.shape[1] > 0:
        offset = float(np.sum(np.abs(factors.q2.conj().T @ y) ** 2))
    else:
        offset = 0.0
    f_conv = conventional_radius(noise_variance, n_r, config.epsilon_complement)
    budget_conv = max(f_conv * f_conv - offset, 0.0)

    g_sorted = None
    permutation = None
    if config.needs_model:
        features = extract_features(z, factors.r, noise_variance)
        cost = feature_cost(n_t)
        nn_ops.add(cost.mults, cost.adds)
        raw = predict(model, features)
        cost = nn_inference_cost(n_t, constellation.size)
        nn_ops.add(cost.mults, cost.adds)
        g_sorted, permutation = sorted_predictions(raw)

    if config.enable_nn_radius:
        f_hat = nn_initial_radius(float(g_sorted[0]), config.lambda1,
                                  math.sqrt(budget_conv))
        budget = f_hat * f_hat
    else:
        budget = budget_conv

    problem = SearchProblem(z=z, r=factors.r, constellation=constellation,
                            squared_radius=budget, counter=tree_ops,
                            residual_offset=offset)
    order = constellation.symbols[permutation] if config.enable_nn_ordering else None
    if config.enable_early_termination:
        def stop(current_sq, p):
            return early_termination_check(config.lambda2, math.sqrt(current_sq),
                                           float(g_sorted[p + 1]))
    else:
        stop = None
    outcome = sphere_decode(problem, subtree_order=order, early_stop=stop)

    if outcome.solution is not None:
        solution = outcome.solution
        metric = outcome.metric
        fallback = False
    else:
        solution = zero_forcing_detect(y, h, constellation)
        res = z - problem.r @ solution
        metric = float(res.real @ res.real + res.imag @ res.imag)
        fallback = True
    return DetectionResult(solution=solution, metric=metric,
                           used_fallback=fallback,
                           subtrees_searched=outcome.subtrees_searched,
                           terminated_early=outcome.terminated_early,
                           tree_ops=tree_ops, nn_ops=nn_ops,
                           nodes_visited=outcome.nodes_visited)
