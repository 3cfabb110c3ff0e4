"""Neural response-surface pipeline.

A small feedforward network (tanh hidden layer, linear output) learns the
updating cost from a Latin-hypercube sample of true evaluations; the GA
then minimizes the network prediction, the candidate is scored on the true
objective, appended to the training set, and the warm-started network is
refreshed -- repeated for a fixed number of refinements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .optimizers import GaConfig, Objective, OptimizerRun, _check_bounds, _Tracker, ga_minimize
from .updating import UpdatingProblem, make_objective


@dataclass(frozen=True)
class Mlp:
    """Single-hidden-layer perceptron: y = w2 . tanh(w1 x + b1) + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=float)
        b1 = np.asarray(self.b1, dtype=float)
        w2 = np.asarray(self.w2, dtype=float)
        if w1.ndim != 2 or b1.shape != (w1.shape[0],) or w2.shape != (w1.shape[0],):
            raise ValueError("inconsistent layer shapes")
        for array in (w1, b1, w2):
            array.flags.writeable = False
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_units(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def initialize(
        cls, input_dim: int, hidden_units: int, rng: np.random.Generator
    ) -> "Mlp":
        """Uniform init in +-1/sqrt(fan_in) per layer."""
        a1 = 1.0 / math.sqrt(input_dim)
        a2 = 1.0 / math.sqrt(hidden_units)
        return cls(
            w1=rng.uniform(-a1, a1, size=(hidden_units, input_dim)),
            b1=rng.uniform(-a1, a1, size=hidden_units),
            w2=rng.uniform(-a2, a2, size=hidden_units),
            b2=float(rng.uniform(-a2, a2)),
        )


@dataclass(frozen=True)
class MlpGradient:
    """Gradient of the network output w.r.t. every weight and the input."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    x: np.ndarray


@dataclass(frozen=True)
class TrainingSet:
    """Normalized inputs in [-1, 1] paired with true objective costs."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float)
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError("inputs and targets must have equal length")
        if inputs.size and np.abs(inputs).max() > 1.0 + 1e-9:
            raise ValueError("inputs must be normalized to [-1, 1]")
        inputs.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.targets.shape[0]

    def appended(self, x: np.ndarray, target: float) -> "TrainingSet":
        return TrainingSet(
            inputs=np.vstack([self.inputs, x[None, :]]),
            targets=np.append(self.targets, target),
        )


@dataclass(frozen=True)
class SurrogateLoopConfig:
    """Budget of the surrogate pipeline: initial design size, refinement
    count, training cycles, and the inner GA used on the surrogate."""

    n_initial_samples: int = 150
    n_refinements: int = 10
    initial_training_cycles: int = 200
    refresh_training_cycles: int = 5
    hidden_units: int = 8
    ga: GaConfig = GaConfig()
    seed: int = 0

    def __post_init__(self):
        for name in (
            "n_initial_samples",
            "n_refinements",
            "initial_training_cycles",
            "refresh_training_cycles",
            "hidden_units",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class SurrogateModel:
    """Trained network plus the affine maps between raw parameter space and
    the network's normalized/standardized world."""

    net: Mlp
    bounds: np.ndarray
    target_mean: float
    target_std: float
    training_set: TrainingSet

    def predict(self, params: np.ndarray) -> float:
        z = normalize(params, self.bounds)
        return mlp_forward(self.net, z) * self.target_std + self.target_mean


@dataclass(frozen=True)
class SurrogateRun(OptimizerRun):
    """OptimizerRun over true evaluations, plus the final surrogate and
    loop instrumentation."""

    model: SurrogateModel
    weight_init_count: int
    training_losses: tuple[float, ...]


def normalize(x: np.ndarray, bounds) -> np.ndarray:
    """Map raw parameters from [lo, hi] onto [-1, 1] per dimension."""
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    return 2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0


def denormalize(z: np.ndarray, bounds) -> np.ndarray:
    """Inverse of :func:`normalize`."""
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    return lo + 0.5 * (np.asarray(z, dtype=float) + 1.0) * (hi - lo)


def sample_design(bounds, n: int, rng: np.random.Generator) -> np.ndarray:
    """Latin-hypercube design of n points in the bounds box: per dimension,
    each of the n equal strata receives exactly one sample."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = _check_bounds(bounds)
    d = lo.shape[0]
    samples = np.empty((n, d))
    for j in range(d):
        offsets = (np.arange(n) + rng.random(n)) / n
        rng.shuffle(offsets)
        samples[:, j] = lo[j] + offsets * (hi[j] - lo[j])
    return samples


def mlp_forward(net: Mlp, x: np.ndarray) -> float:
    """Network output for one input vector."""
    x = np.asarray(x, dtype=float)
    hidden = np.tanh(net.w1 @ x + net.b1)
    return float(net.w2 @ hidden + net.b2)


def _forward_batch(net: Mlp, inputs: np.ndarray) -> np.ndarray:
    hidden = np.tanh(inputs @ net.w1.T + net.b1)
    return hidden @ net.w2 + net.b2


def mlp_gradient(net: Mlp, x: np.ndarray) -> MlpGradient:
    """Analytic gradient of the output w.r.t. all weights and the input."""
    x = np.asarray(x, dtype=float)
    hidden = np.tanh(net.w1 @ x + net.b1)
    d_hidden = net.w2 * (1.0 - hidden**2)
    return MlpGradient(
        w1=np.outer(d_hidden, x),
        b1=d_hidden,
        w2=hidden,
        b2=1.0,
        x=net.w1.T @ d_hidden,
    )


def _pack(net: Mlp) -> np.ndarray:
    return np.concatenate([net.w1.ravel(), net.b1, net.w2, [net.b2]])


def _unpack(params: np.ndarray, input_dim: int, hidden_units: int) -> Mlp:
    n1 = hidden_units * input_dim
    w1 = params[:n1].reshape(hidden_units, input_dim)
    b1 = params[n1 : n1 + hidden_units]
    w2 = params[n1 + hidden_units : n1 + 2 * hidden_units]
    b2 = float(params[-1])
    return Mlp(w1=w1, b1=b1, w2=w2, b2=b2)


def _sse_loss_grad(
    params: np.ndarray, inputs: np.ndarray, targets: np.ndarray, input_dim: int, hidden: int
) -> tuple[float, np.ndarray]:
    net = _unpack(params, input_dim, hidden)
    z = inputs @ net.w1.T + net.b1
    h = np.tanh(z)
    y = h @ net.w2 + net.b2
    residual = y - targets
    loss = float(residual @ residual)
    e = 2.0 * residual
    d_w2 = h.T @ e
    d_b2 = float(np.sum(e))
    d_h = e[:, None] * net.w2[None, :]
    d_z = d_h * (1.0 - h**2)
    d_w1 = d_z.T @ inputs
    d_b1 = d_z.sum(axis=0)
    grad = np.concatenate([d_w1.ravel(), d_b1, d_w2, [d_b2]])
    return loss, grad


def _scg(
    fn: Callable[[np.ndarray], tuple[float, np.ndarray]], w0: np.ndarray, cycles: int
) -> tuple[np.ndarray, float]:
    """Scaled conjugate gradient minimization of fn for a fixed cycle count.

    Weights only move on steps that do not increase the loss, so the loss
    sequence is non-increasing; the whole procedure is deterministic.
    """
    w = w0.copy()
    f_old, grad = fn(w)
    if cycles == 0:
        return w, f_old
    direction = -grad
    lam = 1.0e-6
    sigma0 = 1.0e-5
    success = True
    n_successes = 0
    mu = 0.0
    kappa = 0.0
    theta = 0.0
    for _ in range(cycles):
        if success:
            mu = direction @ grad
            if mu >= 0:
                direction = -grad
                mu = direction @ grad
            kappa = direction @ direction
            if kappa < 1.0e-300:
                break
            sigma = sigma0 / math.sqrt(kappa)
            _, grad_plus = fn(w + sigma * direction)
            theta = direction @ (grad_plus - grad) / sigma
        delta = theta + lam * kappa
        if delta <= 0:
            delta = lam * kappa
            lam = lam - theta / kappa
        alpha = -mu / delta
        f_new, grad_new = fn(w + alpha * direction)
        comparison = 2.0 * (f_new - f_old) / (alpha * mu)
        if comparison >= 0.0:
            success = True
            n_successes += 1
            w = w + alpha * direction
            grad_old, grad = grad, grad_new
            f_old = f_new
            if grad @ grad == 0.0:
                break
        else:
            success = False
        if comparison < 0.25:
            lam = min(4.0 * lam, 1.0e20)
        elif comparison > 0.75:
            lam = max(0.5 * lam, 1.0e-15)
        if n_successes == w.shape[0]:
            direction = -grad
            n_successes = 0
        elif success:
            gamma = (grad_old - grad) @ grad / mu
            direction = gamma * direction - grad
    return w, f_old


def mlp_train(net: Mlp, training_set: TrainingSet, cycles: int) -> tuple[Mlp, float]:
    """Scaled-conjugate-gradient training on sum-of-squares error.

    Returns the trained network and the final loss.  ``cycles=0`` returns
    the network unchanged.
    """
    if len(training_set) == 0:
        raise ValueError("training set is empty")
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    inputs = training_set.inputs
    targets = training_set.targets

    def fn(params: np.ndarray) -> tuple[float, np.ndarray]:
        loss, grad = _sse_loss_grad(params, inputs, targets, net.input_dim, net.hidden_units)
        if not math.isfinite(loss):
            raise ArithmeticError("non-finite training loss")
        return loss, grad

    packed, loss = _scg(fn, _pack(net), cycles)
    return _unpack(packed, net.input_dim, net.hidden_units), loss


def surrogate_minimize(objective: Objective, bounds, config: SurrogateLoopConfig) -> SurrogateRun:
    """Run the full surrogate loop against an arbitrary objective.

    True-objective budget is exactly ``n_initial_samples + n_refinements``
    evaluations: the Latin-hypercube design plus one evaluation of each
    GA-found surrogate optimum.  The network is initialized once and
    warm-started across refinements.
    """
    lo, hi = _check_bounds(bounds)
    bounds_array = np.column_stack([lo, hi])
    rng = np.random.default_rng(config.seed)
    track = _Tracker(objective)
    history: list[float] = []

    design = sample_design(bounds_array, config.n_initial_samples, rng)
    costs = np.empty(config.n_initial_samples)
    for i in range(config.n_initial_samples):
        costs[i] = track(design[i], f"design point {i}")
        history.append(track.best_cost)

    target_mean = float(np.mean(costs))
    target_std = float(np.std(costs))
    if target_std <= 0.0:
        target_std = 1.0
    training_set = TrainingSet(inputs=normalize(design, bounds_array), targets=costs)

    net = Mlp.initialize(lo.shape[0], config.hidden_units, rng)
    weight_init_count = 1

    def standardized(ts: TrainingSet) -> TrainingSet:
        return TrainingSet(inputs=ts.inputs, targets=(ts.targets - target_mean) / target_std)

    net, loss = mlp_train(net, standardized(training_set), config.initial_training_cycles)
    training_losses = [loss]

    for refinement in range(config.n_refinements):
        model = SurrogateModel(
            net=net,
            bounds=bounds_array,
            target_mean=target_mean,
            target_std=target_std,
            training_set=training_set,
        )
        ga_config = replace(config.ga, seed=int(rng.integers(2**31)))
        inner = ga_minimize(model.predict, bounds_array, ga_config)
        candidate = inner.best_params
        true_cost = track(candidate, f"refinement {refinement}")
        history.append(track.best_cost)
        training_set = training_set.appended(normalize(candidate, bounds_array), true_cost)
        net, loss = mlp_train(net, standardized(training_set), config.refresh_training_cycles)
        training_losses.append(loss)

    assert track.best_params is not None
    model = SurrogateModel(
        net=net,
        bounds=bounds_array,
        target_mean=target_mean,
        target_std=target_std,
        training_set=training_set,
    )
    return SurrogateRun(
        best_params=track.best_params,
        best_cost=track.best_cost,
        history=np.asarray(history),
        evaluations=track.evaluations,
        seed=config.seed,
        model=model,
        weight_init_count=weight_init_count,
        training_losses=tuple(training_losses),
    )


def surrogate_optimize(problem: UpdatingProblem, config: SurrogateLoopConfig) -> SurrogateRun:
    """Surrogate loop on the frequency-error cost of an updating problem."""
    return surrogate_minimize(make_objective(problem), problem.bounds, config)
