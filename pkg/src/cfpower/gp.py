"""Exact Gaussian-process regression.

Kernels are additive sums of bias, linear and standard periodic terms, each
acting on a subset of input columns. Hyperparameters are fitted by maximising
the log marginal likelihood with L-BFGS-B from several seeded starting points.

Conventions
-----------
* Inputs are standardised before fitting: the time column is shifted so the
  first training month is 0 (scale 1, so a 12-month period stays 12), every
  other column is divided by its training mean.
* Targets are z-scored against the training mean and standard deviation.
* Predictive variances include the observation noise and are returned in the
  target's natural units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import DegenerateTargetError, DomainError, FitError, NumericalError, SchemaError

KINDS = ("bias", "linear", "std_periodic")
Z95 = 1.96
LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelTerm:
    """One additive kernel component acting on ``active_dims``."""

    kind: str
    active_dims: tuple[int, ...]
    variance: float = 1.0
    lengthscale: float = 1.0
    period: float = 1.0
    fixed: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        object.__setattr__(self, "active_dims", tuple(int(d) for d in self.active_dims))
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        if not self.active_dims:
            raise SchemaError("kernel term needs at least one active input column")
        if self.kind == "std_periodic" and len(self.active_dims) != 1:
            raise SchemaError("std_periodic acts on exactly one input column")
        unknown = self.fixed - set(self.param_names)
        if unknown:
            raise DomainError(f"{self.kind} has no hyperparameter(s) {sorted(unknown)}")

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.kind == "std_periodic":
            return ("variance", "lengthscale", "period")
        return ("variance",)

    @property
    def learnable(self) -> tuple[str, ...]:
        return tuple(n for n in self.param_names if n not in self.fixed)

    def label(self) -> str:
        dims = ",".join(str(d) for d in self.active_dims)
        return f"{self.kind}[{dims}]"


@dataclass(frozen=True)
class KernelSpec:
    terms: tuple[KernelTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise DomainError("kernel needs at least one term")

    @property
    def max_dim(self) -> int:
        return max(max(t.active_dims) for t in self.terms)

    def learnable_index(self) -> list[tuple[int, str]]:
        return [(i, n) for i, t in enumerate(self.terms) for n in t.learnable]


def default_kernel(n_covariates: int = 2, period: float = 12.0) -> KernelSpec:
    """Time column gets bias + linear + periodic (period fixed); each covariate bias + linear."""
    terms = [
        KernelTerm("bias", (0,)),
        KernelTerm("linear", (0,)),
        KernelTerm("std_periodic", (0,), period=period, fixed=frozenset({"period"})),
    ]
    for d in range(1, n_covariates + 1):
        terms += [KernelTerm("bias", (d,)), KernelTerm("linear", (d,))]
    return KernelSpec(tuple(terms))


def _check_term(term: KernelTerm) -> None:
    if not term.variance >= 0:
        raise DomainError(f"{term.label()}: variance must be >= 0, got {term.variance}")
    if term.kind == "std_periodic":
        if not term.lengthscale > 0:
            raise DomainError(f"{term.label()}: lengthscale must be > 0, got {term.lengthscale}")
        if not term.period > 0:
            raise DomainError(f"{term.label()}: period must be > 0, got {term.period}")


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise SchemaError(f"input matrix must be 2-D, got shape {X.shape}")
    return X


def _term_cov(term: KernelTerm, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    if term.kind == "bias":
        return np.full((X.shape[0], X2.shape[0]), term.variance)
    dims = list(term.active_dims)
    if term.kind == "linear":
        return term.variance * (X[:, dims] @ X2[:, dims].T)
    d = dims[0]
    r = np.abs(X[:, d][:, None] - X2[:, d][None, :])
    s = np.sin(np.pi * r / term.period)
    return term.variance * np.exp(-2.0 * s**2 / term.lengthscale**2)


def kernel_eval(spec: KernelSpec, X, X2=None) -> np.ndarray:
    """Covariance matrix between the rows of ``X`` and ``X2`` (``X2`` defaults to ``X``)."""
    X = _as_2d(X)
    X2 = X if X2 is None else _as_2d(X2)
    if X.shape[1] != X2.shape[1]:
        raise SchemaError(f"column mismatch: {X.shape[1]} vs {X2.shape[1]}")
    if spec.max_dim >= X.shape[1]:
        raise SchemaError(f"kernel uses column {spec.max_dim} but inputs have {X.shape[1]} columns")
    K = np.zeros((X.shape[0], X2.shape[0]))
    for term in spec.terms:
        _check_term(term)
        K += _term_cov(term, X, X2)
    return K


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    """Diagonal of ``kernel_eval(spec, X)`` without forming the matrix."""
    X = _as_2d(X)
    out = np.zeros(X.shape[0])
    for term in spec.terms:
        _check_term(term)
        if term.kind == "linear":
            out += term.variance * np.sum(X[:, list(term.active_dims)] ** 2, axis=1)
        else:
            out += term.variance
    return out


def _term_grads(term: KernelTerm, X: np.ndarray) -> dict[str, np.ndarray]:
    """Derivatives of the term's Gram matrix w.r.t. its learnable hyperparameters."""
    out: dict[str, np.ndarray] = {}
    learn = term.learnable
    if term.kind == "bias":
        if learn:
            out["variance"] = np.ones((X.shape[0], X.shape[0]))
        return out
    dims = list(term.active_dims)
    if term.kind == "linear":
        if learn:
            out["variance"] = X[:, dims] @ X[:, dims].T
        return out
    d = dims[0]
    r = np.abs(X[:, d][:, None] - X[:, d][None, :])
    arg = np.pi * r / term.period
    s = np.sin(arg)
    base = np.exp(-2.0 * s**2 / term.lengthscale**2)
    ell = term.lengthscale
    if "variance" in learn:
        out["variance"] = base
    if "lengthscale" in learn:
        out["lengthscale"] = term.variance * base * 4.0 * s**2 / ell**3
    if "period" in learn:
        ds2_dT = 2.0 * s * np.cos(arg) * (-arg / term.period)
        out["period"] = term.variance * base * (-2.0 / ell**2) * ds2_dT
    return out


def hyperparameter_names(spec: KernelSpec) -> list[str]:
    names = [f"{i}:{spec.terms[i].label()}.{n}" for i, n in spec.learnable_index()]
    return names + ["noise_variance"]


def _get_values(spec: KernelSpec, noise: float) -> np.ndarray:
    vals = [getattr(spec.terms[i], n) for i, n in spec.learnable_index()]
    return np.array(vals + [noise], dtype=float)


def _set_values(spec: KernelSpec, values: Sequence[float]) -> tuple[KernelSpec, float]:
    terms = list(spec.terms)
    for k, (i, n) in enumerate(spec.learnable_index()):
        terms[i] = replace(terms[i], **{n: float(values[k])})
    return KernelSpec(tuple(terms)), float(values[-1])


# ---------------------------------------------------------------------------
# linear algebra


def stable_cholesky(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``A``, adding diagonal jitter if needed.

    Jitter starts at 1e-8 * mean(diag) and grows tenfold up to 1e-2 * mean(diag).
    Returns the factor and the jitter actually added.
    """
    if not np.all(np.isfinite(A)):
        raise NumericalError("covariance matrix has non-finite entries")
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(A)))
    if not scale > 0:
        scale = 1.0
    n = A.shape[0]
    for k in range(-8, -1):
        jitter = 10.0**k * scale
        try:
            return np.linalg.cholesky(A + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("Cholesky failed even with jitter 1e-2 * mean(diag)")


def _lml(spec: KernelSpec, noise: float, X: np.ndarray, y: np.ndarray, want_grad: bool):
    n = y.shape[0]
    K = kernel_eval(spec, X)
    L, _ = stable_cholesky(K + noise * np.eye(n))
    alpha = cho_solve((L, True), y)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI
    if not want_grad:
        return value, None
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n))
    grad = []
    for i, name in spec.learnable_index():
        dK = _term_grads(spec.terms[i], X)[name]
        grad.append(0.5 * float(np.sum(W * dK)))
    grad.append(0.5 * float(np.trace(W)))
    return value, np.array(grad)


# ---------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class Standardization:
    target_mean: float
    target_std: float
    input_offset: tuple[float, ...]
    input_scale: tuple[float, ...]

    @classmethod
    def identity(cls, n_cols: int) -> Standardization:
        return cls(0.0, 1.0, (0.0,) * n_cols, (1.0,) * n_cols)

    @classmethod
    def from_training(cls, X, y, time_column: int | None = 0) -> Standardization:
        X = _as_2d(X)
        y = np.asarray(y, dtype=float)
        std = float(np.std(y))
        if not std > 0:
            raise DegenerateTargetError("target has zero variance over the training window")
        offset, scale = [], []
        for j in range(X.shape[1]):
            if j == time_column:
                offset.append(float(X[0, j]))
                scale.append(1.0)
            else:
                m = float(np.mean(X[:, j]))
                offset.append(0.0)
                scale.append(m if m != 0 else 1.0)
        return cls(float(np.mean(y)), std, tuple(offset), tuple(scale))

    def inputs(self, X) -> np.ndarray:
        X = _as_2d(X)
        if X.shape[1] != len(self.input_scale):
            raise SchemaError(f"expected {len(self.input_scale)} input columns, got {X.shape[1]}")
        return (X - np.array(self.input_offset)) / np.array(self.input_scale)

    def targets(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.target_mean) / self.target_std

    def restore_targets(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.target_std + self.target_mean

    def restore_variance(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) * self.target_std**2


@dataclass(frozen=True)
class RestartResult:
    index: int
    start: tuple[float, ...]
    log_likelihood: float
    success: bool
    status: int
    n_iter: int
    message: str


@dataclass(frozen=True, eq=False)
class GpModel:
    """A GP with fixed hyperparameters conditioned on standardised training data."""

    kernel: KernelSpec
    noise_variance: float
    train_inputs: np.ndarray
    train_targets: np.ndarray
    standardization: Standardization
    seed: int | None = None
    restarts: tuple[RestartResult, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        X = _as_2d(self.train_inputs)
        y = np.asarray(self.train_targets, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise SchemaError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if not self.noise_variance >= 0:
            raise DomainError("noise_variance must be >= 0")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "train_inputs", X)
        object.__setattr__(self, "train_targets", y)

    @property
    def n_train(self) -> int:
        return self.train_targets.shape[0]

    def hyperparameters(self) -> dict[str, float]:
        return dict(zip(hyperparameter_names(self.kernel), _get_values(self.kernel, self.noise_variance)))


@dataclass(frozen=True, eq=False)
class PredictiveDistribution:
    months: list
    mean: np.ndarray
    variance: np.ndarray
    latent_variance: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def ci95_lower(self) -> np.ndarray:
        return self.mean - Z95 * self.sd

    @property
    def ci95_upper(self) -> np.ndarray:
        return self.mean + Z95 * self.sd


@dataclass(frozen=True)
class FitConfig:
    n_restarts: int = 5
    gtol: float = 1e-5
    max_iter: int = 1000
    restart_low: float = 1e-2
    restart_high: float = 1e2
    seed: int = 0
    noise_floor: float = 1e-10
    variance_bounds: tuple[float, float] = (1e-10, 1e4)
    lengthscale_bounds: tuple[float, float] = (1e-3, 1e3)
    period_bounds: tuple[float, float] = (1e-2, 1e4)
    noise_ceiling: float = 1e4

    def __post_init__(self) -> None:
        if self.n_restarts < 1:
            raise DomainError("n_restarts must be >= 1")


# ---------------------------------------------------------------------------
# likelihood, fitting, prediction


def log_marginal_likelihood(model: GpModel, grad: bool = False):
    """Log marginal likelihood of the standardised training targets.

    With ``grad=True`` returns ``(value, gradient)``; the gradient is taken with
    respect to the natural (not log) values of the learnable hyperparameters,
    ordered as :func:`hyperparameter_names` (noise variance last).
    """
    value, g = _lml(model.kernel, model.noise_variance, model.train_inputs, model.train_targets, grad)
    return (value, g) if grad else value


def _log_bounds(spec: KernelSpec, config: FitConfig) -> list[tuple[float, float]]:
    table = {
        "variance": config.variance_bounds,
        "lengthscale": config.lengthscale_bounds,
        "period": config.period_bounds,
    }
    bounds = [table[n] for _, n in spec.learnable_index()]
    bounds.append((config.noise_floor, config.noise_ceiling))
    return [(math.log(lo), math.log(hi)) for lo, hi in bounds]


def fit(inputs, targets, spec: KernelSpec, config: FitConfig | None = None,
        standardization: Standardization | None = None) -> GpModel:
    """Fit hyperparameters by multi-restart L-BFGS-B on the log marginal likelihood.

    Restart 0 starts every learnable hyperparameter at 1; later restarts draw
    log-uniformly from ``[restart_low, restart_high]``. The restart with the
    highest final likelihood wins (ties go to the lowest index).
    """
    config = config or FitConfig()
    X = _as_2d(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise SchemaError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
    if y.shape[0] < 12:
        raise DomainError(f"need at least 12 training rows, got {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("training data contains non-finite values")
    if spec.max_dim >= X.shape[1]:
        raise SchemaError(f"kernel uses column {spec.max_dim} but inputs have {X.shape[1]} columns")
    std = standardization or Standardization.from_training(X, y)
    Xs, ys = std.inputs(X), std.targets(y)

    bounds = _log_bounds(spec, config)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(config.seed)
    starts = [np.clip(np.zeros(len(bounds)), lo, hi)]
    for _ in range(config.n_restarts - 1):
        draw = rng.uniform(math.log(config.restart_low), math.log(config.restart_high), size=len(bounds))
        starts.append(np.clip(draw, lo, hi))

    def objective(theta):
        vals = np.exp(theta)
        kern, noise = _set_values(spec, vals)
        try:
            value, g = _lml(kern, noise, Xs, ys, True)
        except NumericalError:
            return 1e20, np.zeros_like(theta)
        if not np.isfinite(value):
            return 1e20, np.zeros_like(theta)
        return -value, -g * vals

    results: list[RestartResult] = []
    best = None
    for k, theta0 in enumerate(starts):
        try:
            res = minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"gtol": config.gtol, "maxiter": config.max_iter})
            kern, noise = _set_values(spec, np.exp(res.x))
            final, _ = _lml(kern, noise, Xs, ys, False)
            ok = bool(np.isfinite(final))
            status, nit, msg = int(res.status), int(res.nit), str(res.message)
        except (NumericalError, FloatingPointError, ValueError) as exc:
            final, ok, status, nit, msg = -math.inf, False, -1, 0, repr(exc)
        results.append(RestartResult(k, tuple(np.exp(theta0)), final if ok else -math.inf,
                                     ok, status, nit, msg))
        if ok and (best is None or final > best[0]):
            best = (final, kern, noise)

    if best is None:
        raise FitError("all restarts failed", results)
    _, kern, noise = best
    return GpModel(kern, noise, Xs, ys, std, seed=config.seed, restarts=tuple(results))


def predict(model: GpModel, X_star, months=None, include_noise: bool = True) -> PredictiveDistribution:
    """Posterior predictive at raw inputs ``X_star``, in the target's natural units."""
    Xs = model.standardization.inputs(X_star)
    X = model.train_inputs
    n = model.n_train
    L, _ = stable_cholesky(kernel_eval(model.kernel, X) + model.noise_variance * np.eye(n))
    alpha = cho_solve((L, True), model.train_targets)
    Ks = kernel_eval(model.kernel, X, Xs)
    mean_z = Ks.T @ alpha
    v = solve_triangular(L, Ks, lower=True)
    latent_z = np.maximum(kernel_diag(model.kernel, Xs) - np.sum(v**2, axis=0), 0.0)
    total_z = latent_z + (model.noise_variance if include_noise else 0.0)
    std = model.standardization
    return PredictiveDistribution(
        months=list(months) if months is not None else list(range(Xs.shape[0])),
        mean=std.restore_targets(mean_z),
        variance=std.restore_variance(total_z),
        latent_variance=std.restore_variance(latent_z),
    )


# ---------------------------------------------------------------------------
# serialisation


def model_to_dict(model: GpModel) -> dict:
    s = model.standardization
    return {
        "kernel": [
            {
                "kind": t.kind,
                "active_dims": list(t.active_dims),
                "variance": t.variance,
                "lengthscale": t.lengthscale,
                "period": t.period,
                "fixed": sorted(t.fixed),
            }
            for t in model.kernel.terms
        ],
        "noise_variance": model.noise_variance,
        "standardization": {
            "target_mean": s.target_mean,
            "target_std": s.target_std,
            "input_offset": list(s.input_offset),
            "input_scale": list(s.input_scale),
        },
        "train_inputs": model.train_inputs.tolist(),
        "train_targets": model.train_targets.tolist(),
        "seed": model.seed,
        "log_marginal_likelihood": log_marginal_likelihood(model),
    }


def model_from_dict(d: dict) -> GpModel:
    terms = tuple(
        KernelTerm(t["kind"], tuple(t["active_dims"]), t["variance"], t["lengthscale"],
                   t["period"], frozenset(t["fixed"]))
        for t in d["kernel"]
    )
    s = d["standardization"]
    std = Standardization(s["target_mean"], s["target_std"], tuple(s["input_offset"]), tuple(s["input_scale"]))
    return GpModel(KernelSpec(terms), d["noise_variance"], np.array(d["train_inputs"]),
                   np.array(d["train_targets"]), std, seed=d.get("seed"))


def save_model(model: GpModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True))


def load_model(path) -> GpModel:
    return model_from_dict(json.loads(Path(path).read_text()))
