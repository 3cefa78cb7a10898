"""Sequential model-based hyperparameter search.

A Gaussian process with an ARD Matern-5/2 kernel models the loss over the
unit-cube encoding of the search space; each new trial maximizes expected
improvement. Initial trials come from a scrambled Sobol sequence. A plain
random-search mode shares the interface.

Encoding: continuous and integer dimensions map linearly (or log-linearly)
to [0, 1]; categoricals become one-hot blocks. Dimensions fixed to a single
value are not encoded at all.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import qmc

from .errors import ConfigError, DataError, ValidationError

Params = dict[str, Any]
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Continuous:
    name: str
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValidationError(f"{self.name}: need finite lo <= hi")
        if self.log and self.lo <= 0:
            raise ValidationError(f"{self.name}: log scale needs lo > 0")

    @property
    def fixed(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> int:
        return 0 if self.fixed else 1

    def _t(self, v):
        return np.log(v) if self.log else v

    def encode(self, v) -> list[float]:
        if self.fixed:
            return []
        lo, hi = self._t(self.lo), self._t(self.hi)
        return [float((self._t(v) - lo) / (hi - lo))]

    def decode(self, u: Sequence[float]):
        if self.fixed:
            return float(self.lo)
        lo, hi = self._t(self.lo), self._t(self.hi)
        x = lo + float(np.clip(u[0], 0, 1)) * (hi - lo)
        v = float(np.exp(x)) if self.log else float(x)
        return min(max(v, self.lo), self.hi)

    def contains(self, v) -> bool:
        return self.lo <= v <= self.hi

    def clip(self, v):
        return min(max(float(v), self.lo), self.hi)


@dataclass(frozen=True)
class Integer:
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValidationError(f"{self.name}: need lo <= hi")

    @property
    def fixed(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> int:
        return 0 if self.fixed else 1

    def encode(self, v) -> list[float]:
        return [] if self.fixed else [(v - self.lo) / (self.hi - self.lo)]

    def decode(self, u: Sequence[float]) -> int:
        if self.fixed:
            return int(self.lo)
        return int(min(max(round(self.lo + float(np.clip(u[0], 0, 1)) * (self.hi - self.lo)), self.lo), self.hi))

    def contains(self, v) -> bool:
        return float(v).is_integer() and self.lo <= v <= self.hi

    def clip(self, v) -> int:
        return int(min(max(round(v), self.lo), self.hi))


@dataclass(frozen=True)
class Categorical:
    name: str
    choices: tuple

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.choices:
            raise ValidationError(f"{self.name}: no choices")

    @property
    def fixed(self) -> bool:
        return len(self.choices) == 1

    @property
    def width(self) -> int:
        return 0 if self.fixed else len(self.choices)

    def encode(self, v) -> list[float]:
        if self.fixed:
            return []
        return [1.0 if c == v else 0.0 for c in self.choices]

    def decode(self, u: Sequence[float]):
        if self.fixed:
            return self.choices[0]
        return self.choices[int(np.argmax(u))]

    def contains(self, v) -> bool:
        return v in self.choices

    def clip(self, v):
        return v if v in self.choices else self.choices[0]


Dimension = Continuous | Integer | Categorical


@dataclass(frozen=True)
class ParamSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValidationError("dimension names must be unique")

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    @property
    def width(self) -> int:
        return sum(d.width for d in self.dimensions)

    def encode(self, params: Mapping[str, Any]) -> np.ndarray:
        out: list[float] = []
        for d in self.dimensions:
            out += d.encode(params[d.name])
        return np.array(out)

    def decode(self, u: np.ndarray) -> Params:
        params, i = {}, 0
        for d in self.dimensions:
            params[d.name] = d.decode(u[i:i + d.width])
            i += d.width
        return params

    def contains(self, params: Mapping[str, Any]) -> bool:
        return all(d.contains(params[d.name]) for d in self.dimensions)

    def clip(self, params: Mapping[str, Any]) -> Params:
        return {d.name: d.clip(params[d.name]) for d in self.dimensions}

    def sample_unit(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cols = []
        for d in self.dimensions:
            if d.width == 0:
                continue
            if isinstance(d, Categorical):
                cols.append(np.eye(d.width)[rng.integers(0, d.width, n)])
            else:
                cols.append(rng.random((n, 1)))
        return np.hstack(cols) if cols else np.zeros((n, 0))


@dataclass(frozen=True)
class Trial:
    index: int
    params: Params
    loss: float
    error: str | None = None


@dataclass
class TuneResult:
    best_params: Params
    best_loss: float
    history: list[Trial]
    seed: int
    budget: int
    method: str = "gp"

    def to_csv(self, path: str | Path, names: Sequence[str] | None = None) -> Path:
        path = Path(path)
        names = list(names or (self.history[0].params if self.history else []))
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial_index"] + names + ["loss", "error"])
            for t in self.history:
                w.writerow([t.index] + [_csv_value(t.params[n]) for n in names]
                           + [repr(t.loss), t.error or ""])
        return path


def _csv_value(v):
    return repr(v) if isinstance(v, float) else v


# ---------------------------------------------------------------- GP surrogate

def matern52(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray, variance: float) -> np.ndarray:
    diff = (A[:, None, :] - B[None, :, :]) / lengthscales
    r = np.sqrt(np.maximum(np.sum(diff * diff, axis=-1), 0.0))
    s5r = math.sqrt(5.0) * r
    return variance * (1.0 + s5r + 5.0 / 3.0 * r * r) * np.exp(-s5r)


@dataclass
class GaussianProcess:
    X: np.ndarray
    y: np.ndarray  # standardized
    lengthscales: np.ndarray
    variance: float
    noise: float
    _L: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        K = matern52(self.X, self.X, self.lengthscales, self.variance) + (self.noise + 1e-10) * np.eye(len(self.X))
        self._L = np.linalg.cholesky(K)
        self._alpha = np.linalg.solve(self._L.T, np.linalg.solve(self._L, self.y))

    def predict(self, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Ks = matern52(Xs, self.X, self.lengthscales, self.variance)
        mu = Ks @ self._alpha
        v = np.linalg.solve(self._L, Ks.T)
        var = np.maximum(self.variance - np.sum(v * v, axis=0), 1e-12)
        return mu, np.sqrt(var)


def _neg_log_marginal(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    d = X.shape[1]
    ls = np.exp(theta[:d])
    var = math.exp(theta[d])
    noise = math.exp(theta[d + 1])
    K = matern52(X, X, ls, var) + (noise + 1e-10) * np.eye(len(X))
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return 1e25
    a = np.linalg.solve(L.T, np.linalg.solve(L, y))
    return float(0.5 * y @ a + np.sum(np.log(np.diag(L))) + 0.5 * len(X) * math.log(2 * math.pi))


def fit_gp(X: np.ndarray, y: np.ndarray) -> GaussianProcess:
    """Type-II maximum likelihood over log lengthscales, signal variance and noise.

    Starts from a small grid of shared lengthscales and keeps the best local
    optimum found by L-BFGS-B.
    """
    d = X.shape[1]
    bounds = [(math.log(0.01), math.log(10.0))] * d + [(math.log(0.05), math.log(20.0)), (math.log(1e-6), math.log(1.0))]
    best = None
    for ls0 in (0.1, 0.3, 1.0):
        theta0 = np.array([math.log(ls0)] * d + [0.0, math.log(1e-3)])
        res = minimize(_neg_log_marginal, theta0, args=(X, y), method="L-BFGS-B", bounds=bounds)
        val = float(res.fun)
        if best is None or val < best[0] - 1e-12:
            best = (val, res.x)
    theta = best[1]
    return GaussianProcess(X, y, np.exp(theta[:d]), float(math.exp(theta[d])), float(math.exp(theta[d + 1])))


def expected_improvement(mu: np.ndarray, sigma: np.ndarray, best: float, xi: float = 0.01) -> np.ndarray:
    """EI for minimization."""
    imp = best - mu - xi
    z = imp / sigma
    return imp * ndtr(z) + sigma * np.exp(-0.5 * z * z) / SQRT_2PI


def _project(space: ParamSpace, u: np.ndarray) -> np.ndarray:
    """Snap a unit-cube point to the encoding of the parameters it decodes to."""
    return space.encode(space.decode(u))


def _propose(space: ParamSpace, X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
             n_candidates: int = 2048, n_refine: int = 5) -> np.ndarray:
    gp = fit_gp(X, y)
    best = float(np.min(y))
    cand = space.sample_unit(rng, n_candidates)
    ei = expected_improvement(*gp.predict(cand), best)
    order = np.argsort(-ei, kind="stable")
    d = X.shape[1]

    def neg_ei(u):
        mu, s = gp.predict(u[None, :])
        return -float(expected_improvement(mu, s, best)[0])

    pool = []
    for idx in order[:n_refine]:
        res = minimize(neg_ei, cand[idx], method="L-BFGS-B", bounds=[(0.0, 1.0)] * d)
        pool.append(_project(space, np.clip(res.x, 0, 1)))
    pool += [_project(space, cand[i]) for i in order]
    # first proposal not already tried
    pool_arr = np.array(pool)
    mu, s = gp.predict(pool_arr)
    scores = expected_improvement(mu, s, best)
    for j in np.argsort(-scores, kind="stable"):
        if not np.any(np.all(np.isclose(X, pool_arr[j], atol=1e-9), axis=1)):
            return pool_arr[j]
    return _project(space, space.sample_unit(rng, 1)[0])


def _sobol(space: ParamSpace, n: int, seed: int) -> list[np.ndarray]:
    width = space.width
    if width == 0:
        return [np.zeros(0) for _ in range(n)]
    pts = qmc.Sobol(width, scramble=True, seed=seed).random_base2(max(0, math.ceil(math.log2(max(n, 1)))))
    out = []
    for p in pts[:n]:
        # Sobol coordinates in a one-hot block pick the argmax category
        out.append(_project(space, p))
    return out


def optimize(objective: Callable[[Params], float], space: ParamSpace, budget: int, seed: int = 0,
             method: str = "gp", n_init: int | None = None,
             initial: Sequence[Mapping[str, Any]] = (), on_trial: Callable[[Trial], None] | None = None) -> TuneResult:
    """Minimize ``objective`` over ``space`` in ``budget`` trials.

    ``initial`` parameter sets are evaluated first (they count towards the
    budget); then quasi-random points until ``n_init`` trials exist; then GP
    proposals (``method="gp"``) or uniform random points (``"random"``).
    A trial whose objective raises or returns a non-finite value is recorded
    with loss +inf.
    """
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if method not in ("gp", "random"):
        raise ValidationError(f"unknown method {method!r}")
    if n_init is None:
        n_init = max(5, budget // 5)
    n_init = max(1, min(n_init, budget))
    rng = np.random.Generator(np.random.PCG64(seed))
    sobol = iter(_sobol(space, n_init, seed))
    history: list[Trial] = []
    X: list[np.ndarray] = []

    def run(params: Params) -> None:
        if not space.contains(params):
            raise ValidationError(f"proposal {params} outside the search space")
        err = None
        try:
            loss = float(objective(dict(params)))
            if not math.isfinite(loss):
                err, loss = "non-finite loss", math.inf
        except Exception as exc:  # a failed trial must not end the search
            err, loss = f"{type(exc).__name__}: {exc}", math.inf
        trial = Trial(len(history), dict(params), loss, err)
        history.append(trial)
        X.append(space.encode(params))
        if on_trial:
            on_trial(trial)

    for p in initial:
        if len(history) >= budget:
            break
        run(space.clip(p))
    while len(history) < budget:
        if len(history) < n_init:
            u = next(sobol, None)
            if u is None:
                u = _project(space, space.sample_unit(rng, 1)[0])
        elif method == "random" or space.width == 0:
            u = _project(space, space.sample_unit(rng, 1)[0])
        else:
            losses = np.array([t.loss for t in history])
            finite = np.isfinite(losses)
            if not finite.any():
                u = _project(space, space.sample_unit(rng, 1)[0])
            else:
                # failed trials are scored just above the worst success
                fill = losses[finite].max() + (np.ptp(losses[finite]) or 1.0)
                ys = np.where(finite, losses, fill)
                ys = (ys - ys.mean()) / (ys.std() or 1.0)
                u = _propose(space, np.array(X), ys, rng)
        run(space.decode(u))
    best = min(history, key=lambda t: (t.loss, t.index))
    return TuneResult(dict(best.params), best.loss, history, seed, budget, method)


# ---------------------------------------------------------------- pipeline tuning

FOLD_INC = "fold_weight_inc_"


def weights_from_increments(increments: Sequence[float]) -> tuple[float, ...]:
    """Positive increments -> normalized, nondecreasing fold weights."""
    inc = np.asarray(increments, dtype=float)
    if len(inc) == 0 or np.any(inc <= 0):
        raise ValidationError("weight increments must be positive")
    w = np.cumsum(inc)
    return tuple(float(v) for v in w / w.sum())


def default_space(n_folds: int = 3) -> ParamSpace:
    dims: list[Dimension] = [
        Continuous("eval__alpha", 0.0, 1.0),
        *[Continuous(f"{FOLD_INC}{k + 1}", 0.1, 1.0) for k in range(n_folds)],
        Integer("forecast__quarterly_order", 1, 6),
        Integer("forecast__yearly_order", 1, 3),
        Continuous("forecast__seasonal_ridge", 0.01, 100.0, log=True),
        Continuous("forecast__regressor_ridge", 0.01, 100.0, log=True),
        Continuous("forecast__changepoint_ridge", 0.1, 1000.0, log=True),
        Integer("closure__n_trees", 10, 80),
        Integer("closure__max_depth", 2, 4),
        Continuous("closure__learning_rate", 0.03, 0.3, log=True),
        Integer("closure__min_samples_leaf", 10, 40),
        Integer("windows__short_len", 2, 6),
        Integer("windows__long_len", 8, 13),
        Continuous("lags__threshold", 0.02, 0.15),
    ]
    return ParamSpace(tuple(dims))


def config_with_params(config, params: Mapping[str, Any]):
    flat = {k: v for k, v in params.items() if not k.startswith(FOLD_INC)}
    incs = [params[k] for k in sorted((k for k in params if k.startswith(FOLD_INC)),
                                      key=lambda k: int(k[len(FOLD_INC):]))]
    if incs:
        flat["eval__fold_weights"] = list(weights_from_increments(incs))
    return config.with_overrides(**flat)


def params_from_config(config, space: ParamSpace) -> Params:
    from .pipeline.config import to_dict

    data = to_dict(config)
    weights = np.asarray(config.eval.weights())
    inc = np.diff(np.concatenate([[0.0], weights]))
    inc = inc / inc.max() if inc.max() > 0 else np.ones_like(inc)
    out: Params = {}
    for d in space.dimensions:
        if d.name.startswith(FOLD_INC):
            k = int(d.name[len(FOLD_INC):]) - 1
            out[d.name] = d.clip(inc[k] if k < len(inc) else 1.0)
            continue
        node = data
        for p in d.name.split("__"):
            if not isinstance(node, Mapping) or p not in node:
                raise ConfigError(f"search dimension {d.name} is not a config key")
            node = node[p]
        out[d.name] = d.clip(node)
    return out


def pipeline_loss(dataset, config, cache=None) -> tuple[float, list[float]]:
    """Custom loss over the most recent window's folds, with the config's own alpha and weights."""
    from .metrics import LossWeights, custom_loss
    from .pipeline.evaluate import window_plan
    from .pipeline.run import forecast_at
    from .metrics import mape

    end, folds = window_plan(dataset, config)[-1]
    actual = dataset.collections()
    errors = []
    for f in folds:
        fc = forecast_at(dataset, f.origin, config, "h2", cache=cache)
        errors.append(mape(actual.window(*f.test), fc.forecast))
    loss = custom_loss(errors, LossWeights(tuple(f.weight for f in folds), config.eval.alpha))
    return loss, errors


def tune_pipeline(dataset, base_config, budget: int, seed: int = 0, space: ParamSpace | None = None,
                  method: str | None = None, on_trial=None) -> TuneResult:
    """Tune the H2 pipeline; the base configuration is always the first trial."""
    from .pipeline.evaluate import window_plan
    from .pipeline.run import RunCache

    if budget < 1:
        raise ValidationError("budget must be >= 1")
    try:
        window_plan(dataset, base_config)
    except DataError as exc:
        raise DataError(f"dataset too short for tuning folds: {exc}") from exc
    space = space or default_space(base_config.eval.n_folds)
    cache = RunCache()

    def objective(params: Params) -> float:
        return pipeline_loss(dataset, config_with_params(base_config, params), cache)[0]

    return optimize(objective, space, budget, seed, method or base_config.tune.method,
                    initial=[params_from_config(base_config, space)], on_trial=on_trial)
