"""Quarter-regime lag selection for support series and lag-weighted ridge fits.

Weeks are split into two regimes by the fiscal quarter of the *target* week:
Q4 and everything else. Each regime gets its own set of support lags with
its own coefficients; :func:`apply_lags` switches between them week by week.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .core import FiscalCalendar, WeeklySeries
from .errors import DataError, NumericalError, ValidationError

log = logging.getLogger(__name__)

Q4 = "q4"
NON_Q4 = "non_q4"
REGIMES = (NON_Q4, Q4)


@dataclass(frozen=True)
class LagTerm:
    lag: int
    coefficient: float
    score: float = float("nan")


@dataclass(frozen=True)
class LagSpec:
    regime_lags: Mapping[str, tuple[LagTerm, ...]]
    max_lag: int = 13
    selection_threshold: float = 0.05
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if set(self.regime_lags) != set(REGIMES):
            raise ValidationError(f"lag spec needs exactly the regimes {REGIMES}")
        for regime, terms in self.regime_lags.items():
            if not terms:
                raise ValidationError(f"regime {regime} keeps no lag")
            lags = [t.lag for t in terms]
            if len(set(lags)) != len(lags):
                raise ValidationError(f"duplicate lags in regime {regime}")
            if any(not 0 <= l <= self.max_lag for l in lags):
                raise ValidationError(f"regime {regime} lag outside 0..{self.max_lag}")

    def lags(self, regime: str) -> list[int]:
        return [t.lag for t in self.regime_lags[regime]]

    @property
    def deepest_lag(self) -> int:
        return max(t.lag for terms in self.regime_lags.values() for t in terms)

    @classmethod
    def uniform(cls, terms: Sequence[tuple[int, float]], max_lag: int = 13) -> LagSpec:
        """Same (lag, coefficient) pairs in both regimes."""
        t = tuple(LagTerm(int(l), float(c)) for l, c in terms)
        return cls({NON_Q4: t, Q4: t}, max_lag=max(max_lag, max(l for l, _ in terms)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_lag": self.max_lag,
            "selection_threshold": self.selection_threshold,
            "regimes": {
                r: [{"lag": t.lag, "coefficient": t.coefficient,
                     "score": None if np.isnan(t.score) else t.score}
                    for t in self.regime_lags[r]]
                for r in REGIMES
            },
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> LagSpec:
        regimes = {
            r: tuple(LagTerm(int(t["lag"]), float(t["coefficient"]),
                             float("nan") if t.get("score") is None else float(t["score"]))
                     for t in d["regimes"][r])
            for r in REGIMES
        }
        return cls(regimes, int(d["max_lag"]), float(d["selection_threshold"]), tuple(d.get("notes", ())))


def ols_fit(X: np.ndarray, y: np.ndarray, ridge: float | np.ndarray = 0.0,
            names: Sequence[str] | None = None) -> np.ndarray:
    """Solve ``(X'X + diag(ridge)) b = X'y`` through QR of the augmented system.

    ``ridge`` may be a scalar or one value per column. With zero ridge a
    rank-deficient design raises :class:`NumericalError` naming the first
    column that is (numerically) a combination of the earlier ones.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
        raise ValidationError(f"design {X.shape} and target {y.shape} do not align")
    n, p = X.shape
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("design matrix and target must be finite")
    pen = np.broadcast_to(np.asarray(ridge, dtype=float), (p,))
    if np.any(pen < 0):
        raise ValidationError("ridge penalties must be >= 0")
    if p == 0:
        return np.zeros(0)
    A = np.vstack([X, np.diag(np.sqrt(pen))])
    b = np.concatenate([y, np.zeros(p)])
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    scale = max(float(np.max(np.abs(A))), 1e-300) * max(n, p)
    bad = np.flatnonzero(diag <= 1e-10 * scale)
    if len(bad):
        j = int(bad[0])
        name = names[j] if names is not None else f"column {j}"
        raise NumericalError(f"singular design: {name} is collinear with earlier columns")
    return np.linalg.solve(R, Q.T @ b)


def _r2(y: np.ndarray, X: np.ndarray) -> float:
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0:
        return 0.0
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    rss = float(np.sum((y - X @ beta) ** 2))
    return min(1.0, max(0.0, 1.0 - rss / tss))


def lag_matrix(support: WeeklySeries, weeks: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    return np.column_stack([support.take(weeks - l) for l in lags]) if len(lags) else np.empty((len(weeks), 0))


def _regime_weeks(support: WeeklySeries, target: WeeklySeries, regime_mask, max_lag: int) -> np.ndarray:
    lo = max(target.start, support.start + max_lag)
    hi = min(target.end, support.end)
    if hi < lo:
        raise DataError("support and target do not overlap after allowing for max_lag")
    weeks = np.arange(lo, hi + 1)
    if callable(regime_mask):
        mask = np.array([bool(regime_mask(int(w))) for w in weeks])
    else:
        m = np.asarray(regime_mask, dtype=bool)
        if len(m) != len(target):
            raise ValidationError("regime mask must have one entry per target week")
        mask = m[weeks - target.start]
    return weeks[mask]


def score_lags(support: WeeklySeries, target: WeeklySeries, regime_mask, max_lag: int) -> list[tuple[int, float]]:
    """R² gained by each lag over an intercept-only model, on regime weeks.

    ``regime_mask`` is a boolean per target week or a predicate on the week
    number. Only weeks with support available ``max_lag`` weeks back count.
    """
    if max_lag < 0:
        raise ValidationError("max_lag must be >= 0")
    weeks = _regime_weeks(support, target, regime_mask, max_lag)
    if len(weeks) <= max_lag + 5:
        raise DataError(f"{len(weeks)} regime weeks; need more than {max_lag + 5}")
    y = target.take(weeks)
    ones = np.ones((len(weeks), 1))
    return [
        (lag, _r2(y, np.hstack([ones, lag_matrix(support, weeks, [lag])])))
        for lag in range(max_lag + 1)
    ]


def _stepwise(y: np.ndarray, cols: dict[int, np.ndarray], candidates: list[int], threshold: float) -> list[int]:
    chosen: list[int] = []
    base = np.ones((len(y), 1))
    current = 0.0
    while True:
        best, best_gain = None, threshold
        for lag in candidates:
            if lag in chosen:
                continue
            r2 = _r2(y, np.column_stack([base] + [cols[l] for l in chosen + [lag]]))
            gain = r2 - current
            if gain >= best_gain and (best is None or gain > best_gain):
                best, best_gain = lag, gain
        if best is None:
            return chosen
        chosen.append(best)
        current += best_gain


def lag_weighted_fit(X: np.ndarray, y: np.ndarray, lags: Sequence[int], lam: float = 0.0,
                     gamma: float = 0.0, names: Sequence[str] | None = None) -> np.ndarray:
    """Minimize ``|y - Xb|² + lam * sum_j (1 + gamma * lag_j) * b_j²``."""
    if lam < 0 or gamma < 0:
        raise ValidationError("lam and gamma must be >= 0")
    lags = np.asarray(lags, dtype=float)
    if len(lags) != np.asarray(X).shape[1]:
        raise ValidationError("one lag label per column required")
    return ols_fit(X, y, lam * (1.0 + gamma * lags), names)


def select_lags(support: WeeklySeries, target: WeeklySeries, cal: FiscalCalendar, max_lag: int = 13,
                threshold: float = 0.05, ridge: float = 0.0, gamma: float = 0.0) -> LagSpec:
    """Pick lags per regime and fit their coefficients.

    A lag is a candidate when its own R² score reaches ``threshold``. Among
    candidates, lags enter greedily while the best one still adds at least
    ``threshold`` of R² on top of those already chosen; this keeps a lag that
    merely echoes a chosen neighbour (autocorrelated support) or scores by
    chance from riding along. With no candidate the single best-scoring lag
    is kept. Coefficients come from :func:`lag_weighted_fit` without an
    intercept, so the applied regressor is on the target's scale.

    The Q4 regime needs at least two distinct fiscal years of Q4 target weeks;
    otherwise it reuses the non-Q4 lags.
    """
    notes: list[str] = []
    q4_pred = cal.is_q4
    out: dict[str, tuple[LagTerm, ...]] = {}
    weeks_all = _regime_weeks(support, target, lambda w: True, max_lag)
    q4_years = {cal.year_index(int(w)) for w in weeks_all if q4_pred(int(w))}
    fallback_q4 = len(q4_years) < 2
    if fallback_q4:
        msg = f"only {len(q4_years)} Q4 quarter(s) of data; Q4 regime reuses non-Q4 lags"
        log.warning(msg)
        notes.append(msg)
    for regime in REGIMES:
        if regime == Q4 and fallback_q4:
            out[Q4] = out[NON_Q4]
            continue
        pred = (lambda w: q4_pred(w)) if regime == Q4 else (lambda w: not q4_pred(w))
        scores = score_lags(support, target, pred, max_lag)
        weeks = _regime_weeks(support, target, pred, max_lag)
        y = target.take(weeks)
        cols = {lag: support.take(weeks - lag) for lag in range(max_lag + 1)}
        candidates = [lag for lag, s in scores if s >= threshold]
        chosen = _stepwise(y, cols, candidates, threshold)
        if not chosen:
            chosen = [max(scores, key=lambda ls: (ls[1], -ls[0]))[0]]
        chosen.sort()
        score_of = dict(scores)
        beta = lag_weighted_fit(lag_matrix(support, weeks, chosen), y, chosen, ridge, gamma,
                                names=[f"lag {l}" for l in chosen])
        out[regime] = tuple(LagTerm(l, float(b), float(score_of[l])) for l, b in zip(chosen, beta))
    return LagSpec(out, max_lag=max_lag, selection_threshold=threshold, notes=tuple(notes))


def apply_lags(support: WeeklySeries, spec: LagSpec, cal: FiscalCalendar,
               weeks: Sequence[int] | None = None) -> WeeklySeries:
    """``sum(b * support[w - lag])`` with the (lag, b) pairs of week w's regime.

    Without ``weeks`` the output spans every week whose history is covered;
    the first ``deepest_lag`` weeks of support are dropped.
    """
    if weeks is None:
        lo, hi = support.start + spec.deepest_lag, support.end
        if hi < lo:
            return WeeklySeries.empty()
        weeks = np.arange(lo, hi + 1)
    weeks = np.asarray(weeks, dtype=int)
    if len(weeks) and np.any(np.diff(weeks) != 1):
        raise ValidationError("weeks must be consecutive")
    out = np.zeros(len(weeks))
    q4 = cal.q4_mask(weeks)
    for regime, mask in ((Q4, q4), (NON_Q4, ~q4)):
        if not mask.any():
            continue
        for term in spec.regime_lags[regime]:
            out[mask] += term.coefficient * support.take(weeks[mask] - term.lag)
    return WeeklySeries(int(weeks[0]) if len(weeks) else 0, out)


def correlation(a: WeeklySeries, b: WeeklySeries) -> float:
    """Pearson correlation over the weeks both series cover."""
    lo, hi = max(a.start, b.start), min(a.end, b.end)
    if hi - lo < 2:
        raise DataError("series overlap by fewer than 3 weeks")
    x, y = a.slice(lo, hi).values, b.slice(lo, hi).values
    if np.std(x) == 0 or np.std(y) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])
