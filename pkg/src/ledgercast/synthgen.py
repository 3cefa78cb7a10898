"""Seeded synthetic invoices and support series with planted structure.

Generation runs backwards from a planted weekly collections series:

1. A support series (think weekly orders) is drawn around a level with
   optional trend, quarterly/yearly seasonality and AR(1) noise.
2. Collections in week ``w`` are the planted lag combination for the regime
   of ``w`` (Q4 or not) applied to support, plus Gaussian noise scaled to the
   mean signal, times any holiday multiplier.
3. Each week's collections (rounded to cents) are split into invoices paid in
   that week. Every invoice draws a customer, a delay versus its due date from
   the customer's segment (Q4 override when the payment week is in Q4) and
   gets its issue date by walking back over terms plus delay.
4. Payments are simulated ``open_tail_weeks`` past the observation end; those
   invoices that were already issued by the end come out open.

The collections series starts after a lead-in (default one fiscal year) so
invoices paid in the first observed weeks can be issued inside the calendar.
All randomness comes from :class:`~ledgercast.rng.Xoshiro256`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from decimal import Decimal
from typing import Any, Mapping

import numpy as np

from .core import CENT, SEGMENTS, FiscalCalendar, Invoice, Segment, WeeklySeries
from .dataset import Dataset
from .errors import ConfigError
from .rng import Xoshiro256

REGIMES = ("non_q4", "q4")


@dataclass(frozen=True)
class DelayDistribution:
    mean_days: float
    std_days: float
    q4_mean_days: float | None = None
    q4_std_days: float | None = None

    def params(self, q4: bool) -> tuple[float, float]:
        if q4:
            return (
                self.mean_days if self.q4_mean_days is None else self.q4_mean_days,
                self.std_days if self.q4_std_days is None else self.q4_std_days,
            )
        return self.mean_days, self.std_days


@dataclass(frozen=True)
class SupportShape:
    """Support series shape; amplitudes and noise are fractions of ``level``."""

    level: float = 1000.0
    trend: float = 0.0
    quarterly_amplitude: float = 0.0
    yearly_amplitude: float = 0.0
    noise_std: float = 0.2
    ar: float = 0.0


def _default_counts():
    return {Segment.CSB: 12, Segment.COMMERCIAL: 8, Segment.ENTERPRISE: 5}


def _default_terms():
    return {Segment.CSB: 30, Segment.COMMERCIAL: 45, Segment.ENTERPRISE: 60}


def _default_delays():
    return {
        Segment.CSB: DelayDistribution(6.0, 6.0, 10.0, 8.0),
        Segment.COMMERCIAL: DelayDistribution(3.0, 2.5, 4.0, 3.0),
        Segment.ENTERPRISE: DelayDistribution(12.0, 8.0, 20.0, 10.0),
    }


def _default_lags():
    return {"non_q4": ((3, 2.0),), "q4": ((2, 2.5),)}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    fiscal_year_start: date = date(2019, 2, 4)
    lead_in_weeks: int = 52
    weeks: int = 208
    open_tail_weeks: int = 26
    n_customers_per_segment: Mapping[Segment, int] = field(default_factory=_default_counts)
    payment_terms: Mapping[Segment, int] = field(default_factory=_default_terms)
    delay_distributions: Mapping[Segment, DelayDistribution] = field(default_factory=_default_delays)
    planted_lags: Mapping[str, tuple[tuple[int, float], ...]] = field(default_factory=_default_lags)
    holiday_weeks: tuple[tuple[int, float], ...] = ()
    noise_std: float = 0.05
    invoice_rate: float = 1.2
    support: SupportShape = SupportShape()
    support_name: str = "orders"

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "n_customers_per_segment",
             {Segment.parse(k): int(v) for k, v in self.n_customers_per_segment.items()})
        set_(self, "payment_terms", {Segment.parse(k): int(v) for k, v in self.payment_terms.items()})
        set_(self, "delay_distributions", {
            Segment.parse(k): v if isinstance(v, DelayDistribution) else DelayDistribution(**v)
            for k, v in self.delay_distributions.items()
        })
        set_(self, "planted_lags", {
            regime: tuple((int(l), float(c)) for l, c in pairs) for regime, pairs in self.planted_lags.items()
        })
        set_(self, "holiday_weeks", tuple((int(w), float(m)) for w, m in self.holiday_weeks))
        if not isinstance(self.support, SupportShape):
            set_(self, "support", SupportShape(**self.support))
        self.validate()

    def validate(self) -> None:
        segs = self.n_customers_per_segment
        if not segs or any(n <= 0 for n in segs.values()):
            raise ConfigError("customer counts must be positive")
        for seg in segs:
            if seg not in self.payment_terms or seg not in self.delay_distributions:
                raise ConfigError(f"segment {seg.value} needs payment terms and a delay distribution")
            if self.payment_terms[seg] < 0:
                raise ConfigError("payment terms must be nonnegative")
            d = self.delay_distributions[seg]
            if d.params(False)[1] < 0 or d.params(True)[1] < 0:
                raise ConfigError("delay std must be nonnegative")
        if self.weeks <= 0 or self.lead_in_weeks < 0 or self.open_tail_weeks < 0:
            raise ConfigError("week counts must be positive")
        if self.noise_std < 0 or self.support.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.invoice_rate <= 0:
            raise ConfigError("invoice_rate must be positive")
        if not -1 < self.support.ar < 1:
            raise ConfigError("support AR coefficient must lie in (-1, 1)")
        if set(self.planted_lags) != set(REGIMES):
            raise ConfigError(f"planted_lags needs exactly the regimes {REGIMES}")
        for regime, pairs in self.planted_lags.items():
            if not pairs:
                raise ConfigError(f"regime {regime} has no planted lag")
            for lag, coef in pairs:
                if lag < 0 or not math.isfinite(coef):
                    raise ConfigError(f"bad planted lag ({lag}, {coef}) in {regime}")
        for week, mult in self.holiday_weeks:
            if mult <= 0:
                raise ConfigError(f"holiday multiplier for week {week} must be positive")
        if self.weeks < self.max_lag + 10:
            raise ConfigError(
                f"weeks={self.weeks} too short to recover lags up to {self.max_lag} "
                f"(need at least {self.max_lag + 10})"
            )
        if self.lead_in_weeks < self.max_lag:
            raise ConfigError("lead_in_weeks must cover the largest planted lag")

    @property
    def max_lag(self) -> int:
        return max(l for pairs in self.planted_lags.values() for l, _ in pairs)

    @property
    def first_week(self) -> int:
        return self.lead_in_weeks + 1

    @property
    def last_week(self) -> int:
        return self.lead_in_weeks + self.weeks

    def calendar(self) -> FiscalCalendar:
        needed = self.last_week + self.open_tail_weeks
        return FiscalCalendar(self.fiscal_year_start, n_years=max(2, math.ceil(needed / 52) + 1))

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "fiscal_year_start": self.fiscal_year_start.isoformat(),
            "lead_in_weeks": self.lead_in_weeks,
            "weeks": self.weeks,
            "open_tail_weeks": self.open_tail_weeks,
            "n_customers_per_segment": {k.value: v for k, v in self.n_customers_per_segment.items()},
            "payment_terms": {k.value: v for k, v in self.payment_terms.items()},
            "delay_distributions": {k.value: asdict(v) for k, v in self.delay_distributions.items()},
            "planted_lags": {k: [list(p) for p in v] for k, v in self.planted_lags.items()},
            "holiday_weeks": [list(p) for p in self.holiday_weeks],
            "noise_std": self.noise_std,
            "invoice_rate": self.invoice_rate,
            "support": asdict(self.support),
            "support_name": self.support_name,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SynthConfig:
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__) - {"recurring_holidays"}
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        if isinstance(data.get("fiscal_year_start"), str):
            data["fiscal_year_start"] = date.fromisoformat(data["fiscal_year_start"])
        recurring = data.pop("recurring_holidays", None)
        base = cls(**data)
        if recurring:
            base = with_recurring_holidays(base, recurring)
        return base


def with_recurring_holidays(config: SynthConfig, recurring) -> SynthConfig:
    """Expand (week_in_year, multiplier) pairs over every year of the span."""
    weeks = list(config.holiday_weeks)
    last = config.last_week + config.open_tail_weeks
    for item in recurring:
        wiy, mult = (item["week_in_year"], item["multiplier"]) if isinstance(item, Mapping) else item
        w = int(wiy)
        while w <= last:
            if w >= config.first_week:
                weeks.append((w, float(mult)))
            w += 52
    data = config.to_dict()
    data["holiday_weeks"] = sorted(weeks)
    return SynthConfig.from_dict(data)


def _support_series(config: SynthConfig, rng: Xoshiro256, lo: int, hi: int) -> np.ndarray:
    shape = config.support
    n = hi - lo + 1
    out = np.empty(n)
    e = rng.normal() if shape.noise_std > 0 else 0.0
    innov = math.sqrt(1.0 - shape.ar ** 2)
    for i in range(n):
        w = lo + i
        if i:
            e = shape.ar * e + innov * rng.normal() if shape.noise_std > 0 else 0.0
        rel = (
            1.0
            + shape.trend * (w - config.first_week)
            + shape.quarterly_amplitude * math.sin(2 * math.pi * w / 13)
            + shape.yearly_amplitude * math.sin(2 * math.pi * w / 52)
            + shape.noise_std * e
        )
        out[i] = shape.level * rel
    return out


def _split_cents(total_cents: int, weights: list[float]) -> list[int]:
    """Largest-remainder split of ``total_cents`` with every part >= 1 cent."""
    n = len(weights)
    spare = total_cents - n
    wsum = sum(weights)
    raw = [spare * w / wsum for w in weights]
    parts = [int(math.floor(r)) for r in raw]
    order = sorted(range(n), key=lambda i: (-(raw[i] - parts[i]), i))
    for i in order[: spare - sum(parts)]:
        parts[i] += 1
    return [p + 1 for p in parts]


def _draw_delay(rng: Xoshiro256, mean: float, std: float, lower: int, upper: int) -> int:
    # Normal truncated to [lower, upper] by rejection, rounded to whole days.
    for _ in range(1000):
        d = int(round(rng.normal(mean, std)))
        if lower <= d <= upper:
            return d
    return min(max(int(round(mean)), lower), upper)


def generate(config: SynthConfig) -> Dataset:
    cal = config.calendar()
    rng = Xoshiro256(config.seed)
    first, last = config.first_week, config.last_week
    tail_end = last + config.open_tail_weeks
    s_lo = first - config.max_lag

    support_vals = _support_series(config, rng, s_lo, tail_end)
    support_full = WeeklySeries(s_lo, support_vals)

    weeks = np.arange(first, tail_end + 1)
    signal = np.zeros(len(weeks))
    for i, w in enumerate(weeks):
        regime = "q4" if cal.is_q4(int(w)) else "non_q4"
        signal[i] = sum(coef * support_full[int(w) - lag] for lag, coef in config.planted_lags[regime])
    obs = slice(0, last - first + 1)
    level = float(np.mean(np.abs(signal[obs]))) or 1.0
    noise = np.array([rng.normal() for _ in weeks]) * config.noise_std * level
    multipliers = np.ones(len(weeks))
    for w, mult in config.holiday_weeks:
        if first <= w <= tail_end:
            multipliers[w - first] *= mult
    collections = (signal + noise) * multipliers
    collections = np.maximum(collections, 0.01 * level)
    cents = [int(Decimal(repr(float(v))).quantize(CENT) / CENT) for v in collections]

    customers: list[tuple[str, Segment, float]] = []
    for seg in SEGMENTS:
        for k in range(config.n_customers_per_segment.get(seg, 0)):
            size = math.exp(0.5 * rng.normal())
            customers.append((f"{seg.name[:3]}-{k + 1:03d}", seg, size))
    n_customers = len(customers)

    cutoff = cal.last_date_of(last)
    earliest = cal.first_date_of(1)
    invoices: list[Invoice] = []
    counter = 0
    for i, w in enumerate(weeks):
        w = int(w)
        q4 = cal.is_q4(w)
        n_inv = max(1, rng.poisson(config.invoice_rate * n_customers))
        n_inv = min(n_inv, cents[i])
        picks = [customers[rng.choice_index(n_customers)] for _ in range(n_inv)]
        weights = [size * rng.exponential() + 1e-9 for _, _, size in picks]
        amounts = _split_cents(cents[i], weights)
        week_start = cal.first_date_of(w)
        for (cust, seg, _), amount_cents in zip(picks, amounts):
            pay = week_start + timedelta(days=rng.randint(0, 6))
            terms = config.payment_terms[seg]
            mean, std = config.delay_distributions[seg].params(q4)
            latest_start = (pay - earliest).days - terms
            delay = _draw_delay(rng, mean, std, -terms, latest_start)
            issue = pay - timedelta(days=terms + delay)
            if issue > cutoff:
                continue
            counter += 1
            invoices.append(Invoice(
                invoice_id=f"INV{counter:07d}",
                customer_id=cust,
                segment=seg,
                issue_date=issue,
                due_date=issue + timedelta(days=terms),
                amount=Decimal(amount_cents) * CENT,
                payment_date=pay if pay <= cutoff else None,
                payment_terms_days=terms,
            ))
    invoices.sort(key=lambda inv: (inv.issue_date, inv.invoice_id))

    name = config.support_name
    truth = {
        "config": config.to_dict(),
        "planted_lags": {k: list(v) for k, v in config.planted_lags.items()},
        "holiday_weeks": list(config.holiday_weeks),
        "first_week": first,
        "last_week": last,
        "signal": WeeklySeries(first, signal),
        "collections": WeeklySeries(first, np.array(cents) / 100.0),
        "support": {name: support_full},
        "noise_level": config.noise_std * level,
    }
    support = {name: support_full.slice(None, last)}
    return Dataset(tuple(invoices), support, cal, observation_end=cutoff, truth=truth)
