"""Pinned synthetic setups used by the acceptance suite and ``ledgercast generate``."""

from __future__ import annotations

from typing import Any

from .synthgen import SynthConfig

HOLIDAY_WEEK_IN_YEAR = 47
HOLIDAY_MULTIPLIER = 1.25

# Four observed years; non-Q4 collections follow support three weeks back,
# Q4 collections two weeks back, plus a recurring holiday bump in week 47.
ACCEPTANCE_SYNTH: dict[str, Any] = {
    "weeks": 208,
    "noise_std": 0.05,
    "planted_lags": {"non_q4": [[3, 2.0]], "q4": [[2, 2.5]]},
    "recurring_holidays": [[HOLIDAY_WEEK_IN_YEAR, HOLIDAY_MULTIPLIER]],
}

ACCEPTANCE_PIPELINE: dict[str, Any] = {
    "events": [{"name": "holiday", "weeks_in_year": [HOLIDAY_WEEK_IN_YEAR]}],
}

PRESETS = {"acceptance": (ACCEPTANCE_SYNTH, ACCEPTANCE_PIPELINE)}


def acceptance_synth(seed: int = 1, **overrides: Any) -> SynthConfig:
    return SynthConfig.from_dict({**ACCEPTANCE_SYNTH, "seed": seed, **overrides})


def acceptance_pipeline(**sections: Any):
    from .pipeline.config import from_dict

    return from_dict({**ACCEPTANCE_PIPELINE, **sections})
