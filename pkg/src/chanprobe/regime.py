"""Operation-regime classification: compare constant-PSD and constant-power
sweeps anchored at a common reference stimulus to tell whether the channel
runs above, near or below its optimum power."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .catalog import B2BCurve, PltConfig
from .errors import RegimeError
from .link import ConstantPower, ConstantPsd
from .probing import MeasurementSource, equalization_config, run_sweep

DEFAULT_TOLERANCE_DB = 0.2

NONLINEAR = "Nonlinear"
NEAR_OPTIMUM = "NearOptimum"
LINEAR = "Linear"

_ADJUSTMENT = {
    NONLINEAR: "decrease",
    NEAR_OPTIMUM: "hold",
    LINEAR: "increase",
}


@dataclass(frozen=True)
class RegimeInput:
    psd_sweep: tuple[tuple[float, float], ...]
    power_sweep: tuple[tuple[float, float], ...]
    reference_rate_gbaud: float
    reference_power_dbm: float


@dataclass(frozen=True)
class RegimeVerdict:
    regime: str
    mean_delta_db: float
    tolerance_db: float

    @property
    def suggested_power_adjustment(self) -> str:
        return _ADJUSTMENT[self.regime]


def _per_rate_means(measurements) -> dict[float, float]:
    groups: dict[float, list[float]] = {}
    for m in measurements:
        if not m.failed and m.gsnr_db is not None:
            groups.setdefault(m.symbol_rate_gbaud, []).append(m.gsnr_db)
    return {r: sum(v) / len(v) for r, v in groups.items() if v}


def build_regime_input(
    source: MeasurementSource,
    catalog: Sequence[PltConfig],
    curves: dict[str, B2BCurve],
    reference_power_dbm: float,
    repeats: int = 1,
) -> RegimeInput:
    """Run both power modes anchored at the equalization configuration.

    The constant-PSD sweep spreads the reference power over the reference
    configuration's occupied bandwidth, so the two sweeps coincide at the
    reference rate and no probe ever exceeds the reference power.
    """
    reference = equalization_config(catalog)
    psd = 10.0 ** (reference_power_dbm / 10.0) / reference.occupied_bandwidth_ghz
    psd_meas = run_sweep(source, catalog, curves, ConstantPsd(psd), repeats)
    power_meas = run_sweep(
        source, catalog, curves, ConstantPower(reference_power_dbm), repeats
    )
    psd_sweep = tuple(sorted(_per_rate_means(psd_meas).items()))
    power_sweep = tuple(sorted(_per_rate_means(power_meas).items()))
    return RegimeInput(
        psd_sweep=psd_sweep,
        power_sweep=power_sweep,
        reference_rate_gbaud=reference.symbol_rate_gbaud,
        reference_power_dbm=reference_power_dbm,
    )


def classify(
    regime_input: RegimeInput, tolerance_db: float = DEFAULT_TOLERANCE_DB
) -> RegimeVerdict:
    """Mean signed GSNR difference (constant PSD minus constant power) over
    the rates strictly below the reference: above the dead band the channel
    is nonlinear, below it linear."""
    power = dict(regime_input.power_sweep)
    deltas = [
        gsnr_psd - power[rate]
        for rate, gsnr_psd in regime_input.psd_sweep
        if rate < regime_input.reference_rate_gbaud and rate in power
    ]
    if not deltas:
        raise RegimeError("no symbol rates below the reference rate")
    mean_delta = sum(deltas) / len(deltas)
    if mean_delta > tolerance_db:
        regime = NONLINEAR
    elif mean_delta < -tolerance_db:
        regime = LINEAR
    else:
        regime = NEAR_OPTIMUM
    return RegimeVerdict(
        regime=regime, mean_delta_db=mean_delta, tolerance_db=tolerance_db
    )


def verdict_to_dict(
    verdict: RegimeVerdict, regime_input: RegimeInput | None = None
) -> dict:
    doc = {
        "regime": verdict.regime,
        "mean_delta_db": verdict.mean_delta_db,
        "tolerance_db": verdict.tolerance_db,
        "suggested_power_adjustment": verdict.suggested_power_adjustment,
    }
    if regime_input is not None:
        doc["reference_rate_gbaud"] = regime_input.reference_rate_gbaud
        doc["reference_power_dbm"] = regime_input.reference_power_dbm
    return doc


def save_regime_csv(regime_input: RegimeInput, path: str | Path) -> None:
    """Per-rate sweep table for plotting the two lines."""
    power = dict(regime_input.power_sweep)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["symbol_rate", "gsnr_psd", "gsnr_power"])
        for rate, gsnr_psd in regime_input.psd_sweep:
            writer.writerow(
                [f"{rate:g}", f"{gsnr_psd:.6f}", f"{power.get(rate, math.nan):.6f}"]
            )
