"""Extended channel probing pipeline: sweep the probe configurations,
detect the symbol-rate cap, average the unpenalized GSNR estimates, compute
implementation margins and select the best transceiver configuration."""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

from .catalog import (
    B2BCurve,
    PltConfig,
    gosnr_from_q,
    gsnr_from_gosnr,
    q_from_ber,
    required_gsnr,
)
from .errors import CatalogError, EngineError, SourceError
from .link import (
    LinkSpec,
    NoiseModel,
    PowerMode,
    ProbeStimulus,
    ground_truth_gsnr,
    simulate_measurement,
)

DEFAULT_CAP_THRESHOLD_DB = 2.0

FLAG_EXTRAPOLATED = "Extrapolated"
FLAG_FAILED = "Failed"


class MeasurementSource(Protocol):
    """Anything able to return a BER reading for a probe stimulus."""

    def measure(self, stimulus: ProbeStimulus) -> float: ...


class SimulatorSource:
    """Measurement source backed by the embedded line simulator.

    Ground-truth GSNR is cached per (config, mode) so repeated sweeps only
    pay for the noise draw; the per-call random stream is derived from
    (seed, call index) so results are reproducible regardless of scheduling.
    """

    def __init__(
        self,
        link: LinkSpec,
        curves: dict[str, B2BCurve],
        noise: NoiseModel = NoiseModel(),
    ):
        self.link = link
        self.curves = curves
        self.noise = noise
        self._calls = 0
        self._truth_cache: dict[tuple, float] = {}

    def true_gsnr(self, stimulus: ProbeStimulus) -> float:
        key = (stimulus.config.id, stimulus.mode)
        if key not in self._truth_cache:
            self._truth_cache[key] = ground_truth_gsnr(self.link, stimulus)
        return self._truth_cache[key]

    def measure(self, stimulus: ProbeStimulus) -> float:
        curve = self.curves.get(stimulus.config.id)
        if curve is None:
            raise CatalogError(f"no curve for config {stimulus.config.id!r}")
        idx = self._calls
        self._calls += 1
        return simulate_measurement(
            self.link,
            stimulus,
            curve,
            self.noise,
            call_index=idx,
            true_gsnr_db=self.true_gsnr(stimulus),
        )


class FileSource:
    """Measurement source replaying ingested field readings.

    Readings are consumed in file order per configuration; running out of
    rows for a configuration is a SourceError naming it.
    """

    def __init__(self, readings: dict[str, list[float]]):
        self._readings = {k: list(v) for k, v in readings.items()}
        self._cursor = {k: 0 for k in self._readings}

    @classmethod
    def from_csv(cls, path: str | Path) -> "FileSource":
        readings: dict[str, list[float]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"config_id", "ber"} <= set(
                reader.fieldnames
            ):
                raise SourceError(f"{path}: expected header config_id,mode,ber")
            for rec in reader:
                try:
                    readings.setdefault(rec["config_id"], []).append(
                        float(rec["ber"])
                    )
                except (TypeError, ValueError) as exc:
                    raise SourceError(f"{path}: bad row {rec!r}") from exc
        return cls(readings)

    def measure(self, stimulus: ProbeStimulus) -> float:
        cid = stimulus.config.id
        rows = self._readings.get(cid)
        if rows is None:
            raise SourceError(f"no readings for config {cid!r}")
        i = self._cursor[cid]
        if i >= len(rows):
            raise SourceError(f"readings exhausted for config {cid!r}")
        self._cursor[cid] = i + 1
        return rows[i]


@dataclass(frozen=True)
class ProbeMeasurement:
    config_id: str
    symbol_rate_gbaud: float
    mode: PowerMode
    ber: float
    q_db: Optional[float]
    gosnr_db: Optional[float]
    gsnr_db: Optional[float]
    flags: frozenset = frozenset()

    @property
    def failed(self) -> bool:
        return FLAG_FAILED in self.flags


@dataclass(frozen=True)
class CapResult:
    cap_gbaud: float
    group_medians: dict[float, float]
    penalized_rates: frozenset
    threshold_db: float


@dataclass(frozen=True)
class MarginEntry:
    config_id: str
    line_rate_gbps: int
    modulation: str
    symbol_rate_gbaud: float
    estimated_gsnr_db: float
    required_gsnr_db: float
    extra_system_margin_db: float
    implementation_margin_db: float
    predicted_pass: bool
    excluded_by_cap: bool


@dataclass(frozen=True)
class ProbingReport:
    link_name: str
    mode: PowerMode
    measurements: tuple[ProbeMeasurement, ...]
    cap: CapResult
    link_gsnr_db: float
    margins: tuple[MarginEntry, ...]
    selected_config: Optional[str]
    verification: Optional[tuple[tuple[str, bool, bool], ...]] = None
    regime: Optional[dict] = None


def equalization_config(catalog: Sequence[PltConfig]) -> PltConfig:
    """The configuration used to equalize the network: highest symbol rate,
    ties broken by line rate then id."""
    if not catalog:
        raise CatalogError("empty catalog")
    return min(
        catalog,
        key=lambda c: (-c.symbol_rate_gbaud, -c.line_rate_gbps, c.id),
    )


def _convert(
    config: PltConfig, mode: PowerMode, curve: B2BCurve, ber: float
) -> ProbeMeasurement:
    flags = set()
    if not 0.0 < ber < 0.5:
        return ProbeMeasurement(
            config_id=config.id,
            symbol_rate_gbaud=config.symbol_rate_gbaud,
            mode=mode,
            ber=ber,
            q_db=None,
            gosnr_db=None,
            gsnr_db=None,
            flags=frozenset({FLAG_FAILED}),
        )
    q_db = q_from_ber(ber)
    lo, hi = curve.valid_range
    q_lo, q_hi = (
        curve.coeffs[0] * x * x + curve.coeffs[1] * x + curve.coeffs[2]
        for x in (lo, hi)
    )
    if not q_lo <= q_db <= q_hi:
        flags.add(FLAG_EXTRAPOLATED)
    gosnr_db = gosnr_from_q(curve, q_db, clamp=True)
    gsnr_db = gsnr_from_gosnr(gosnr_db, config.symbol_rate_gbaud)
    return ProbeMeasurement(
        config_id=config.id,
        symbol_rate_gbaud=config.symbol_rate_gbaud,
        mode=mode,
        ber=ber,
        q_db=q_db,
        gosnr_db=gosnr_db,
        gsnr_db=gsnr_db,
        flags=frozenset(flags),
    )


def run_sweep(
    source: MeasurementSource,
    catalog: Sequence[PltConfig],
    curves: dict[str, B2BCurve],
    mode: PowerMode,
    repeats: int = 1,
) -> list[ProbeMeasurement]:
    """Probe every configuration `repeats` times; ordered by
    (catalog index, repeat index)."""
    if repeats < 1:
        raise EngineError("repeats must be >= 1")
    for config in catalog:
        if config.id not in curves:
            raise CatalogError(f"no curve for config {config.id!r}")
    out = []
    for config in catalog:
        curve = curves[config.id]
        stimulus = ProbeStimulus(config=config, mode=mode)
        for _ in range(repeats):
            try:
                ber = source.measure(stimulus)
            except SourceError:
                raise
            except OSError as exc:
                raise SourceError(f"measuring {config.id!r}: {exc}") from exc
            out.append(_convert(config, mode, curve, ber))
    return out


def detect_cap(
    measurements: Sequence[ProbeMeasurement],
    threshold_db: float = DEFAULT_CAP_THRESHOLD_DB,
) -> CapResult:
    """Find the highest symbol rate not suffering a severe filtering penalty.

    Groups are scanned by ascending symbol rate; a group is penalized when
    its median GSNR falls more than threshold_db below the running mean of
    the accepted groups' medians (or when all its measurements failed).
    Penalization is sticky upward.
    """
    if not measurements:
        raise EngineError("no measurements")
    groups: dict[float, list[float]] = {}
    for m in measurements:
        groups.setdefault(m.symbol_rate_gbaud, [])
        if not m.failed and m.gsnr_db is not None:
            groups[m.symbol_rate_gbaud].append(m.gsnr_db)
    rates = sorted(groups)
    if not groups[rates[0]]:
        raise EngineError("no usable measurement in the lowest symbol-rate group")
    medians = {r: statistics.median(groups[r]) for r in rates if groups[r]}
    accepted: list[float] = []
    penalized: set[float] = set()
    broken = False
    for rate in rates:
        if broken:
            penalized.add(rate)
            continue
        if not groups[rate]:
            penalized.add(rate)
            broken = True
            continue
        if accepted:
            running_mean = sum(medians[r] for r in accepted) / len(accepted)
            if medians[rate] < running_mean - threshold_db:
                penalized.add(rate)
                broken = True
                continue
        accepted.append(rate)
    return CapResult(
        cap_gbaud=max(accepted),
        group_medians=medians,
        penalized_rates=frozenset(penalized),
        threshold_db=threshold_db,
    )


def estimate_link_gsnr(
    measurements: Sequence[ProbeMeasurement],
    cap: CapResult,
    use_median: bool = False,
) -> float:
    """Average GSNR over all usable measurements at unpenalized symbol rates."""
    values = [
        m.gsnr_db
        for m in measurements
        if not m.failed
        and m.gsnr_db is not None
        and m.symbol_rate_gbaud not in cap.penalized_rates
    ]
    if not values:
        raise EngineError("no accepted measurements to average")
    if use_median:
        return statistics.median(values)
    return sum(values) / len(values)


def compute_margins(
    link_gsnr_db: float,
    catalog: Sequence[PltConfig],
    curves: dict[str, B2BCurve],
    cap: CapResult,
    extra_system_margin_db: float = 0.0,
) -> list[MarginEntry]:
    out = []
    for config in catalog:
        curve = curves.get(config.id)
        if curve is None:
            raise CatalogError(f"no curve for config {config.id!r}")
        req = required_gsnr(curve, config)
        margin = link_gsnr_db - req - extra_system_margin_db
        excluded = config.symbol_rate_gbaud > cap.cap_gbaud
        out.append(
            MarginEntry(
                config_id=config.id,
                line_rate_gbps=config.line_rate_gbps,
                modulation=config.modulation,
                symbol_rate_gbaud=config.symbol_rate_gbaud,
                estimated_gsnr_db=link_gsnr_db,
                required_gsnr_db=req,
                extra_system_margin_db=extra_system_margin_db,
                implementation_margin_db=margin,
                predicted_pass=margin > 0.0 and not excluded,
                excluded_by_cap=excluded,
            )
        )
    return out


def select_best(margins: Sequence[MarginEntry]) -> Optional[str]:
    """Highest line rate among passing entries; ties broken by larger margin,
    then by lower symbol rate (robustness to filtering drift)."""
    passing = [m for m in margins if m.predicted_pass]
    if not passing:
        return None
    best = min(
        passing,
        key=lambda m: (
            -m.line_rate_gbps,
            -m.implementation_margin_db,
            m.symbol_rate_gbaud,
        ),
    )
    return best.config_id


def verify(
    source: MeasurementSource,
    catalog: Sequence[PltConfig],
    curves: dict[str, B2BCurve],
    margins: Sequence[MarginEntry],
    mode: PowerMode,
) -> list[tuple[str, bool, bool]]:
    """Re-measure every non-excluded configuration once; a configuration
    passes when its measured Q clears the curve's FEC-threshold Q."""
    by_id = {c.id: c for c in catalog}
    out = []
    for entry in margins:
        if entry.excluded_by_cap:
            continue
        config = by_id.get(entry.config_id)
        if config is None:
            raise CatalogError(f"margin entry for unknown config {entry.config_id!r}")
        curve = curves.get(config.id)
        if curve is None:
            raise CatalogError(f"no curve for config {config.id!r}")
        ber = source.measure(ProbeStimulus(config=config, mode=mode))
        if 0.0 < ber < 0.5:
            actual = q_from_ber(ber) >= curve.threshold_q_db
        else:
            actual = False
        out.append((entry.config_id, actual, entry.predicted_pass))
    return out


def run_probing(
    source: MeasurementSource,
    catalog: Sequence[PltConfig],
    curves: dict[str, B2BCurve],
    mode: PowerMode,
    repeats: int = 1,
    threshold_db: float = DEFAULT_CAP_THRESHOLD_DB,
    extra_system_margin_db: float = 0.0,
    link_name: str = "link",
    with_verification: bool = True,
) -> ProbingReport:
    """Full pipeline: sweep, cap detection, averaging, margins, selection
    and (optionally) verification."""
    measurements = run_sweep(source, catalog, curves, mode, repeats)
    cap = detect_cap(measurements, threshold_db)
    link_gsnr = estimate_link_gsnr(measurements, cap)
    margins = compute_margins(link_gsnr, catalog, curves, cap, extra_system_margin_db)
    selected = select_best(margins)
    verification = None
    if with_verification:
        verification = tuple(verify(source, catalog, curves, margins, mode))
    return ProbingReport(
        link_name=link_name,
        mode=mode,
        measurements=tuple(measurements),
        cap=cap,
        link_gsnr_db=link_gsnr,
        margins=tuple(margins),
        selected_config=selected,
        verification=verification,
    )


# ---------------------------------------------------------------------------
# report emission


def _mode_to_dict(mode: PowerMode) -> dict:
    from .link import ConstantPsd

    if isinstance(mode, ConstantPsd):
        return {"mode": "psd", "psd_mw_ghz": mode.psd_mw_ghz}
    return {"mode": "power", "power_dbm": mode.power_dbm}


def report_to_dict(report: ProbingReport) -> dict:
    doc = {
        "link": report.link_name,
        "stimulus": _mode_to_dict(report.mode),
        "cap": {
            "cap_gbaud": report.cap.cap_gbaud,
            "threshold_db": report.cap.threshold_db,
            "group_medians": {
                f"{r:g}": v for r, v in sorted(report.cap.group_medians.items())
            },
            "penalized_rates": sorted(report.cap.penalized_rates),
        },
        "link_gsnr_db": report.link_gsnr_db,
        "measurements": [
            {
                "config_id": m.config_id,
                "symbol_rate_gbaud": m.symbol_rate_gbaud,
                "ber": m.ber,
                "q_db": m.q_db,
                "gosnr_db": m.gosnr_db,
                "gsnr_db": m.gsnr_db,
                "flags": sorted(m.flags),
            }
            for m in report.measurements
        ],
        "margins": [
            {
                "config_id": m.config_id,
                "line_rate_gbps": m.line_rate_gbps,
                "modulation": m.modulation,
                "symbol_rate_gbaud": m.symbol_rate_gbaud,
                "estimated_gsnr_db": m.estimated_gsnr_db,
                "required_gsnr_db": m.required_gsnr_db,
                "extra_system_margin_db": m.extra_system_margin_db,
                "implementation_margin_db": m.implementation_margin_db,
                "predicted_pass": m.predicted_pass,
                "excluded_by_cap": m.excluded_by_cap,
            }
            for m in report.margins
        ],
        "selected_config": report.selected_config,
    }
    if report.verification is not None:
        doc["verification"] = [
            {"config_id": cid, "actual_pass": a, "predicted_pass": p}
            for cid, a, p in report.verification
        ]
    if report.regime is not None:
        doc["regime"] = report.regime
    return doc


def save_report_json(report: ProbingReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def save_margins_csv(report: ProbingReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "config_id",
                "line_rate",
                "modulation",
                "symbol_rate",
                "margin_db",
                "excluded",
                "predicted_pass",
            ]
        )
        for m in report.margins:
            writer.writerow(
                [
                    m.config_id,
                    m.line_rate_gbps,
                    m.modulation,
                    f"{m.symbol_rate_gbaud:g}",
                    f"{m.implementation_margin_db:.6f}",
                    m.excluded_by_cap,
                    m.predicted_pass,
                ]
            )
