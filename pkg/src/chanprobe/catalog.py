"""Probe transceiver catalog, back-to-back characterization and unit conversions.

All OSNR/GOSNR values are referenced to the 12.5 GHz (0.1 nm at 1550 nm)
bandwidth; GSNR is the same quantity re-referenced to the signal's own
symbol rate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erfc, erfcinv

from .errors import (
    CatalogError,
    CharacterizationError,
    DomainError,
    ExtrapolationError,
    FitError,
    InversionError,
)

REF_BANDWIDTH_GHZ = 12.5

BITS_PER_SYMBOL = {
    "QPSK": 2,
    "8QAM": 3,
    "16QAM": 4,
    "32QAM": 5,
    "64QAM": 6,
}

DEFAULT_ROLLOFF = 0.1
DEFAULT_FEC_THRESHOLD_BER = 2.0e-2


@dataclass(frozen=True)
class PltConfig:
    """One probing-light transceiver configuration."""

    id: str
    line_rate_gbps: int
    modulation: str
    symbol_rate_gbaud: float
    occupied_bandwidth_ghz: float

    def __post_init__(self):
        if self.modulation not in BITS_PER_SYMBOL:
            raise CatalogError(f"unknown modulation {self.modulation!r}")
        if self.symbol_rate_gbaud <= 0:
            raise CatalogError(f"{self.id}: symbol rate must be positive")
        if self.occupied_bandwidth_ghz < self.symbol_rate_gbaud:
            raise CatalogError(f"{self.id}: occupied bandwidth below symbol rate")
        cap = 2 * BITS_PER_SYMBOL[self.modulation] * self.symbol_rate_gbaud
        if self.line_rate_gbps > cap:
            raise CatalogError(
                f"{self.id}: line rate {self.line_rate_gbps} exceeds "
                f"dual-polarization bound {cap:.1f}"
            )

    @property
    def bits_per_symbol(self) -> int:
        return BITS_PER_SYMBOL[self.modulation]

    @property
    def rolloff(self) -> float:
        return self.occupied_bandwidth_ghz / self.symbol_rate_gbaud - 1.0


@dataclass(frozen=True)
class B2BCurve:
    """Quadratic back-to-back Q-over-OSNR characteristic of one configuration.

    q_db(x) = a*x**2 + b*x + c with x the OSNR in dB over the 12.5 GHz
    reference bandwidth; only valid on [osnr_min_db, osnr_max_db].
    """

    config_id: str
    coeffs: tuple[float, float, float]
    valid_range: tuple[float, float]
    fec_threshold_ber: float
    required_gosnr_db: float

    def __post_init__(self):
        a, b, _ = self.coeffs
        lo, hi = self.valid_range
        if lo >= hi:
            raise CharacterizationError(f"{self.config_id}: empty validity range")
        if min(2 * a * lo + b, 2 * a * hi + b) <= 0:
            raise CharacterizationError(
                f"{self.config_id}: characterization not monotone on "
                f"[{lo:.2f}, {hi:.2f}]"
            )
        if not lo <= self.required_gosnr_db <= hi:
            raise CharacterizationError(
                f"{self.config_id}: required GOSNR outside validity range"
            )

    @property
    def threshold_q_db(self) -> float:
        return q_from_ber(self.fec_threshold_ber)


def q_from_ber(ber: float) -> float:
    """Q-factor in dB for a given pre-FEC BER (Gaussian relation)."""
    if not 0.0 < ber < 0.5:
        raise DomainError(f"BER {ber} outside (0, 0.5)")
    q_lin = math.sqrt(2.0) * float(erfcinv(2.0 * ber))
    return 20.0 * math.log10(q_lin)


def ber_from_q(q_db: float) -> float:
    """Pre-FEC BER for a Q-factor in dB; exact inverse of :func:`q_from_ber`."""
    if not math.isfinite(q_db):
        raise DomainError(f"Q {q_db} not finite")
    q_lin = 10.0 ** (q_db / 20.0)
    return 0.5 * float(erfc(q_lin / math.sqrt(2.0)))


def q_from_osnr(curve: B2BCurve, osnr_db: float, clamp: bool = False) -> float:
    """Evaluate the characterization at an OSNR; clamp=True pins out-of-range
    inputs to the nearest validity-range endpoint instead of raising."""
    lo, hi = curve.valid_range
    if not lo <= osnr_db <= hi:
        if not clamp:
            raise ExtrapolationError(
                f"{curve.config_id}: OSNR {osnr_db:.2f} dB outside "
                f"[{lo:.2f}, {hi:.2f}]"
            )
        osnr_db = min(max(osnr_db, lo), hi)
    a, b, c = curve.coeffs
    return a * osnr_db * osnr_db + b * osnr_db + c


def gosnr_from_q(curve: B2BCurve, q_db: float, clamp: bool = False) -> float:
    """Invert the characterization: the unique OSNR in the validity range
    whose Q equals q_db.  Monotonicity makes the root unique."""
    lo, hi = curve.valid_range
    q_lo = q_from_osnr(curve, lo)
    q_hi = q_from_osnr(curve, hi)
    if not q_lo <= q_db <= q_hi:
        if not clamp:
            raise InversionError(
                f"{curve.config_id}: Q {q_db:.2f} dB outside attainable "
                f"[{q_lo:.2f}, {q_hi:.2f}]"
            )
        return lo if q_db < q_lo else hi
    a, b, c = curve.coeffs
    if abs(a) < 1e-12:
        return (q_db - c) / b
    disc = b * b - 4.0 * a * (c - q_db)
    if disc < 0:
        raise InversionError(f"{curve.config_id}: no real root for Q {q_db:.2f}")
    sq = math.sqrt(disc)
    roots = ((-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a))
    eps = 1e-9 * max(1.0, hi - lo)
    for r in roots:
        if lo - eps <= r <= hi + eps:
            return min(max(r, lo), hi)
    raise InversionError(
        f"{curve.config_id}: no root in [{lo:.2f}, {hi:.2f}] for Q {q_db:.2f}"
    )


def gsnr_from_gosnr(gosnr_db: float, symbol_rate_gbaud: float) -> float:
    """Re-reference a GOSNR from the 12.5 GHz bandwidth to the symbol rate."""
    if symbol_rate_gbaud <= 0:
        raise DomainError("symbol rate must be positive")
    return gosnr_db + 10.0 * math.log10(REF_BANDWIDTH_GHZ / symbol_rate_gbaud)


def gosnr_from_gsnr(gsnr_db: float, symbol_rate_gbaud: float) -> float:
    """Inverse of :func:`gsnr_from_gosnr`."""
    if symbol_rate_gbaud <= 0:
        raise DomainError("symbol rate must be positive")
    return gsnr_db + 10.0 * math.log10(symbol_rate_gbaud / REF_BANDWIDTH_GHZ)


def required_gsnr(curve: B2BCurve, config: PltConfig) -> float:
    """GSNR at which the configuration just reaches its FEC threshold."""
    if curve.config_id != config.id:
        raise CatalogError(
            f"curve {curve.config_id!r} does not belong to config {config.id!r}"
        )
    return gsnr_from_gosnr(curve.required_gosnr_db, config.symbol_rate_gbaud)


def fit_b2b(
    samples: Sequence[tuple[float, float]],
    fec_threshold_ber: float = DEFAULT_FEC_THRESHOLD_BER,
    config_id: str = "",
) -> B2BCurve:
    """Least-squares quadratic fit of (osnr_db, q_db) samples.

    The validity range is the sampled OSNR range; the required GOSNR is
    solved from the fitted curve at the FEC-threshold Q.
    """
    xs = np.asarray([s[0] for s in samples], dtype=float)
    ys = np.asarray([s[1] for s in samples], dtype=float)
    if np.unique(xs).size < 3:
        raise FitError(
            f"{config_id or 'b2b fit'}: insufficient samples "
            f"({np.unique(xs).size} distinct OSNR values, need >= 3)"
        )
    a, b, c = np.polyfit(xs, ys, 2)
    lo, hi = float(xs.min()), float(xs.max())
    if min(2 * a * lo + b, 2 * a * hi + b) <= 0:
        raise CharacterizationError(
            f"{config_id or 'b2b fit'}: non-monotone characterization on "
            f"[{lo:.2f}, {hi:.2f}]"
        )
    q_thr = q_from_ber(fec_threshold_ber)
    q_lo = a * lo * lo + b * lo + c
    q_hi = a * hi * hi + b * hi + c
    if not q_lo <= q_thr <= q_hi:
        raise CharacterizationError(
            f"{config_id or 'b2b fit'}: threshold Q {q_thr:.2f} dB outside "
            f"fitted range [{q_lo:.2f}, {q_hi:.2f}]"
        )
    probe = B2BCurve(
        config_id=config_id,
        coeffs=(float(a), float(b), float(c)),
        valid_range=(lo, hi),
        fec_threshold_ber=fec_threshold_ber,
        required_gosnr_db=lo,  # placeholder, replaced below
    )
    req = gosnr_from_q(probe, q_thr)
    return B2BCurve(
        config_id=config_id,
        coeffs=(float(a), float(b), float(c)),
        valid_range=(lo, hi),
        fec_threshold_ber=fec_threshold_ber,
        required_gosnr_db=float(req),
    )


# Table of the eleven probe configurations used throughout: line rate,
# modulation, symbol rate in GBd.
_CATALOG_ROWS = [
    (100, "QPSK", 31.5),
    (200, "16QAM", 34.7),
    (300, "64QAM", 34.7),
    (300, "32QAM", 41.7),
    (200, "8QAM", 46.3),
    (400, "64QAM", 46.3),
    (300, "16QAM", 52.1),
    (400, "32QAM", 55.6),
    (200, "QPSK", 69.4),
    (300, "8QAM", 69.4),
    (400, "16QAM", 69.4),
]


def default_catalog(rolloff: float = DEFAULT_ROLLOFF) -> list[PltConfig]:
    """The eleven stock probe configurations."""
    out = []
    for rate, mod, baud in _CATALOG_ROWS:
        out.append(
            PltConfig(
                id=f"{rate}G-{mod}-{baud:g}",
                line_rate_gbps=rate,
                modulation=mod,
                symbol_rate_gbaud=baud,
                occupied_bandwidth_ghz=baud * (1.0 + rolloff),
            )
        )
    return out


# ---------------------------------------------------------------------------
# persistence


def read_b2b_csv(path: str | Path) -> list[tuple[float, float]]:
    """Read back-to-back samples from a CSV with header osnr_db,q_db."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"osnr_db", "q_db"} <= set(
            reader.fieldnames
        ):
            raise FitError(f"{path}: expected header osnr_db,q_db")
        for rec in reader:
            try:
                rows.append((float(rec["osnr_db"]), float(rec["q_db"])))
            except (TypeError, ValueError) as exc:
                raise FitError(f"{path}: bad row {rec!r}") from exc
    return rows


def config_to_dict(config: PltConfig) -> dict:
    return asdict(config)


def config_from_dict(doc: dict) -> PltConfig:
    return PltConfig(
        id=doc["id"],
        line_rate_gbps=int(doc["line_rate_gbps"]),
        modulation=doc["modulation"],
        symbol_rate_gbaud=float(doc["symbol_rate_gbaud"]),
        occupied_bandwidth_ghz=float(doc["occupied_bandwidth_ghz"]),
    )


def curve_to_dict(curve: B2BCurve) -> dict:
    return {
        "config_id": curve.config_id,
        "coeffs": list(curve.coeffs),
        "valid_range": list(curve.valid_range),
        "fec_threshold_ber": curve.fec_threshold_ber,
        "required_gosnr_db": curve.required_gosnr_db,
    }


def curve_from_dict(doc: dict) -> B2BCurve:
    return B2BCurve(
        config_id=doc["config_id"],
        coeffs=tuple(float(v) for v in doc["coeffs"]),
        valid_range=tuple(float(v) for v in doc["valid_range"]),
        fec_threshold_ber=float(doc["fec_threshold_ber"]),
        required_gosnr_db=float(doc["required_gosnr_db"]),
    )


def save_catalog(configs: Iterable[PltConfig], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([config_to_dict(c) for c in configs], indent=2), encoding="utf-8"
    )


def load_catalog(path: str | Path) -> list[PltConfig]:
    docs = json.loads(Path(path).read_text(encoding="utf-8"))
    configs = [config_from_dict(d) for d in docs]
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise CatalogError(f"{path}: duplicate config ids")
    return configs


def save_curves(curves: Iterable[B2BCurve], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([curve_to_dict(c) for c in curves], indent=2), encoding="utf-8"
    )


def load_curves(path: str | Path) -> dict[str, B2BCurve]:
    docs = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(docs, dict):
        docs = [docs]
    curves = {}
    for d in docs:
        curve = curve_from_dict(d)
        curves[curve.config_id] = curve
    return curves
