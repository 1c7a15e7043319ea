"""Physics-based lightpath simulator: ASE, single-channel GN-model nonlinear
interference, super-Gaussian filter-cascade penalties and legacy dispersion
compensation elements.

The simulator doubles as measurement source (synthetic BER readings) and as
ground-truth oracle for the probing pipeline tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import scipy.constants as const

from .catalog import (
    B2BCurve,
    PltConfig,
    REF_BANDWIDTH_GHZ,
    ber_from_q,
    gosnr_from_gsnr,
    q_from_osnr,
)
from .errors import CatalogError, PowerBudgetError

LAMBDA_M = 1550e-9

# NLI enhancement applied to dispersion-managed spans; compensated links
# accumulate more nonlinear distortion than the uncompensated closed form
# predicts.
DEFAULT_DM_NLI_ENHANCEMENT = 1.8


@dataclass(frozen=True)
class Dcf:
    """Fiber-based dispersion compensation module."""

    insertion_loss_db: float = 5.0
    compensation_ratio: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.compensation_ratio <= 1.2:
            raise ValueError("compensation ratio outside [0, 1.2]")


@dataclass(frozen=True)
class Dcg:
    """Grating-based dispersion compensation module; adds narrowband filtering."""

    insertion_loss_db: float = 3.0
    bandwidth_3db_ghz: float = 60.0
    order: int = 3


@dataclass(frozen=True)
class Span:
    """One fiber span, optionally terminated by a DCM."""

    length_km: float
    attenuation_db_km: float = 0.2
    dispersion_ps_nm_km: float = 16.7
    gamma_1_w_km: float = 1.3
    dcm: Union[Dcf, Dcg, None] = None

    def __post_init__(self):
        if self.length_km <= 0:
            raise ValueError("span length must be positive")
        if self.attenuation_db_km <= 0:
            raise ValueError("attenuation must be positive")
        if self.gamma_1_w_km < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def loss_db(self) -> float:
        loss = self.attenuation_db_km * self.length_km
        if self.dcm is not None:
            loss += self.dcm.insertion_loss_db
        return loss


@dataclass(frozen=True)
class Amplifier:
    noise_figure_db: float = 5.0
    gain_db: float = 20.0
    max_total_output_power_dbm: float = 23.0

    def __post_init__(self):
        if self.noise_figure_db < 3.0:
            raise ValueError("noise figure below the 3 dB quantum limit")
        if self.gain_db <= 0:
            raise ValueError("gain must be positive")


@dataclass(frozen=True)
class FilterElement:
    bandwidth_3db_ghz: float
    order: int = 3
    center_offset_ghz: float = 0.0

    def __post_init__(self):
        if self.bandwidth_3db_ghz <= 0:
            raise ValueError("filter bandwidth must be positive")
        if self.order < 1:
            raise ValueError("super-Gaussian order must be >= 1")


Element = Union[Span, Amplifier, FilterElement]


@dataclass(frozen=True)
class LinkSpec:
    """Ordered optical elements of one simulated lightpath.

    With loopback=True the element list is traversed forward and then
    mirrored back, matching looped field tests.
    """

    name: str
    elements: tuple[Element, ...]
    loopback: bool = False
    center_frequency_thz: float = 193.4

    def __post_init__(self):
        if not self.elements:
            raise ValueError(f"{self.name}: element list is empty")
        if not any(isinstance(e, Amplifier) for e in self.elements):
            raise ValueError(f"{self.name}: at least one amplifier required")
        pending_span = False
        for el in self.effective_elements():
            if isinstance(el, Span):
                if pending_span:
                    raise ValueError(
                        f"{self.name}: span not followed by an amplifier"
                    )
                pending_span = True
            elif isinstance(el, Amplifier):
                pending_span = False
        if pending_span:
            raise ValueError(f"{self.name}: trailing span has no amplifier")

    def effective_elements(self) -> tuple[Element, ...]:
        # The return path traverses the same amplified spans, so the looped
        # element sequence is the forward list twice; each span keeps its
        # following amplifier.
        if self.loopback:
            return self.elements + self.elements
        return self.elements

    @property
    def span_count(self) -> int:
        return sum(isinstance(e, Span) for e in self.effective_elements())

    @property
    def total_length_km(self) -> float:
        return sum(
            e.length_km for e in self.effective_elements() if isinstance(e, Span)
        )


@dataclass(frozen=True)
class ConstantPsd:
    """Stimulus power mode: same power spectral density for every probe."""

    psd_mw_ghz: float

    def __post_init__(self):
        if self.psd_mw_ghz <= 0:
            raise ValueError("PSD must be positive")


@dataclass(frozen=True)
class ConstantPower:
    """Stimulus power mode: same total signal power for every probe."""

    power_dbm: float

    def __post_init__(self):
        if not math.isfinite(self.power_dbm):
            raise ValueError("power must be finite")


PowerMode = Union[ConstantPsd, ConstantPower]


@dataclass(frozen=True)
class ProbeStimulus:
    config: PltConfig
    mode: PowerMode


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian perturbation of the true Q (in dB) before BER conversion."""

    ber_readout_sigma_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.ber_readout_sigma_db < 0:
            raise ValueError("sigma must be nonnegative")

    def q_offset_db(self, call_index: int) -> float:
        if self.ber_readout_sigma_db == 0.0:
            return 0.0
        rng = np.random.default_rng([self.seed, call_index])
        return float(rng.normal(0.0, self.ber_readout_sigma_db))


def launch_power(stimulus: ProbeStimulus) -> float:
    """Launch power in dBm implied by the stimulus power mode."""
    if isinstance(stimulus.mode, ConstantPower):
        return stimulus.mode.power_dbm
    power_mw = stimulus.mode.psd_mw_ghz * stimulus.config.occupied_bandwidth_ghz
    return 10.0 * math.log10(power_mw)


def legacy_psd(channel_power_dbm: float, ook_bandwidth_ghz: float) -> float:
    """Design PSD in mW/GHz for a legacy network: original channel power
    spread over the 10 Gbit/s channel bandwidth."""
    if ook_bandwidth_ghz <= 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 ** (channel_power_dbm / 10.0) / ook_bandwidth_ghz


def _filter_center_transfer(flt: FilterElement) -> float:
    # Transfer at the channel center; unity for a centered filter.
    x = 2.0 * flt.center_offset_ghz / flt.bandwidth_3db_ghz
    return math.exp(-math.log(2.0) * x ** (2 * flt.order))


def _element_transfer(el: Element) -> float:
    """Linear power transfer of one element at the channel center."""
    if isinstance(el, Span):
        return 10.0 ** (-el.loss_db / 10.0)
    if isinstance(el, Amplifier):
        return 10.0 ** (el.gain_db / 10.0)
    return _filter_center_transfer(el)


def _downstream_transfers(elements: tuple[Element, ...]) -> list[float]:
    """transfers[i] = linear power transfer from the output of element i to
    the receiver."""
    out = [1.0] * len(elements)
    acc = 1.0
    for i in range(len(elements) - 1, -1, -1):
        out[i] = acc
        acc *= _element_transfer(elements[i])
    return out


def link_transfer(link: LinkSpec) -> float:
    """End-to-end linear power transfer at the channel center."""
    acc = 1.0
    for el in link.effective_elements():
        acc *= _element_transfer(el)
    return acc


def ase_noise_power(
    link: LinkSpec,
    in_ref_bandwidth: bool = True,
    signal_bandwidth_ghz: float | None = None,
) -> float:
    """Accumulated ASE power in mW at the receiver.

    Each amplifier contributes h*nu*10^(NF/10)*10^(G/10)*B, attenuated by
    everything downstream of it.
    """
    if in_ref_bandwidth:
        bw_hz = REF_BANDWIDTH_GHZ * 1e9
    else:
        if signal_bandwidth_ghz is None:
            raise ValueError("signal bandwidth required when not in ref bandwidth")
        bw_hz = signal_bandwidth_ghz * 1e9
    nu = link.center_frequency_thz * 1e12
    elements = link.effective_elements()
    downstream = _downstream_transfers(elements)
    total_w = 0.0
    for el, trans in zip(elements, downstream):
        if isinstance(el, Amplifier):
            nf_lin = 10.0 ** (el.noise_figure_db / 10.0)
            g_lin = 10.0 ** (el.gain_db / 10.0)
            total_w += const.h * nu * nf_lin * g_lin * bw_hz * trans
    return total_w * 1e3


def _beta2_s2_km(dispersion_ps_nm_km: float) -> float:
    d_si = dispersion_ps_nm_km * 1e-3  # s/(m*km)
    return d_si * LAMBDA_M**2 / (2.0 * math.pi * const.c)


def _span_nli_psd_w_hz(
    span: Span,
    launch_psd_w_hz: float,
    bandwidth_hz: float,
    dm_enhancement: float,
) -> float:
    """Single-channel GN closed form: NLI PSD generated in one span."""
    if span.gamma_1_w_km == 0.0 or launch_psd_w_hz == 0.0:
        return 0.0
    alpha = span.attenuation_db_km * math.log(10.0) / 10.0  # 1/km, power
    l_eff = (1.0 - math.exp(-alpha * span.length_km)) / alpha
    l_asym = 1.0 / alpha
    beta2 = _beta2_s2_km(span.dispersion_ps_nm_km)
    if isinstance(span.dcm, Dcf):
        beta2 *= abs(1.0 - span.dcm.compensation_ratio)
    elif isinstance(span.dcm, Dcg):
        beta2 = 0.0  # gratings compensate the full span dispersion
    prefactor = (
        (8.0 / 27.0)
        * span.gamma_1_w_km**2
        * launch_psd_w_hz**3
        * l_eff**2
    )
    arg = (math.pi**2 / 2.0) * beta2 * l_asym * bandwidth_hz**2
    if arg < 1e-6:
        # asinh(x)/x -> 1 as residual dispersion vanishes
        phase_term = (math.pi / 2.0) * bandwidth_hz**2
    else:
        phase_term = math.asinh(arg) / (math.pi * beta2 * l_asym)
    psd = prefactor * phase_term
    if span.dcm is not None:
        psd *= dm_enhancement
    return psd


def nli_noise_power(
    link: LinkSpec,
    stimulus: ProbeStimulus,
    dm_enhancement: float = DEFAULT_DM_NLI_ENHANCEMENT,
) -> float:
    """Nonlinear-interference power in mW at the receiver, incoherent
    per-span accumulation over the signal's occupied bandwidth."""
    bw_hz = stimulus.config.occupied_bandwidth_ghz * 1e9
    launch_mw = 10.0 ** (launch_power(stimulus) / 10.0)
    elements = link.effective_elements()
    downstream = _downstream_transfers(elements)
    power_mw = launch_mw
    total_w = 0.0
    for el, trans in zip(elements, downstream):
        if isinstance(el, Span):
            psd_w_hz = power_mw * 1e-3 / bw_hz
            g_nli = _span_nli_psd_w_hz(el, psd_w_hz, bw_hz, dm_enhancement)
            # referenced at the span input: propagate through the span's own
            # loss and everything downstream of it
            total_w += g_nli * bw_hz * _element_transfer(el) * trans
        power_mw *= _element_transfer(el)
    return total_w * 1e3


def _rrc_power_spectrum(freq_ghz: np.ndarray, config: PltConfig) -> np.ndarray:
    """Root-raised-cosine power spectral shape (unit passband)."""
    rs = config.symbol_rate_gbaud
    rolloff = max(config.rolloff, 1e-9)
    f_abs = np.abs(freq_ghz)
    f1 = (1.0 - rolloff) * rs / 2.0
    f2 = (1.0 + rolloff) * rs / 2.0
    s = np.zeros_like(f_abs)
    s[f_abs <= f1] = 1.0
    roll = (f_abs > f1) & (f_abs <= f2)
    s[roll] = 0.5 * (1.0 + np.cos(np.pi / (rolloff * rs) * (f_abs[roll] - f1)))
    return s


def _cascade_filters(link: LinkSpec) -> list[tuple[float, int, float]]:
    """All narrowband elements in traversal order: explicit filters plus the
    filtering of grating-based DCMs."""
    out = []
    for el in link.effective_elements():
        if isinstance(el, FilterElement):
            out.append((el.bandwidth_3db_ghz, el.order, el.center_offset_ghz))
        elif isinstance(el, Span) and isinstance(el.dcm, Dcg):
            out.append((el.dcm.bandwidth_3db_ghz, el.dcm.order, 0.0))
    return out


def filter_penalty(link: LinkSpec, config: PltConfig, n_grid: int = 4001) -> float:
    """SNR penalty in dB from the narrowband filter cascade.

    Modeled as the noise enhancement of an equalizer restoring the filtered
    spectrum: the spectrum-weighted mean of the inverse cascade response.
    Zero for an empty cascade, nonnegative, monotone in cascade length, and
    grows steeply once the cascade bites into the signal's occupied band,
    which is what makes wideband probes collapse on legacy links.
    """
    filters = _cascade_filters(link)
    if not filters:
        return 0.0
    half = config.occupied_bandwidth_ghz / 2.0
    freq = np.linspace(-half, half, n_grid)
    spectrum = _rrc_power_spectrum(freq, config)
    inv_response = np.ones_like(freq)
    ln2 = math.log(2.0)
    for bw, order, offset in filters:
        x = 2.0 * (freq - offset) / bw
        inv_response *= np.exp(ln2 * np.abs(x) ** (2 * order))
    enhanced = np.trapezoid(spectrum * inv_response, freq)
    total = np.trapezoid(spectrum, freq)
    return float(10.0 * math.log10(enhanced / total))


def _check_power_budget(link: LinkSpec, launch_mw: float) -> float:
    """Walk the signal power through the link; returns received power in mW."""
    power_mw = launch_mw
    for el in link.effective_elements():
        power_mw *= _element_transfer(el)
        if isinstance(el, Amplifier):
            power_dbm = 10.0 * math.log10(power_mw)
            if power_dbm > el.max_total_output_power_dbm + 1e-9:
                raise PowerBudgetError(
                    f"{link.name}: {power_dbm:.2f} dBm at amplifier output "
                    f"exceeds rating {el.max_total_output_power_dbm:.2f} dBm"
                )
    return power_mw


def ground_truth_gsnr(
    link: LinkSpec,
    stimulus: ProbeStimulus,
    dm_enhancement: float = DEFAULT_DM_NLI_ENHANCEMENT,
) -> float:
    """Deterministic true GSNR in dB seen by the stimulus at the receiver."""
    launch_mw = 10.0 ** (launch_power(stimulus) / 10.0)
    p_rx_mw = _check_power_budget(link, launch_mw)
    p_ase_mw = ase_noise_power(
        link,
        in_ref_bandwidth=False,
        signal_bandwidth_ghz=stimulus.config.occupied_bandwidth_ghz,
    )
    p_nli_mw = nli_noise_power(link, stimulus, dm_enhancement)
    snr_db = 10.0 * math.log10(p_rx_mw / (p_ase_mw + p_nli_mw))
    return snr_db - filter_penalty(link, stimulus.config)


def simulate_measurement(
    link: LinkSpec,
    stimulus: ProbeStimulus,
    curve: B2BCurve,
    noise: NoiseModel = NoiseModel(),
    call_index: int = 0,
    true_gsnr_db: float | None = None,
) -> float:
    """Synthetic BER reading for one probe.

    Deterministic for a fixed (seed, call_index).  true_gsnr_db may be
    supplied to skip recomputing the link physics across repeats.
    """
    if curve.config_id != stimulus.config.id:
        raise CatalogError(
            f"curve {curve.config_id!r} does not match stimulus config "
            f"{stimulus.config.id!r}"
        )
    if true_gsnr_db is None:
        true_gsnr_db = ground_truth_gsnr(link, stimulus)
    gosnr_true = gosnr_from_gsnr(true_gsnr_db, stimulus.config.symbol_rate_gbaud)
    q_true = q_from_osnr(curve, gosnr_true, clamp=True)
    q_noisy = q_true + noise.q_offset_db(call_index)
    return ber_from_q(q_noisy)


# ---------------------------------------------------------------------------
# fixtures: parameterized approximations of the thirteen looped field links


def _spans(n: int, length_km: float, dcm_pattern: tuple | None = None) -> list:
    """n span+amplifier blocks; dcm_pattern cycles over the spans."""
    out: list[Element] = []
    for i in range(n):
        dcm = dcm_pattern[i % len(dcm_pattern)] if dcm_pattern else None
        span = Span(length_km=length_km, dcm=dcm)
        out.append(span)
        out.append(Amplifier(gain_db=span.loss_db))
    return out


def _link(name, n_spans, span_km, dcm_pattern=None, channel_filters=0):
    elements: list[Element] = []
    elements += [FilterElement(80.0)] * channel_filters
    elements += _spans(n_spans, span_km, dcm_pattern)
    return LinkSpec(name=name, elements=tuple(elements), loopback=True)


def fixtures() -> list[LinkSpec]:
    """The thirteen looped reference links: five long-haul uncompensated
    links and eight regional dispersion-managed links.  Lengths and span
    counts are the looped (back-and-forth) totals."""
    dcf = (Dcf(),)
    mix = (Dcg(), Dcf())
    mix_short = (Dcg(), Dcf(), Dcg())
    return [
        # long haul, no DCMs, no narrowband filtering
        _link("LH_SAL", 7, 1016.0 / 14),
        _link("LH_KRUIO", 12, 1792.0 / 24),
        _link("LH_WAR", 18, 2943.0 / 36),
        _link("LH_POZ", 24, 3751.0 / 48),
        _link("LH_FRA", 37, 5738.0 / 74),
        # regional, 100 GHz fixed grid: 80 GHz filtering from the channel
        # filter modules and ROADMs along the path
        _link("R_SOL", 1, 3.0 / 2, None, channel_filters=5),
        _link("R_TM", 2, 70.0 / 4, dcf, channel_filters=5),
        _link("R_RAP", 2, 144.0 / 4, dcf, channel_filters=5),
        _link("R_PAI", 3, 241.0 / 6, dcf, channel_filters=5),
        _link("R_VIL", 4, 382.0 / 8, dcf, channel_filters=5),
        _link("R_TSIR", 6, 675.0 / 12, dcf, channel_filters=5),
        # mixed DCF+DCG links: gratings add 60 GHz filtering per site
        _link("R_PYS", 4, 485.0 / 8, mix_short, channel_filters=5),
        _link("R_ILM", 6, 822.0 / 12, mix, channel_filters=5),
    ]


def fixture(name: str) -> LinkSpec:
    for link in fixtures():
        if link.name == name:
            return link
    raise KeyError(f"no fixture named {name!r}")


# ---------------------------------------------------------------------------
# persistence


def _element_to_dict(el: Element) -> dict:
    if isinstance(el, Span):
        doc = {
            "type": "span",
            "length_km": el.length_km,
            "attenuation_db_km": el.attenuation_db_km,
            "dispersion_ps_nm_km": el.dispersion_ps_nm_km,
            "gamma_1_w_km": el.gamma_1_w_km,
        }
        if isinstance(el.dcm, Dcf):
            doc["dcm"] = {
                "type": "dcf",
                "insertion_loss_db": el.dcm.insertion_loss_db,
                "compensation_ratio": el.dcm.compensation_ratio,
            }
        elif isinstance(el.dcm, Dcg):
            doc["dcm"] = {
                "type": "dcg",
                "insertion_loss_db": el.dcm.insertion_loss_db,
                "bandwidth_3db_ghz": el.dcm.bandwidth_3db_ghz,
                "order": el.dcm.order,
            }
        return doc
    if isinstance(el, Amplifier):
        return {
            "type": "amp",
            "noise_figure_db": el.noise_figure_db,
            "gain_db": el.gain_db,
            "max_total_output_power_dbm": el.max_total_output_power_dbm,
        }
    return {
        "type": "filter",
        "bandwidth_3db_ghz": el.bandwidth_3db_ghz,
        "order": el.order,
        "center_offset_ghz": el.center_offset_ghz,
    }


def _element_from_dict(doc: dict, where: str) -> Element:
    kind = doc.get("type")
    try:
        if kind == "span":
            dcm = None
            dcm_doc = doc.get("dcm")
            if dcm_doc is not None:
                if dcm_doc.get("type") == "dcf":
                    dcm = Dcf(
                        insertion_loss_db=float(dcm_doc["insertion_loss_db"]),
                        compensation_ratio=float(dcm_doc["compensation_ratio"]),
                    )
                elif dcm_doc.get("type") == "dcg":
                    dcm = Dcg(
                        insertion_loss_db=float(dcm_doc["insertion_loss_db"]),
                        bandwidth_3db_ghz=float(dcm_doc["bandwidth_3db_ghz"]),
                        order=int(dcm_doc["order"]),
                    )
                else:
                    raise ValueError(f"unknown dcm type at {where}/dcm")
            return Span(
                length_km=float(doc["length_km"]),
                attenuation_db_km=float(doc.get("attenuation_db_km", 0.2)),
                dispersion_ps_nm_km=float(doc.get("dispersion_ps_nm_km", 16.7)),
                gamma_1_w_km=float(doc.get("gamma_1_w_km", 1.3)),
                dcm=dcm,
            )
        if kind == "amp":
            return Amplifier(
                noise_figure_db=float(doc.get("noise_figure_db", 5.0)),
                gain_db=float(doc["gain_db"]),
                max_total_output_power_dbm=float(
                    doc.get("max_total_output_power_dbm", 23.0)
                ),
            )
        if kind == "filter":
            return FilterElement(
                bandwidth_3db_ghz=float(doc["bandwidth_3db_ghz"]),
                order=int(doc.get("order", 3)),
                center_offset_ghz=float(doc.get("center_offset_ghz", 0.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"invalid element at {where}: {exc}") from exc
    raise ValueError(f"unknown element type at {where}: {kind!r}")


def link_to_dict(link: LinkSpec) -> dict:
    return {
        "name": link.name,
        "center_frequency_thz": link.center_frequency_thz,
        "loopback": link.loopback,
        "elements": [_element_to_dict(e) for e in link.elements],
    }


def link_from_dict(doc: dict) -> LinkSpec:
    if "elements" not in doc or not isinstance(doc["elements"], list):
        raise ValueError("invalid link at /elements: expected array")
    elements = tuple(
        _element_from_dict(el, f"/elements/{i}")
        for i, el in enumerate(doc["elements"])
    )
    return LinkSpec(
        name=str(doc.get("name", "link")),
        elements=elements,
        loopback=bool(doc.get("loopback", False)),
        center_frequency_thz=float(doc.get("center_frequency_thz", 193.4)),
    )


def save_link(link: LinkSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(link_to_dict(link), indent=2), encoding="utf-8")


def load_link(path: str | Path) -> LinkSpec:
    return link_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
