"""Optical channel performance estimation by extended channel probing.

A catalog of probe transceiver configurations, an embedded GN-model line
simulator, the probing pipeline (cap detection, GSNR averaging, margin
computation, configuration selection) and an operation-regime detector.
"""

from .catalog import (
    B2BCurve,
    PltConfig,
    REF_BANDWIDTH_GHZ,
    ber_from_q,
    default_catalog,
    fit_b2b,
    gosnr_from_gsnr,
    gosnr_from_q,
    gsnr_from_gosnr,
    load_catalog,
    load_curves,
    q_from_ber,
    q_from_osnr,
    required_gsnr,
    save_catalog,
    save_curves,
)
from .errors import (
    CatalogError,
    ChanprobeError,
    CharacterizationError,
    DomainError,
    EngineError,
    ExtrapolationError,
    FitError,
    InversionError,
    PowerBudgetError,
    RegimeError,
    SourceError,
)
from .link import (
    Amplifier,
    ConstantPower,
    ConstantPsd,
    Dcf,
    Dcg,
    FilterElement,
    LinkSpec,
    NoiseModel,
    ProbeStimulus,
    Span,
    ase_noise_power,
    filter_penalty,
    fixture,
    fixtures,
    ground_truth_gsnr,
    launch_power,
    legacy_psd,
    load_link,
    nli_noise_power,
    save_link,
    simulate_measurement,
)
from .probing import (
    CapResult,
    FileSource,
    MarginEntry,
    ProbeMeasurement,
    ProbingReport,
    SimulatorSource,
    compute_margins,
    detect_cap,
    equalization_config,
    estimate_link_gsnr,
    run_probing,
    run_sweep,
    select_best,
    verify,
)
from .regime import RegimeInput, RegimeVerdict, build_regime_input, classify

__version__ = "0.1.0"
