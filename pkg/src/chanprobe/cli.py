"""Command-line frontend: fit characterizations, generate link fixtures,
run probing against the simulator or ingested field CSVs, emit reports,
delimited extracts and figures.

Exit codes: 0 success, 2 input error, 3 characterization/engine error,
4 power-budget error.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import catalog as cat
from . import link as lnk
from . import plots, probing, regime
from .errors import (
    CatalogError,
    ChanprobeError,
    CharacterizationError,
    DomainError,
    EngineError,
    FitError,
    InversionError,
    PowerBudgetError,
    RegimeError,
    SourceError,
)

_EXIT_INPUT = 2
_EXIT_ENGINE = 3
_EXIT_POWER = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option()
def main():
    """Estimate optical channel performance by extended channel probing."""


@main.command()
@click.argument("b2b_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--config-id", required=True, help="Configuration the samples belong to.")
@click.option(
    "--fec-threshold",
    type=float,
    default=cat.DEFAULT_FEC_THRESHOLD_BER,
    show_default=True,
    help="Pre-FEC BER threshold.",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Output curve JSON [default: <config-id>.curve.json].",
)
def characterize(b2b_csv, config_id, fec_threshold, out):
    """Fit a back-to-back Q-over-OSNR curve from an osnr_db,q_db CSV."""
    try:
        samples = cat.read_b2b_csv(b2b_csv)
        curve = cat.fit_b2b(samples, fec_threshold, config_id=config_id)
    except FitError as exc:
        _fail(_EXIT_INPUT, f"insufficient samples or bad input: {exc}")
    except CharacterizationError as exc:
        _fail(_EXIT_ENGINE, f"non-monotone characterization: {exc}")
    except DomainError as exc:
        _fail(_EXIT_INPUT, str(exc))
    path = Path(out) if out else Path(f"{config_id}.curve.json")
    path.write_text(
        json.dumps(cat.curve_to_dict(curve), indent=2) + "\n", encoding="utf-8"
    )
    click.echo(f"wrote {path}")


@main.command()
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default="fixtures",
    show_default=True,
    help="Output directory.",
)
def fixtures(out_dir):
    """Emit the thirteen reference link JSON files."""
    directory = Path(out_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for link in lnk.fixtures():
            lnk.save_link(link, directory / f"{link.name}.json")
    except OSError as exc:
        _fail(_EXIT_INPUT, f"cannot write fixtures: {exc}")
    click.echo(f"wrote {len(lnk.fixtures())} fixtures to {directory}")


def _load_inputs(catalog_path, curves_path):
    configs = (
        cat.load_catalog(catalog_path) if catalog_path else cat.default_catalog()
    )
    curves = cat.load_curves(curves_path)
    return configs, curves


@main.command()
@click.option(
    "--link",
    "link_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Link JSON to simulate.",
)
@click.option(
    "--measurements",
    "measurements_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Field measurement CSV (config_id,mode,ber) to ingest instead.",
)
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None)
@click.option("--curves", "curves_path", type=click.Path(exists=True), required=True)
@click.option(
    "--mode",
    type=click.Choice(["psd", "power"]),
    default="psd",
    show_default=True,
)
@click.option("--psd", type=float, default=0.005, show_default=True, help="mW/GHz.")
@click.option("--power", type=float, default=0.0, show_default=True, help="dBm.")
@click.option(
    "--threshold-db",
    type=float,
    default=probing.DEFAULT_CAP_THRESHOLD_DB,
    show_default=True,
    help="Severe-penalty threshold for cap detection.",
)
@click.option(
    "--margin-db",
    type=float,
    default=0.0,
    show_default=True,
    help="Extra system margin subtracted from every estimate.",
)
@click.option("--repeats", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sigma-db", type=float, default=0.0, show_default=True)
@click.option(
    "--regime",
    "with_regime",
    is_flag=True,
    help="Also run both power modes and classify the operation regime.",
)
@click.option(
    "--plot/--no-plot",
    default=True,
    show_default=True,
    help="Render figures next to the delimited output.",
)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default="report",
    show_default=True,
    help="Output directory.",
)
def probe(
    link_path,
    measurements_path,
    catalog_path,
    curves_path,
    mode,
    psd,
    power,
    threshold_db,
    margin_db,
    repeats,
    seed,
    sigma_db,
    with_regime,
    plot,
    out_dir,
):
    """Run the full probing pipeline and emit report, CSVs and figures."""
    if (link_path is None) == (measurements_path is None):
        _fail(_EXIT_INPUT, "exactly one of --link or --measurements is required")
    if sigma_db < 0:
        _fail(_EXIT_INPUT, "--sigma-db must be nonnegative")
    try:
        configs, curves = _load_inputs(catalog_path, curves_path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, CatalogError) as exc:
        _fail(_EXIT_INPUT, f"loading catalog/curves: {exc}")

    link = None
    link_name = "field-data"
    try:
        if link_path is not None:
            link = lnk.load_link(Path(link_path))
            link_name = link.name
            source = probing.SimulatorSource(
                link, curves, lnk.NoiseModel(sigma_db, seed)
            )
        else:
            source = probing.FileSource.from_csv(measurements_path)
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(_EXIT_INPUT, f"invalid link JSON: {exc}")
    except SourceError as exc:
        _fail(_EXIT_INPUT, str(exc))

    stimulus_mode = (
        lnk.ConstantPsd(psd) if mode == "psd" else lnk.ConstantPower(power)
    )
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    try:
        report = probing.run_probing(
            source,
            configs,
            curves,
            stimulus_mode,
            repeats=repeats,
            threshold_db=threshold_db,
            extra_system_margin_db=margin_db,
            link_name=link_name,
            with_verification=link is not None,
        )
        regime_input = None
        if with_regime:
            if link is None:
                _fail(_EXIT_INPUT, "--regime requires --link (two simulated sweeps)")
            reference = probing.equalization_config(configs)
            reference_power = lnk.launch_power(
                lnk.ProbeStimulus(config=reference, mode=stimulus_mode)
            )
            regime_source = probing.SimulatorSource(
                link, curves, lnk.NoiseModel(sigma_db, seed + 1)
            )
            regime_input = regime.build_regime_input(
                regime_source, configs, curves, reference_power, repeats=repeats
            )
            verdict = regime.classify(regime_input)
            report = dataclasses.replace(
                report, regime=regime.verdict_to_dict(verdict, regime_input)
            )
    except PowerBudgetError as exc:
        _fail(_EXIT_POWER, str(exc))
    except SourceError as exc:
        _fail(_EXIT_INPUT, str(exc))
    except (CatalogError, EngineError, InversionError, RegimeError) as exc:
        _fail(_EXIT_ENGINE, str(exc))

    probing.save_report_json(report, directory / "report.json")
    probing.save_margins_csv(report, directory / "margins.csv")
    if plot:
        plots.render_margins_figure(report, directory / "margins.png")
        plots.render_sweep_figure(report, directory / "sweep.png")
    if regime_input is not None:
        regime.save_regime_csv(regime_input, directory / "regime.csv")
        if plot:
            plots.render_regime_figure(regime_input, directory / "regime.png")
    click.echo(
        f"{link_name}: link GSNR {report.link_gsnr_db:.2f} dB, "
        f"cap {report.cap.cap_gbaud:g} GBd, "
        f"selected {report.selected_config or 'none'}"
    )


if __name__ == "__main__":
    main()
