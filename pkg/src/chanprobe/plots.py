"""Figure rendering for probing reports: margins bar chart, raw sweep
scatter and regime comparison lines, written to files next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .probing import ProbingReport
from .regime import RegimeInput


def render_margins_figure(report: ProbingReport, path: str | Path) -> None:
    """Implementation margin per configuration, flagging excluded and
    failing entries."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    labels = [m.config_id for m in report.margins]
    values = [m.implementation_margin_db for m in report.margins]
    colors = []
    for m in report.margins:
        if m.excluded_by_cap:
            colors.append("0.75")
        elif m.predicted_pass:
            colors.append("tab:green")
        else:
            colors.append("tab:red")
    bars = ax.bar(range(len(labels)), values, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("GSNR implementation margin [dB]")
    ax.set_title(
        f"{report.link_name}: link GSNR {report.link_gsnr_db:.2f} dB, "
        f"cap {report.cap.cap_gbaud:g} GBd"
        + (f", selected {report.selected_config}" if report.selected_config else "")
    )
    if report.selected_config:
        idx = [m.config_id for m in report.margins].index(report.selected_config)
        bars[idx].set_edgecolor("k")
        bars[idx].set_linewidth(1.6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figure(report: ProbingReport, path: str | Path) -> None:
    """Raw per-measurement GSNR estimates over symbol rate."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ok_x, ok_y, bad_x, bad_y = [], [], [], []
    for m in report.measurements:
        if m.failed or m.gsnr_db is None:
            continue
        if m.symbol_rate_gbaud in report.cap.penalized_rates:
            bad_x.append(m.symbol_rate_gbaud)
            bad_y.append(m.gsnr_db)
        else:
            ok_x.append(m.symbol_rate_gbaud)
            ok_y.append(m.gsnr_db)
    ax.scatter(ok_x, ok_y, s=18, color="tab:blue", label="accepted")
    if bad_x:
        ax.scatter(bad_x, bad_y, s=18, color="tab:red", marker="x", label="penalized")
    ax.axhline(
        report.link_gsnr_db, color="k", ls="--", lw=0.8, label="link GSNR estimate"
    )
    ax.set_xlabel("symbol rate [GBd]")
    ax.set_ylabel("estimated GSNR [dB]")
    ax.set_title(f"{report.link_name}: raw probing estimates")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_regime_figure(regime_input: RegimeInput, path: str | Path) -> None:
    """Constant-PSD versus constant-power GSNR lines over symbol rate."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    rates_psd = [r for r, _ in regime_input.psd_sweep]
    psd = [g for _, g in regime_input.psd_sweep]
    rates_pow = [r for r, _ in regime_input.power_sweep]
    power = [g for _, g in regime_input.power_sweep]
    ax.plot(rates_psd, psd, "o:", color="k", label="constant PSD")
    ax.plot(rates_pow, power, "s-", color="k", label="constant signal power")
    ax.axvline(
        regime_input.reference_rate_gbaud,
        color="0.6",
        ls="--",
        lw=0.8,
        label="reference rate",
    )
    ax.set_xlabel("symbol rate [GBd]")
    ax.set_ylabel("estimated GSNR [dB]")
    ax.set_title(
        f"Regime sweep, reference {regime_input.reference_power_dbm:.1f} dBm"
    )
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
