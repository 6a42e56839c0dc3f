"""Command-line pipeline: simulate, analyze, entropy, report.

    biphoton-lab simulate --config run.conf --out results/
    biphoton-lab analyze results/interferogram.csv --config run.conf --out results/
    biphoton-lab entropy --config run.conf --out results/
    biphoton-lab report --config run.conf --out results/
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, units
from .biphoton import build_state, read_density_csv, signal_marginal, write_density_csv
from .config import REFERENCE_BASE_UM, REFERENCE_DL_PS, ConfigError, RunConfig
from .dispersion import RayKind, inverse_group_velocity, sellmeier_delay_product
from .interferometer import (
    Interferogram,
    detected_spectrum,
    read_interferogram_csv,
    simulate_scan,
    write_interferogram_csv,
)
from .quantum_info import (
    REFERENCE_ENTROPY,
    convention_sweep,
    density_sweep,
    entropy_ledger,
    purity,
    sweep_csv,
    sweep_verdict,
    von_neumann_entropy,
)
from .spectroscopy import (
    REFERENCE_BANDWIDTH_NM,
    bandwidth_from_base,
    extract_envelope,
    fit_notch,
    fit_report,
    gaussian_coherence_fwhm_um,
    recover_spectrum,
    spike_fwhm,
)

log = logging.getLogger("biphoton_lab")


def _kv(rows: dict) -> str:
    return "".join(f"{k} = {repr(float(v)) if isinstance(v, float) else v}\n" for k, v in rows.items())


def _hash_header(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash()}


def dispersion_summary(cfg: RunConfig) -> dict:
    """DL actually used next to the Sellmeier and reference-implied values."""
    crystal = cfg.crystal()
    lam = cfg.center_wavelength_um
    rows: dict = {"DL_used_ps": cfg.DL(), "DL_reference_ps": REFERENCE_DL_PS}
    try:
        rows["inverse_u_o_ps_per_mm"] = float(inverse_group_velocity(crystal, RayKind.ORDINARY, lam))
        rows["inverse_u_e_ps_per_mm"] = float(inverse_group_velocity(crystal, RayKind.EXTRAORDINARY, lam))
        dl = float(sellmeier_delay_product(crystal, lam))
        rows["D_sellmeier_ps_per_mm"] = dl / crystal.length_mm
        rows["DL_sellmeier_ps"] = dl
        rows["c_DL_sellmeier_um"] = dl * units.C_UM_PER_PS
        rows["DL_sellmeier_vs_reference_pct"] = 100.0 * (dl - REFERENCE_DL_PS) / REFERENCE_DL_PS
    except ValueError as exc:
        rows["DL_sellmeier_ps"] = f"unavailable ({exc})"
    rows["crystal"] = crystal.name
    rows["crystal_length_mm"] = crystal.length_mm
    return rows


def _marginal(cfg: RunConfig):
    DL = cfg.DL()
    state = build_state(cfg.grid(DL), DL, cfg["pump.wavelength_nm"] * 1e-3)
    return state, signal_marginal(state)


def cmd_simulate(cfg: RunConfig, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    state, marginal = _marginal(cfg)
    mcfg = cfg.michelson()
    spectrum = detected_spectrum(marginal, cfg.filter(), mcfg.background_weight)
    gram = simulate_scan(spectrum, mcfg, workers=cfg["workers"])

    paths = {
        "interferogram": out / "interferogram.csv",
        "marginal": out / "marginal.csv",
        "detected_spectrum": out / "detected_spectrum.csv",
        "run_meta": out / "run_meta.txt",
    }
    header = {**_hash_header(cfg), "DL_ps": state.DL}
    write_interferogram_csv(gram, paths["interferogram"], header)
    write_density_csv(marginal, paths["marginal"], header)
    write_density_csv(spectrum, paths["detected_spectrum"], header)
    meta = {
        "config_hash": cfg.hash(),
        **dispersion_summary(cfg),
        "grid": state.grid.describe(),
        "state_flags": ",".join(state.flags) or "none",
        "tail_fraction": state.tail_fraction,
        "A0_analytic": state.A0,
        "scan_points": gram.delta_L.size,
    }
    paths["run_meta"].write_text("# effective configuration\n" + cfg.effective_text() + "# derived\n" + _kv(meta))
    log.info("simulate: %d scan points, DL = %.6g ps", gram.delta_L.size, state.DL)
    return paths


def analyze_gram(gram: Interferogram, cfg: RunConfig) -> dict:
    """Envelope, notch fit, bandwidth and (carrier-resolving scans) recovered spectrum."""
    conv = str(gram.meta.get("michelson.path_convention", cfg["michelson.path_convention"]))
    omega = float(gram.meta.get("center_omega_rad_per_ps", cfg.center_omega))
    env = extract_envelope(gram, omega, cfg["analysis.lowpass_periods"], conv)
    fit = fit_notch(env, spike=cfg["analysis.spike"], mask_um=cfg["analysis.mask_um"])
    ref_nm = float(units.wavelength_from_omega(omega)) * 1e3
    bw = bandwidth_from_base(fit.base_width, ref_nm, cfg["analysis.bandwidth_model"], conv)
    extra = {
        "path_convention": conv,
        "reference_base_um": REFERENCE_BASE_UM,
        "reference_bandwidth_nm": REFERENCE_BANDWIDTH_NM,
        "bandwidth_vs_reference_pct": 100.0 * (bw.fwhm_wavelength - REFERENCE_BANDWIDTH_NM) / REFERENCE_BANDWIDTH_NM,
    }
    w = float(gram.meta.get("michelson.background_weight", 0.0))
    if w > 0 and "envelope-only" not in env.flags:
        extra["spike_fwhm_um"] = spike_fwhm(fit)
        extra["spike_fwhm_gaussian_oracle_um"] = gaussian_coherence_fwhm_um(
            cfg["filter.center_nm"], cfg["filter.fwhm_nm"], conv
        )
    recovered = None
    if "envelope-only" in env.flags:
        extra["spectrum_recovered"] = "skipped (envelope-only scan)"
    else:
        recovered = recover_spectrum(gram, omega, cfg.grid(), cfg["analysis.window"], conv)
        extra["window"] = cfg["analysis.window"]
    return {"envelope": env, "fit": fit, "bandwidth": bw, "recovered": recovered, "extra": extra}


def cmd_analyze(gram_path: Path, cfg: RunConfig, out: Path) -> dict[str, Path]:
    result = analyze_gram(read_interferogram_csv(gram_path), cfg)
    return _write_analysis(result, cfg, out, Path(gram_path).name)


def _write_analysis(result: dict, cfg: RunConfig, out: Path, source: str) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = {"envelope": out / "envelope.csv", "fit_report": out / "fit_report.txt"}
    head = f"# config_hash: {cfg.hash()}\n# source: {source}\n"
    paths["envelope"].write_text(head + result["envelope"].to_csv())
    if result["recovered"] is not None:
        paths["spectrum_recovered"] = out / "spectrum_recovered.csv"
        write_density_csv(result["recovered"], paths["spectrum_recovered"], _hash_header(cfg))
    extra = {"config_hash": cfg.hash(), **result["extra"]}
    paths["fit_report"].write_text(fit_report(result["fit"], result["bandwidth"], extra))
    log.info("analyze: base width %.6g um", result["fit"].base_width)
    return paths


def entropy_outputs(cfg: RunConfig) -> dict:
    DL = cfg.DL()
    conv = cfg.ledger_convention()
    density_file = cfg["entropy.density_file"]
    if density_file:
        p = Path(density_file)
        density = read_density_csv(p if p.is_absolute() else cfg.base_dir / p, cfg.center_omega)
        rows = density_sweep(density, DL, cfg["entropy.log_bases"], cfg["entropy.variables"], cfg["entropy.modes"])
    else:
        _, density = _marginal(cfg)
        rows = convention_sweep(
            DL,
            density.grid.spacing,
            cfg.center_omega,
            cfg["entropy.spans_x"],
            cfg["entropy.log_bases"],
            cfg["entropy.variables"],
            cfg["entropy.modes"],
        )
    S = von_neumann_entropy(density, conv, DL)
    report = entropy_ledger(S, conv, purity(density), density.grid.describe())
    return {"rows": rows, "report": report, "density": density, "verdict": sweep_verdict(rows)}


def cmd_entropy(cfg: RunConfig, out: Path) -> dict[str, Path]:
    return _write_entropy(entropy_outputs(cfg), cfg, out)


def _write_entropy(result: dict, cfg: RunConfig, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "entropy_table": out / "entropy_table.csv",
        "entropy_ledger": out / "entropy_ledger.txt",
        "entropy_report": out / "entropy_report.csv",
    }
    head = f"# config_hash: {cfg.hash()}\n# target: {REFERENCE_ENTROPY} ({result['verdict']})\n"
    paths["entropy_table"].write_text(head + sweep_csv(result["rows"]))
    rep = result["report"]
    paths["entropy_ledger"].write_text(f"config_hash = {cfg.hash()}\n" + rep.to_keyvalue() + f"verdict = {result['verdict']}\n")
    paths["entropy_report"].write_text(f"# config_hash: {cfg.hash()}\n{rep.csv_header()}\n{rep.to_csv_row()}\n")
    log.info("entropy: %s", result["verdict"])
    return paths


def cmd_report(cfg: RunConfig, out: Path) -> dict[str, Path]:
    paths = cmd_simulate(cfg, out)
    # analyze what was written, so the report exercises the interchange format
    analysis = analyze_gram(read_interferogram_csv(paths["interferogram"]), cfg)
    paths.update(_write_analysis(analysis, cfg, out, paths["interferogram"].name))
    ent = entropy_outputs(cfg)
    paths.update(_write_entropy(ent, cfg, out))
    fit, bw = analysis["fit"], analysis["bandwidth"]
    rep = ent["report"]
    summary = {
        "config_hash": cfg.hash(),
        **dispersion_summary(cfg),
        "fitted_base_width_um": fit.base_width,
        "reference_base_um": REFERENCE_BASE_UM,
        "base_vs_reference_pct": 100.0 * (fit.base_width - REFERENCE_BASE_UM) / REFERENCE_BASE_UM,
        "bandwidth_model_nm": bw.fwhm_wavelength,
        "bandwidth_reference_nm": REFERENCE_BANDWIDTH_NM,
        "bandwidth_vs_reference_pct": analysis["extra"]["bandwidth_vs_reference_pct"],
        "purity": rep.purity,
        "S_sub": rep.S_sub,
        "S_sub_convention": rep.convention.tag(),
        "S_total": rep.S_total,
        "S_AgivenB": rep.S_AgivenB,
        "S_mutual": rep.S_mutual,
        "entropy_reference_value": REFERENCE_ENTROPY,
        "entropy_verdict": ent["verdict"],
    }
    for key in ("spike_fwhm_um", "spike_fwhm_gaussian_oracle_um"):
        if key in analysis["extra"]:
            summary[key] = analysis["extra"][key]
    paths["summary"] = out / "summary.txt"
    paths["summary"].write_text(_kv(summary))
    return paths


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--envelope-only", action="store_true", help="coarse scan recording the envelope only")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="biphoton-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="forward-simulate the Michelson scan")
    an = sub.add_parser("analyze", parents=[common], help="invert an interferogram CSV")
    an.add_argument("interferogram", type=Path)
    sub.add_parser("entropy", parents=[common], help="purity, entropy sweep and ledger")
    sub.add_parser("report", parents=[common], help="simulate + analyze + entropy with a summary")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig.from_raw({})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.envelope_only:
        overrides["michelson.envelope_only"] = "true"
    return cfg.with_overrides(**overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            paths = cmd_simulate(cfg, args.out)
        elif args.command == "analyze":
            paths = cmd_analyze(args.interferogram, cfg, args.out)
        elif args.command == "entropy":
            paths = cmd_entropy(cfg, args.out)
        else:
            paths = cmd_report(cfg, args.out)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
