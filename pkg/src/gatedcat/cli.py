"""Command-line front end composing the model into reproducible runs.

Every command resolves the configuration (defaults < file < --set
overrides), runs, writes its data files plus a manifest.json capturing the
resolved configuration, seed and library versions. Passing a manifest as
--config reruns the exact same experiment.

Exit codes: 0 ok, 2 configuration error, 3 physics precondition
(grid/truncation), 4 reconstruction did not converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io, modes
from .config import ExperimentConfig, _apply, apply_overrides, load_config_file, validate_config
from .errors import ConfigError, PhysicsError
from .herald import JitterSpec, build_heralded_state, calibrate_efficiency, jitter_sweep
from .tomography import (
    attach_bootstrap,
    bootstrap_wmin,
    covariance_pca,
    mle_reconstruct,
    project_quadratures,
    synthesize_records,
)

COMMANDS = (
    "modes", "sweep", "synthesize", "tomography",
    "reproduce-fig3c", "reproduce-fig4", "end2end",
)

OUTPUT_ROOT_ENV = "GATEDCAT_OUT_ROOT"


@dataclass
class ExperimentSpec:
    command: str
    config_path: str | None = None
    out_dir: str | None = None
    seed: int | None = None  # None: take the manifest's seed, else 0
    overrides: list[str] = field(default_factory=list)
    jobs: int = 1


def _load(spec: ExperimentSpec) -> tuple[ExperimentConfig, int]:
    """Resolve config (file or manifest) and the effective seed."""
    seed = spec.seed
    path = spec.config_path
    if path is not None and _looks_like_manifest(path):
        manifest = json.loads(Path(path).read_text())
        cfg = _config_from_manifest(manifest)
        if seed is None and "seed" in manifest:
            seed = int(manifest["seed"])
    else:
        cfg = load_config_file(path)
    apply_overrides(cfg, spec.overrides)
    validate_config(cfg)
    return cfg, 0 if seed is None else seed


def _looks_like_manifest(path: str) -> bool:
    if path.endswith(".json"):
        return True
    try:
        with open(path) as fh:
            return fh.read(1) == "{"
    except OSError:
        return False


def _config_from_manifest(manifest: dict) -> ExperimentConfig:
    if "config" not in manifest:
        raise ConfigError("manifest has no 'config' block")
    cfg = load_config_file(None)
    for section, keys in manifest["config"].items():
        for key, value in keys.items():
            if isinstance(value, list):
                raw = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                raw = "true" if value else "false"
            else:
                raw = str(value)
            _apply(cfg.values, cfg.provenance, section, key, raw, "file")
    return cfg


def _out_dir(spec: ExperimentSpec) -> Path:
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
        out = root / spec.command
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


# ---------------------------------------------------------------------------
# commands


def _cmd_modes(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    hc = cfg.herald_config()
    g = modes.filter_response(hc.filter_hwhm_mhz, hc.grid)
    r = modes.opo_correlation(hc.opo_hwhm_mhz, hc.grid)
    f = modes.wavepacket(g, r)
    kernel = modes.jitter_kernel(f, hc.build_jitter())
    pm = modes.principal_mode(kernel)
    files = []
    io.write_modes_csv(out / "modes.csv", {"g": g, "r": r, "f": f, "f1": pm.f1})
    files.append("modes.csv")
    io.write_spectrum_csv(out / "spectrum.csv", pm.spectrum)
    files.append("spectrum.csv")
    if cfg["io"]["write_kernel_csv"]:
        io.write_kernel_csv(out / "kernel.csv", hc.grid, kernel.matrix)
        files.append("kernel.csv")
    summary = {
        "fwhm_f_ns": modes.fwhm(f),
        "fwhm_f1_ns": modes.fwhm(pm.f1),
        "lambda1": pm.lambda1,
    }
    io.write_json(out / "summary.json", summary)
    files.append("summary.json")
    return files, summary, 0


def _sweep_rows(hc, widths, jobs):
    results = jitter_sweep(hc, widths, jobs=jobs)
    for w, res in zip(widths, results):
        yield w, res


def _cmd_sweep(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    hc = cfg.herald_config()
    widths = cfg["sweep"]["widths_ns"]
    rows = [
        (w, res.lambda1, res.fwhm_f1, res.w_origin, res.w_min_near_origin)
        for w, res in _sweep_rows(hc, widths, jobs)
    ]
    io.write_csv(out / "sweep.csv",
                 ["width_ns", "lambda1", "fwhm_f1_ns", "w_origin", "w_min"], rows)
    return ["sweep.csv"], {"n_widths": len(widths)}, 0


def _cmd_fig3c(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    hc = cfg.herald_config()
    widths = cfg["sweep"]["fig3c_widths_ns"]
    rows = [
        (w, res.fwhm_f1, res.lambda1)
        for w, res in _sweep_rows(hc, widths, jobs)
    ]
    io.write_csv(out / "fig3c.csv", ["jitter_ns", "fwhm_f1_ns", "lambda1"], rows)
    return ["fig3c.csv"], {"n_widths": len(widths)}, 0


def _cmd_fig4(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    hc = cfg.herald_config()
    cal = cfg["calibration"]
    files = []
    if cal["calibrate"]:
        ref_cfg = hc.with_jitter(JitterSpec(shape="rectangular", width_ns=cal["reference_width_ns"]))
        fit = calibrate_efficiency(cal["target_w_origin"], ref_cfg)
        eta = fit.eta
        io.write_json(out / "calibration.json", {
            "eta": fit.eta,
            "residual": fit.residual,
            "target_w_origin": cal["target_w_origin"],
            "reference_width_ns": cal["reference_width_ns"],
        })
        files.append("calibration.json")
        hc = dataclasses.replace(hc, efficiency_eta=eta)
    else:
        eta = hc.efficiency_eta
    widths = cfg["sweep"]["widths_ns"]
    rows = [
        (w, res.w_min_near_origin, res.w_origin, res.lambda1, eta)
        for w, res in _sweep_rows(hc, widths, jobs)
    ]
    io.write_csv(out / "fig4.csv",
                 ["width_ns", "w_min", "w_origin", "lambda1", "eta"], rows)
    files.append("fig4.csv")
    return files, {"eta": eta}, 0


def _cmd_synthesize(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    hc = cfg.herald_config()
    tomo = cfg["tomography"]
    records = synthesize_records(hc, tomo["events_per_phase"], tomo["phases_rad"], seed)
    files = []
    io.write_records_binary(out / "records.bin", records)
    files.append("records.bin")
    if cfg["io"]["write_records_csv"]:
        io.write_records_csv(out / "records.csv", records)
        files.append("records.csv")
    analytic = build_heralded_state(hc, tomo["search_radius"])
    summary = {
        "n_records": len(records),
        "lambda1_analytic": analytic.lambda1,
        "w_origin_analytic": analytic.w_origin,
    }
    io.write_json(out / "synthesis.json", summary)
    files.append("synthesis.json")
    return files, summary, 0


def _tomography_chain(cfg: ExperimentConfig, out: Path, seed: int, jobs: int, records):
    hc = cfg.herald_config()
    tomo = cfg["tomography"]
    files = []
    pm = covariance_pca(records, background_variance=hc.background_variance)
    io.write_modes_csv(out / "pca_mode.csv", {"f1_data": pm.f1})
    io.write_spectrum_csv(out / "pca_spectrum.csv", pm.spectrum)
    files += ["pca_mode.csv", "pca_spectrum.csv"]
    samples = project_quadratures(records, pm.f1)
    io.write_samples_csv(out / "quadratures.csv", samples)
    files.append("quadratures.csv")
    result = mle_reconstruct(
        samples,
        n_cut=tomo["mle_n_cut"],
        max_iter=tomo["mle_max_iter"],
        tol=tomo["mle_tol"],
        bin_min_count=tomo["bin_min_count"],
        max_bins_per_phase=tomo["max_bins_per_phase"],
        search_radius=tomo["search_radius"],
    )
    if tomo["n_resamples"] > 0:
        boot = bootstrap_wmin(
            samples, tomo["n_resamples"], seed,
            n_cut=tomo["mle_n_cut"], search_radius=tomo["search_radius"], jobs=jobs,
        )
        result = attach_bootstrap(result, boot)
    io.write_json(out / "tomography_result.json", io.tomography_result_to_json_dict(result))
    files.append("tomography_result.json")
    status = 0 if result.converged else 4
    info = {
        "no_signal": pm.no_signal,
        "lambda1_data": pm.lambda1,
        "w_min": result.w_min,
        "converged": result.converged,
    }
    return files, info, status


def _cmd_tomography(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    tomo = cfg["tomography"]
    if tomo["records_path"]:
        records = io.read_records_binary(tomo["records_path"])
    else:
        hc = cfg.herald_config()
        records = synthesize_records(hc, tomo["events_per_phase"], tomo["phases_rad"], seed)
    return _tomography_chain(cfg, out, seed, jobs, records)


def _cmd_end2end(cfg: ExperimentConfig, out: Path, seed: int, jobs: int):
    hc = cfg.herald_config()
    tomo = cfg["tomography"]
    records = synthesize_records(hc, tomo["events_per_phase"], tomo["phases_rad"], seed)
    files = []
    io.write_records_binary(out / "records.bin", records)
    files.append("records.bin")
    chain_files, info, status = _tomography_chain(cfg, out, seed, jobs, records)
    files += chain_files
    analytic = build_heralded_state(hc, tomo["search_radius"])
    summary = {
        "analytic": {
            "lambda1": analytic.lambda1,
            "w_origin": analytic.w_origin,
            "w_min": analytic.w_min_near_origin,
            "fwhm_f1_ns": analytic.fwhm_f1,
        },
        "reconstructed": info,
        "n_records": len(records),
    }
    io.write_json(out / "summary.json", summary)
    files.append("summary.json")
    return files, summary, status


_DISPATCH = {
    "modes": _cmd_modes,
    "sweep": _cmd_sweep,
    "synthesize": _cmd_synthesize,
    "tomography": _cmd_tomography,
    "reproduce-fig3c": _cmd_fig3c,
    "reproduce-fig4": _cmd_fig4,
    "end2end": _cmd_end2end,
}


def run(spec: ExperimentSpec) -> int:
    started = time.time()
    try:
        cfg, seed = _load(spec)
        out = _out_dir(spec)
        files, extra, status = _DISPATCH[spec.command](cfg, out, seed, spec.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PhysicsError as exc:
        print(f"physics precondition failed: {exc}", file=sys.stderr)
        return 3
    manifest = {
        "command": spec.command,
        "seed": seed,
        "jobs": spec.jobs,
        "config": cfg.to_plain_dict(),
        "provenance": cfg.provenance,
        "warnings": cfg.warnings,
        "outputs": sorted(files),
        "summary": extra,
        "versions": {
            "gatedcat": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": time.time() - started,
    }
    io.write_json(out / "manifest.json", manifest)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return status


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="gatedcat",
        description="Heralded cat-state generation under detector timing jitter",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="config file or a previous manifest.json")
    parser.add_argument("--out", default=None, help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<command>)")
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed (default 0, or the manifest's)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps and bootstrap")
    args = parser.parse_args(argv)
    spec = ExperimentSpec(
        command=args.command,
        config_path=args.config,
        out_dir=args.out,
        seed=args.seed,
        overrides=args.overrides,
        jobs=max(1, args.jobs),
    )
    sys.exit(run(spec))


if __name__ == "__main__":
    main()
