"""Flat key=value configuration with sections, mirroring the model fields.

An empty file is a valid configuration: every key has a default. Unknown
sections or keys are rejected by exact name so typos cannot silently fall
back to defaults. ``--set section.key=value`` overrides are applied after
the file and tracked in the per-key provenance map ("default", "file" or
"override").
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError, GridCoverageError
from .herald import HeraldConfig, JitterSpec
from .modes import TimeGrid
from .tomography import DEFAULT_PHASES


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s: str) -> list[float]:
    s = s.strip()
    if not s:
        return []
    return [float(tok) for tok in s.replace(";", ",").split(",") if tok.strip()]


_PARSERS = {
    "float": float,
    "int": int,
    "str": lambda s: s.strip(),
    "bool": _parse_bool,
    "complex": complex,
    "float_list": _parse_float_list,
}

# section -> key -> (type name, default)
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "grid": {
        "t_start_ns": ("float", -200.0),
        "dt_ns": ("float", 0.5),
        "n_samples": ("int", 801),
    },
    "record_grid": {
        "t_start_ns": ("float", -130.0),
        "dt_ns": ("float", 1.0),
        "n_samples": ("int", 201),
    },
    "herald": {
        "opo_hwhm_mhz": ("float", 58.4),
        "filter_hwhm_mhz": ("float", 8.0),
        "squeeze_param": ("float", 0.25),
        "cat_alpha": ("complex", complex(1.6)),
        "cat_psi": ("float", math.pi),
        "tap_ratio": ("float", 0.047),
        "efficiency_eta": ("float", 1.0),
        "cat_source": ("str", "alpha"),
        "n_cut": ("int", 40),
        "background_variance": ("float", 0.5),
    },
    "jitter": {
        "shape": ("str", "rectangular"),
        "width_ns": ("float", 8.3),
        "rise_ns": ("float", 3.5),
        "extinction_db": ("float", 30.0),
    },
    "tomography": {
        "phases_rad": ("float_list", list(DEFAULT_PHASES)),
        "events_per_phase": ("int", 10000),
        "mle_n_cut": ("int", 16),
        "mle_max_iter": ("int", 2000),
        "mle_tol": ("float", 1e-7),
        "bin_min_count": ("int", 20),
        "max_bins_per_phase": ("int", 150),
        "n_resamples": ("int", 100),
        "search_radius": ("float", 1.0),
        "records_path": ("str", ""),
    },
    "sweep": {
        "widths_ns": ("float_list", [8.3, 29.7, 49.5, 70.4]),
        "fig3c_widths_ns": ("float_list", [0.0, 8.3, 29.7, 49.5, 58.0, 70.4]),
    },
    "calibration": {
        "target_w_origin": ("float", -0.011),
        "reference_width_ns": ("float", 8.3),
        "calibrate": ("bool", True),
    },
    "io": {
        "write_records_csv": ("bool", False),
        "write_kernel_csv": ("bool", False),
    },
}


@dataclass
class ExperimentConfig:
    """Typed view of a fully resolved configuration."""

    values: dict[str, dict[str, object]]
    provenance: dict[str, str] = field(default_factory=dict)  # "section.key" -> origin
    warnings: list[str] = field(default_factory=list)

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    def herald_config(self) -> HeraldConfig:
        g = self.values["grid"]
        rg = self.values["record_grid"]
        h = self.values["herald"]
        j = self.values["jitter"]
        return HeraldConfig(
            opo_hwhm_mhz=h["opo_hwhm_mhz"],
            filter_hwhm_mhz=h["filter_hwhm_mhz"],
            squeeze_param=h["squeeze_param"],
            cat_alpha=h["cat_alpha"],
            cat_psi=h["cat_psi"],
            tap_ratio=h["tap_ratio"],
            efficiency_eta=h["efficiency_eta"],
            cat_source=h["cat_source"],
            n_cut=h["n_cut"],
            background_variance=h["background_variance"],
            jitter=JitterSpec(
                shape=j["shape"],
                width_ns=j["width_ns"],
                rise_ns=j["rise_ns"],
                extinction_db=j["extinction_db"],
            ),
            grid=TimeGrid(g["t_start_ns"], g["dt_ns"], g["n_samples"]),
            record_grid=TimeGrid(rg["t_start_ns"], rg["dt_ns"], rg["n_samples"]),
        )

    def to_plain_dict(self) -> dict:
        out: dict[str, dict] = {}
        for sec, keys in self.values.items():
            out[sec] = {}
            for key, val in keys.items():
                if isinstance(val, complex):
                    out[sec][key] = str(val)
                elif isinstance(val, list):
                    out[sec][key] = [float(v) for v in val]
                else:
                    out[sec][key] = val
        return out


def _defaults() -> dict[str, dict[str, object]]:
    return {sec: {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in keys.items()}
            for sec, keys in SCHEMA.items()}


def _known_keys_message(section: str) -> str:
    return f"known keys in [{section}]: {', '.join(sorted(SCHEMA[section]))}"


def load_config_file(path: str | None) -> ExperimentConfig:
    """Parse an INI-style file (or use pure defaults when path is None)."""
    values = _defaults()
    provenance = {f"{sec}.{key}": "default" for sec in SCHEMA for key in SCHEMA[sec]}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}]; known sections: {', '.join(sorted(SCHEMA))}"
                )
            for key, raw in parser.items(section):
                _apply(values, provenance, section, key, raw, "file")
        if parser.defaults():
            stray = ", ".join(parser.defaults())
            raise ConfigError(f"keys outside any section: {stray}")
    return ExperimentConfig(values, provenance)


def _apply(values, provenance, section: str, key: str, raw: str, origin: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]; known sections: {', '.join(sorted(SCHEMA))}")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]; {_known_keys_message(section)}")
    type_name, _ = SCHEMA[section][key]
    try:
        values[section][key] = _PARSERS[type_name](raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc
    provenance[f"{section}.{key}"] = origin


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply repeatable --set section.key=value pairs."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        _apply(cfg.values, cfg.provenance, section.strip(), key.strip(), raw, "override")
    return cfg


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Range checks plus truncation/coverage pre-checks; cheap, no physics runs.

    Coverage violations that would make a run fail later (jitter wider than
    the grid allows) are raised, softer findings are appended to
    ``cfg.warnings``.
    """
    herald = cfg.herald_config()  # field-level validation happens in the constructors
    g = herald.grid
    j = cfg.values["jitter"]

    gamma_f = 2 * math.pi * herald.filter_hwhm_mhz * 1e-3
    gamma_r = 2 * math.pi * herald.opo_hwhm_mhz * 1e-3
    widest = max(1 / gamma_f, 1 / gamma_r)
    if not g.covers(widest):
        raise GridCoverageError(
            f"grid span {g.span} ns is below 6x the slowest mode timescale {widest:.1f} ns"
        )
    g.index_of_zero()
    herald.record_grid.index_of_zero()

    sweep_widths = set(cfg.values["sweep"]["widths_ns"]) | set(cfg.values["sweep"]["fig3c_widths_ns"])
    if j["shape"] in ("rectangular", "trapezoidal", "gaussian"):
        sweep_widths.add(j["width_ns"])
    for w in sweep_widths:
        if w < 0:
            raise ConfigError("jitter widths must be >= 0")
        if w == 0:
            continue
        if w >= g.span or w / 2 + 6 / gamma_f > g.span / 2:
            raise GridCoverageError(
                f"gate width {w} ns does not fit the grid with the packet tail "
                f"(need half-span > {w / 2 + 6 / gamma_f:.0f} ns, have {g.span / 2:.0f} ns)"
            )

    tomo = cfg.values["tomography"]
    phases = tomo["phases_rad"]
    if len(set(phases)) < 2:
        raise ConfigError("tomography needs at least 2 distinct phases_rad")
    if not all(0 <= p < math.pi for p in phases):
        raise ConfigError("phases_rad must lie in [0, pi)")
    for key in ("events_per_phase", "mle_n_cut", "mle_max_iter", "bin_min_count",
                "max_bins_per_phase"):
        if tomo[key] < 1:
            raise ConfigError(f"[tomography] {key} must be >= 1")
    if tomo["n_resamples"] != 0 and tomo["n_resamples"] < 50:
        raise ConfigError("[tomography] n_resamples must be 0 (skip bootstrap) or >= 50")
    if not (tomo["search_radius"] > 0):
        raise ConfigError("[tomography] search_radius must be positive")

    # truncation adequacy, closed form (no state construction)
    alpha = abs(herald.cat_alpha)
    n_cut = herald.n_cut
    if alpha > 0:
        from scipy.stats import poisson

        tail = float(poisson.sf(n_cut - 1, alpha**2))
        if tail > 1e-8:
            cfg.warnings.append(
                f"coherent tail beyond n_cut={n_cut} is {tail:.1e} (> 1e-8) for |alpha|={alpha}"
            )
    r = herald.squeeze_param
    if r > 0 and math.tanh(r) ** n_cut > 1e-6:
        cfg.warnings.append(
            f"squeezed tail estimate tanh(r)^n_cut = {math.tanh(r) ** n_cut:.1e} exceeds 1e-6"
        )
    return cfg
