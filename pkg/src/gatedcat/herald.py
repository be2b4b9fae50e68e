"""Assemble the heralded single-mode state and run jitter sweeps.

The state in the principal temporal mode is the two-component mixture

    rho = lambda1 |cat><cat| + (1 - lambda1) |sqz><sqz|

followed by a beamsplitter loss channel with transmittance eta. lambda1
and f1 come from the jitter kernel of the herald wave packet; everything
else is configuration.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import fock, modes
from .errors import CalibrationRangeError, ConfigError
from .fock import FockDensity, FockState
from .modes import JitterDistribution, ModeFunction, TimeGrid
from .tomography import wigner_min_near_origin

JITTER_SHAPES = ("delta", "rectangular", "trapezoidal", "gaussian")
CAT_SOURCES = ("alpha", "subtracted")


@dataclass(frozen=True)
class JitterSpec:
    """Declarative jitter choice, realized on a grid via ``build``."""

    shape: str = "rectangular"
    width_ns: float = 8.3
    rise_ns: float = 3.5
    extinction_db: float = 30.0

    def __post_init__(self):
        if self.shape not in JITTER_SHAPES:
            raise ConfigError(f"unknown jitter shape {self.shape!r}; expected one of {JITTER_SHAPES}")

    def build(self, grid: TimeGrid) -> JitterDistribution:
        if self.shape == "delta":
            return modes.jitter_delta(grid)
        if self.shape == "rectangular":
            return modes.jitter_rectangular(self.width_ns, grid)
        if self.shape == "trapezoidal":
            return modes.jitter_gate_profile(self.width_ns, self.rise_ns, self.extinction_db, grid)
        return modes.jitter_gaussian(self.width_ns, grid)


def default_record_grid() -> TimeGrid:
    """201 samples at 1 ns, asymmetric around the packet peak: [-130, 70] ns."""
    return TimeGrid(-130.0, 1.0, 201)


@dataclass(frozen=True)
class HeraldConfig:
    """All knobs of the heralded-state model.

    ``cat_source`` selects how the non-Gaussian component is built:
    "alpha" uses the (cat_alpha, cat_psi) superposition directly,
    "subtracted" applies photon subtraction to the squeezed vacuum.
    ``tap_ratio`` is bookkeeping for the heralding tap and enters no
    computation here.
    """

    opo_hwhm_mhz: float = 58.4
    filter_hwhm_mhz: float = 8.0
    squeeze_param: float = 0.25
    cat_alpha: complex = 1.6
    cat_psi: float = math.pi
    tap_ratio: float = 0.047
    efficiency_eta: float = 1.0
    cat_source: str = "alpha"
    n_cut: int = 40
    background_variance: float = 0.5
    jitter: JitterSpec = field(default_factory=JitterSpec)
    grid: TimeGrid = field(default_factory=modes.default_grid)
    record_grid: TimeGrid = field(default_factory=default_record_grid)

    def __post_init__(self):
        if not (self.opo_hwhm_mhz > 0 and self.filter_hwhm_mhz > 0):
            raise ConfigError("cavity HWHMs must be positive")
        if self.squeeze_param < 0:
            raise ConfigError("squeeze_param must be >= 0")
        if not 0.0 < self.tap_ratio < 1.0:
            raise ConfigError("tap_ratio must be in (0, 1)")
        if not 0.0 <= self.efficiency_eta <= 1.0:
            raise ConfigError("efficiency_eta must be in [0, 1]")
        if self.cat_source not in CAT_SOURCES:
            raise ConfigError(f"cat_source must be one of {CAT_SOURCES}")
        if self.n_cut < 2:
            raise ConfigError("n_cut must be >= 2")
        if not (self.background_variance > 0):
            raise ConfigError("background_variance must be positive")
        if not self.grid.contains_subgrid(self.record_grid):
            raise ConfigError(
                "record grid must be a commensurate subgrid of the mode grid "
                "(dt an integer multiple, samples coinciding, window inside)"
            )

    # -- building blocks -----------------------------------------------------

    def with_jitter(self, spec: JitterSpec) -> "HeraldConfig":
        return dataclasses.replace(self, jitter=spec)

    def build_wavepacket(self, grid: TimeGrid | None = None) -> ModeFunction:
        grid = grid or self.grid
        g = modes.filter_response(self.filter_hwhm_mhz, grid)
        r = modes.opo_correlation(self.opo_hwhm_mhz, grid)
        return modes.wavepacket(g, r)

    def build_jitter(self, grid: TimeGrid | None = None) -> JitterDistribution:
        return self.jitter.build(grid or self.grid)

    def cat_component(self) -> FockState:
        if self.cat_source == "subtracted":
            return fock.photon_subtract(fock.squeezed_vacuum(self.squeeze_param, self.n_cut))
        return fock.cat_state(self.cat_alpha, self.cat_psi, self.n_cut)

    def squeezed_component(self) -> FockState:
        return fock.squeezed_vacuum(self.squeeze_param, self.n_cut)

    def event_density(self) -> FockDensity:
        """Single heralding event: the lossy non-Gaussian component."""
        return fock.loss_channel(self.cat_component().to_density(), self.efficiency_eta)

    def mixture_density(self, lambda1: float, eta: float | None = None) -> FockDensity:
        """Two-component mixture with one loss channel applied after mixing."""
        if not 0.0 <= lambda1 <= 1.0:
            raise ValueError("lambda1 must be in [0, 1]")
        cat = self.cat_component().to_density().matrix
        sqz = self.squeezed_component().to_density().matrix
        rho = FockDensity(lambda1 * cat + (1.0 - lambda1) * sqz)
        return fock.loss_channel(rho, self.efficiency_eta if eta is None else eta)


@dataclass(frozen=True)
class HeraldResult:
    """Everything the sweeps report for one jitter setting."""

    rho_f1: FockDensity
    f1: ModeFunction
    lambda1: float
    w_origin: float
    w_min_near_origin: float
    pn_dist: np.ndarray
    fwhm_f1: float


def build_heralded_state(cfg: HeraldConfig, search_radius: float = 1.0) -> HeraldResult:
    """Full analytic pipeline: wave packet -> kernel -> (f1, lambda1) -> mixture."""
    f = cfg.build_wavepacket()
    j = cfg.build_jitter()
    pm = modes.principal_mode(modes.jitter_kernel(f, j))
    rho = cfg.mixture_density(pm.lambda1)
    w0 = fock.wigner_origin_parity(rho)
    wmin, _loc = wigner_min_near_origin(rho, search_radius)
    return HeraldResult(
        rho_f1=rho,
        f1=pm.f1,
        lambda1=pm.lambda1,
        w_origin=w0,
        w_min_near_origin=wmin,
        pn_dist=fock.photon_number_distribution(rho),
        fwhm_f1=modes.fwhm(pm.f1),
    )


def jitter_sweep(cfg: HeraldConfig, widths_ns, jobs: int = 1) -> list[HeraldResult]:
    """One rectangular-jitter result per width, in input order.

    A width of exactly 0 means no jitter (delta distribution).
    """
    specs = []
    for w in widths_ns:
        if w < 0:
            raise ValueError("widths must be >= 0")
        if w == 0:
            specs.append(JitterSpec(shape="delta"))
        else:
            specs.append(JitterSpec(shape="rectangular", width_ns=float(w)))
    configs = [cfg.with_jitter(s) for s in specs]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(build_heralded_state, configs))
    return [build_heralded_state(c) for c in configs]


class CalibrationResult(tuple):
    """(eta, residual) with named access."""

    __slots__ = ()

    def __new__(cls, eta: float, residual: float, w_origin: float):
        return tuple.__new__(cls, (eta, residual, w_origin))

    @property
    def eta(self) -> float:
        return self[0]

    @property
    def residual(self) -> float:
        return self[1]

    @property
    def w_origin(self) -> float:
        return self[2]


def calibrate_efficiency(
    target_w_origin: float, cfg: HeraldConfig, tol: float = 1e-4, max_iter: int = 200
) -> CalibrationResult:
    """Find eta so the origin Wigner value of the built state hits the target.

    The lossless mixture is built once; bisection then only re-applies the
    loss channel, which reproduces build_heralded_state exactly because the
    temporal-mode part does not depend on eta.
    """
    limit = 1.0 / np.pi
    if not -limit < target_w_origin < limit:
        raise CalibrationRangeError(f"target must lie strictly inside (-1/pi, 1/pi), got {target_w_origin}")
    f = cfg.build_wavepacket()
    j = cfg.build_jitter()
    pm = modes.principal_mode(modes.jitter_kernel(f, j))

    def w_at(eta: float) -> float:
        return fock.wigner_origin_parity(cfg.mixture_density(pm.lambda1, eta=eta))

    lo, hi = 0.0, 1.0
    w_lo, w_hi = w_at(lo), w_at(hi)
    if (w_lo - target_w_origin) * (w_hi - target_w_origin) > 0:
        raise CalibrationRangeError(
            f"target {target_w_origin} not bracketed: w(eta=0)={w_lo:.4f}, w(eta=1)={w_hi:.4f}"
        )
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        w_mid = w_at(mid)
        if abs(w_mid - target_w_origin) <= tol and (hi - lo) < 1e-6:
            return CalibrationResult(mid, w_mid - target_w_origin, w_mid)
        if (w_lo - target_w_origin) * (w_mid - target_w_origin) <= 0:
            hi, w_hi = mid, w_mid
        else:
            lo, w_lo = mid, w_mid
    mid = (lo + hi) / 2
    w_mid = w_at(mid)
    return CalibrationResult(mid, w_mid - target_w_origin, w_mid)
