"""Temporal modes: herald wave packet, jitter distributions, principal mode.

The wave packet of the heralded state is the convolution f = g * r of the
(time-reversed) filter-cavity impulse response g with the two-sided
correlation function r of the source cavity, both Lorentzian in frequency
and therefore exponential in time. Detector timing uncertainty j(t) smears
the packet location; the jitter-averaged mode autocorrelation

    K(t1, t2) = integral dt' j(t') f(t1 - t') conj(f(t2 - t'))

is Hermitian PSD, and its leading eigenpair (f1, lambda1) gives the best
single temporal mode and the weight of the heralded state in it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import GridCoverageError, ModeWidthWarning, PhysicsError

_UNIT_TOL = 1e-10
_BOUNDARY_RATIO = 1e-4  # max allowed |mode| at the grid edge relative to peak


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time lattice: t_k = t0 + k dt for k = 0..n_samples-1 (ns)."""

    t0: float
    dt: float
    n_samples: int

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.n_samples < 16:
            raise ValueError("need at least 16 samples")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def span(self) -> float:
        return self.dt * (self.n_samples - 1)

    def covers(self, timescale_ns: float, factor: float = 6.0) -> bool:
        """Whether the grid spans at least ``factor`` times the given scale."""
        return self.span >= factor * timescale_ns

    def index_of_zero(self) -> int:
        k = -self.t0 / self.dt
        ki = int(round(k))
        if abs(k - ki) > 1e-9 or not 0 <= ki < self.n_samples:
            raise GridCoverageError("grid must contain t = 0 as a sample")
        return ki

    def aligned_with(self, other: "TimeGrid") -> bool:
        """Same step and commensurate offsets (sample times coincide)."""
        if abs(self.dt - other.dt) > 1e-12:
            return False
        k = (self.t0 - other.t0) / self.dt
        return abs(k - round(k)) < 1e-9

    def contains_subgrid(self, sub: "TimeGrid") -> bool:
        """Whether every sample of ``sub`` is a sample of this grid."""
        stride = sub.dt / self.dt
        if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
            return False
        offset = (sub.t0 - self.t0) / self.dt
        if abs(offset - round(offset)) > 1e-9:
            return False
        k0 = int(round(offset))
        last = k0 + int(round(stride)) * (sub.n_samples - 1)
        return 0 <= k0 and last < self.n_samples


def default_grid() -> TimeGrid:
    """801 samples at 0.5 ns covering [-200, 200] ns."""
    return TimeGrid(-200.0, 0.5, 801)


@dataclass(frozen=True)
class ModeFunction:
    """Complex temporal mode on a TimeGrid, units ns^(-1/2) when normalized."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_samples,):
            raise ValueError("values length must match the grid")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        """sqrt(sum |f|^2 dt)."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dt))

    def normalize(self) -> "ModeFunction":
        n = self.norm
        if n < 1e-150:
            raise PhysicsError("cannot normalize an all-zero mode")
        return ModeFunction(self.grid, self.values / n)

    def overlap(self, other: "ModeFunction") -> complex:
        if self.grid != other.grid:
            raise ValueError("modes live on different grids")
        return complex(np.vdot(self.values, other.values) * self.grid.dt)

    def shifted(self, delta_ns: float) -> "ModeFunction":
        """Translate by an integer number of grid steps, zero padding."""
        s = delta_ns / self.grid.dt
        si = int(round(s))
        if abs(s - si) > 1e-9:
            raise ValueError("shift must be an integer multiple of dt")
        out = np.zeros_like(self.values)
        if si >= 0:
            out[si:] = self.values[: self.values.size - si]
        elif -si < self.values.size:
            out[:si] = self.values[-si:]
        return ModeFunction(self.grid, out)

    def restricted(self, sub: TimeGrid, renormalize: bool = True) -> "ModeFunction":
        """Values on a commensurate (possibly coarser) sub-grid."""
        if not self.grid.contains_subgrid(sub):
            raise GridCoverageError("target grid is not a subgrid of the source grid")
        stride = int(round(sub.dt / self.grid.dt))
        k0 = int(round((sub.t0 - self.grid.t0) / self.grid.dt))
        out = ModeFunction(sub, self.values[k0 : k0 + stride * sub.n_samples : stride])
        return out.normalize() if renormalize else out


@dataclass(frozen=True)
class JitterDistribution:
    """Probability density of the herald-timing error on a TimeGrid.

    ``density[k]`` is the average density over cell k (units 1/ns); cells are
    treated as uniform slabs of width dt, so sum(density) * dt == 1 and the
    moments below include the within-cell contribution.
    """

    grid: TimeGrid
    density: np.ndarray
    shape: str = "custom"

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.shape != (self.grid.n_samples,):
            raise ValueError("density length must match the grid")
        if d.min() < 0:
            raise ValueError("density must be non-negative")
        total = d.sum() * self.grid.dt
        if abs(total - 1.0) > _UNIT_TOL:
            raise ValueError(f"density must integrate to 1, got {total!r}")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "density", d)

    def mean(self) -> float:
        return float(np.sum(self.density * self.grid.times) * self.grid.dt)

    def variance(self) -> float:
        # slab quadrature: each cell adds dt^2/12 about its own center
        t = self.grid.times
        dt = self.grid.dt
        m2 = float(np.sum(self.density * t * t) * dt) + dt * dt / 12.0
        return m2 - self.mean() ** 2

    def translate(self, delta_ns: float) -> "JitterDistribution":
        """Shift the density by an integer number of grid steps."""
        s = delta_ns / self.grid.dt
        si = int(round(s))
        if abs(s - si) > 1e-9:
            raise ValueError("shift must be an integer multiple of dt")
        d = np.zeros_like(self.density)
        if si >= 0:
            d[si:] = self.density[: d.size - si]
        elif -si < d.size:
            d[:si] = self.density[-si:]
        lost = 1.0 - d.sum() * self.grid.dt
        if lost > 1e-9:
            raise GridCoverageError("translation pushes probability off the grid")
        return JitterDistribution(self.grid, d / (d.sum() * self.grid.dt), self.shape)


@dataclass(frozen=True)
class JitterKernel:
    """Jitter-averaged mode autocorrelation matrix on a TimeGrid."""

    grid: TimeGrid
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.grid.n_samples,) * 2:
            raise ValueError("kernel shape must match the grid")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class PrincipalModeResult:
    """Leading eigenpair of a mode kernel (or excess covariance).

    lambda1 = spectrum[0] / sum(spectrum) with the spectrum sorted
    descending and clipped at zero. ``no_signal`` is set by the data-driven
    path when the leading eigenvalue does not clear the sampling-noise floor.
    """

    f1: ModeFunction
    lambda1: float
    spectrum: np.ndarray
    no_signal: bool = False
    noise_level: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.spectrum, float).copy()
        s.setflags(write=False)
        object.__setattr__(self, "spectrum", s)


# ---------------------------------------------------------------------------
# mode constructors


def _boundary_check(values: np.ndarray, what: str) -> None:
    peak = np.abs(values).max()
    edge = max(abs(values[0]), abs(values[-1]))
    if edge > _BOUNDARY_RATIO * peak:
        raise GridCoverageError(
            f"grid too narrow for {what}: boundary/peak ratio "
            f"{edge / peak:.2e} exceeds {_BOUNDARY_RATIO:.0e}"
        )


def _gamma_per_ns(hwhm_mhz: float) -> float:
    if not (hwhm_mhz > 0) or not np.isfinite(hwhm_mhz):
        raise ValueError("HWHM must be a positive finite frequency in MHz")
    return 2.0 * np.pi * hwhm_mhz * 1e-3


def opo_correlation(hwhm_mhz: float, grid: TimeGrid) -> ModeFunction:
    """Two-sided exponential source correlation, decay rate 2*pi*HWHM."""
    gamma = _gamma_per_ns(hwhm_mhz)
    vals = np.exp(-gamma * np.abs(grid.times))
    _boundary_check(vals, f"source correlation (1/gamma = {1 / gamma:.2f} ns)")
    return ModeFunction(grid, vals).normalize()


def filter_response(hwhm_mhz: float, grid: TimeGrid) -> ModeFunction:
    """Time-reversed filter impulse response: exp(+gamma t) for t <= 0."""
    gamma = _gamma_per_ns(hwhm_mhz)
    t = grid.times
    vals = np.where(t <= 0, np.exp(gamma * t), 0.0)
    _boundary_check(vals, f"filter response (1/gamma = {1 / gamma:.2f} ns)")
    return ModeFunction(grid, vals).normalize()


def wavepacket(g: ModeFunction, r: ModeFunction) -> ModeFunction:
    """Unit-normalized convolution g * r on the common grid."""
    if g.grid != r.grid:
        raise ValueError("modes live on different grids")
    grid = g.grid
    z = grid.index_of_zero()
    full = np.convolve(g.values, r.values) * grid.dt
    vals = full[z : z + grid.n_samples]
    return ModeFunction(grid, vals).normalize()


# ---------------------------------------------------------------------------
# jitter distributions


def _cell_edges(grid: TimeGrid):
    t = grid.times
    return t - grid.dt / 2, t + grid.dt / 2


def jitter_delta(grid: TimeGrid) -> JitterDistribution:
    """All probability in the cell containing t = 0."""
    d = np.zeros(grid.n_samples)
    d[grid.index_of_zero()] = 1.0 / grid.dt
    return JitterDistribution(grid, d, "delta")


def jitter_rectangular(width_ns: float, grid: TimeGrid) -> JitterDistribution:
    """Uniform density 1/width on [-width/2, width/2].

    Edge cells get the fractional overlap of the support with the cell, so
    the unit integral is exact for any width/grid combination.
    """
    w = float(width_ns)
    if not (w > 0):
        raise ValueError("width must be positive")
    if w >= grid.span:
        raise GridCoverageError(f"width {w} ns does not fit in the {grid.span} ns grid")
    lo, hi = _cell_edges(grid)
    overlap = np.clip(np.minimum(hi, w / 2) - np.maximum(lo, -w / 2), 0.0, None)
    d = overlap / (w * grid.dt)
    d /= d.sum() * grid.dt
    return JitterDistribution(grid, d, "rectangular")


def _trapezoid_cdf(t: np.ndarray, width: float, rise: float) -> np.ndarray:
    """Integral of the unit-height trapezoid with FWHM ``width`` and linear
    edges of duration ``rise`` (support width + rise)."""
    a = (width + rise) / 2  # outer edge
    b = (width - rise) / 2  # plateau edge
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    if rise > 0:
        # rising edge: height (t + a)/rise on [-a, -b]
        u = np.clip(t, -a, -b) + a
        out += u * u / (2 * rise)
        # falling edge, by symmetry
        v = a - np.clip(t, b, a)
        out += rise / 2 - v * v / (2 * rise)
    out += np.clip(t, -b, b) + b
    return out


def jitter_gate_profile(
    width_ns: float, rise_ns: float, extinction_db: float, grid: TimeGrid
) -> JitterDistribution:
    """Switch-window profile: trapezoid with finite rise atop a leakage floor.

    The floor sits at 10^(-extinction_db/10) of the plateau density and
    extends over the whole grid; rise -> 0 with a large extinction recovers
    the rectangular profile.
    """
    w, rise, ext = float(width_ns), float(rise_ns), float(extinction_db)
    if not (w > 0):
        raise ValueError("width must be positive")
    if rise < 0 or rise >= w:
        raise ValueError("need 0 <= rise < width")
    if not (ext > 0):
        raise ValueError("extinction must be positive (dB)")
    if w + rise >= grid.span:
        raise GridCoverageError(f"window {w}+{rise} ns does not fit in the grid")
    lo, hi = _cell_edges(grid)
    cell_integral = _trapezoid_cdf(hi, w, rise) - _trapezoid_cdf(lo, w, rise)
    floor = 10.0 ** (-ext / 10.0)
    d = floor + (1.0 - floor) * cell_integral / grid.dt
    d /= d.sum() * grid.dt
    return JitterDistribution(grid, d, "trapezoidal")


def jitter_gaussian(fwhm_ns: float, grid: TimeGrid) -> JitterDistribution:
    """Gaussian timing error with the given FWHM, cell-averaged."""
    fwhm = float(fwhm_ns)
    if not (fwhm > 0):
        raise ValueError("FWHM must be positive")
    sigma = fwhm / np.sqrt(8.0 * np.log(2.0))
    if grid.span < 8 * sigma:
        raise GridCoverageError("grid too narrow for the Gaussian jitter")
    lo, hi = _cell_edges(grid)
    from scipy.special import ndtr

    mass = ndtr(hi / sigma) - ndtr(lo / sigma)
    d = mass / grid.dt
    d /= d.sum() * grid.dt
    return JitterDistribution(grid, d, "gaussian")


# ---------------------------------------------------------------------------
# kernel and principal mode


def jitter_kernel(f: ModeFunction, j: JitterDistribution) -> JitterKernel:
    """K(t1,t2) = sum_k j_k dt f(t1 - t_k) conj(f(t2 - t_k)), unit trace*dt.

    Shifts are realized as zero-padded index shifts; if more than 1e-6 of
    the shifted-mode weight falls off the grid the coverage is inadequate.
    """
    if f.grid != j.grid:
        raise ValueError("mode and jitter live on different grids")
    grid = f.grid
    z = grid.index_of_zero()
    fv = f.normalize().values
    real_input = np.abs(fv.imag).max() == 0.0
    if real_input:
        fv = fv.real
    weights = j.density * grid.dt
    support = np.nonzero(weights > weights.max() * 1e-15)[0]
    shifted = np.zeros((support.size, grid.n_samples), dtype=fv.dtype)
    n = grid.n_samples
    for row, k in enumerate(support):
        s = k - z
        if s >= 0:
            shifted[row, s:] = fv[: n - s]
        else:
            shifted[row, : n + s] = fv[-s:]
    w = weights[support]
    if shifted.dtype == complex:
        K = (shifted * w[:, None]).T @ shifted.conj()
    else:
        K = (shifted * w[:, None]).T @ shifted
    trace = float(np.trace(K).real) * grid.dt
    if abs(trace - 1.0) > 1e-6:
        raise GridCoverageError(
            f"shifted modes lose {abs(trace - 1.0):.2e} of their weight; "
            "grid does not cover the mode plus jitter support"
        )
    K = K / trace
    return JitterKernel(grid, K)


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Make the peak-magnitude sample real positive."""
    k = int(np.argmax(np.abs(vec)))
    ph = vec[k] / abs(vec[k])
    return vec * np.conj(ph) if np.iscomplexobj(vec) else vec * np.sign(vec[k])


def _leading_mode(matrix: np.ndarray, grid: TimeGrid, clip_negative: bool):
    vals, vecs = scipy.linalg.eigh(matrix)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    if clip_negative:
        vals = np.clip(vals, 0.0, None)
    v1 = _fix_phase(vecs[:, 0]) / np.sqrt(grid.dt)
    total = vals.sum()
    lam1 = float(vals[0] / total) if total > 0 else 0.0
    return ModeFunction(grid, v1), lam1, vals


def principal_mode(kernel: JitterKernel) -> PrincipalModeResult:
    """Leading unit-norm eigenvector and eigenvalue weight of the kernel."""
    K = kernel.matrix
    scale = max(1.0, float(np.abs(K).max()))
    if np.abs(K - K.conj().T).max() > 1e-8 * scale:
        raise ValueError("kernel is not Hermitian within 1e-8")
    f1, lam1, spectrum = _leading_mode((K + K.conj().T) / 2, kernel.grid, False)
    if spectrum.min() < -1e-10 * max(1.0, spectrum.max()):
        raise PhysicsError("kernel is not positive semidefinite")
    return PrincipalModeResult(f1, lam1, spectrum)


def fwhm(m: ModeFunction) -> float:
    """Full width at half maximum of |m(t)|, linearly interpolated (ns).

    Multi-peaked profiles return the width of the highest peak and emit a
    ModeWidthWarning.
    """
    a = np.abs(m.values)
    peak = a.max()
    if peak == 0:
        raise PhysicsError("cannot measure the width of an all-zero mode")
    t = m.grid.times
    half = peak / 2
    above = a > half
    runs = int(np.sum(np.diff(above.astype(int)) == 1)) + int(above[0])
    if runs > 1:
        warnings.warn("profile crosses half maximum more than twice", ModeWidthWarning)
    im = int(np.argmax(a))
    i = im
    while i > 0 and a[i - 1] > half:
        i -= 1
    if i == 0:
        left = t[0]
    else:
        left = t[i - 1] + (half - a[i - 1]) / (a[i] - a[i - 1]) * m.grid.dt
    i = im
    while i < a.size - 1 and a[i + 1] > half:
        i += 1
    if i == a.size - 1:
        right = t[-1]
    else:
        right = t[i] + (a[i] - half) / (a[i] - a[i + 1]) * m.grid.dt
    return float(right - left)
