"""Monte-Carlo homodyne records, covariance PCA, projection, MLE tomography.

This is the verification chain run on synthetic data: time-resolved
quadrature records are drawn event by event (one timing error per event),
the principal temporal mode is recovered from the record covariance, the
records are projected onto it, and the single-mode density matrix is
reconstructed with the iterative R rho R maximum-likelihood update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from . import fock
from .errors import InsufficientDataError, PhysicsError
from .fock import FockDensity
from .modes import ModeFunction, PrincipalModeResult, TimeGrid, _fix_phase

if TYPE_CHECKING:  # pragma: no cover
    from .herald import HeraldConfig

#: LO phases used by default for tomography: k*pi/6 for k = 0..5.
DEFAULT_PHASES = tuple(k * math.pi / 6 for k in range(6))


@dataclass(frozen=True)
class HomodyneRecord:
    """One heralding event: a quadrature trace at a single LO phase.

    ``shift_truth`` is the timing error used in synthesis, retained only so
    oracle tests can check estimators against the ground truth.
    """

    event_id: int
    theta: float
    grid: TimeGrid
    samples: np.ndarray
    shift_truth: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, float)
        if s.shape != (self.grid.n_samples,):
            raise ValueError("samples length must match the grid")
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite sample")
        if not 0.0 <= self.theta < math.pi:
            raise ValueError("theta must lie in [0, pi)")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True)
class QuadratureSampleSet:
    """Projected quadrature samples (theta, x) with event bookkeeping."""

    thetas: np.ndarray
    values: np.ndarray
    event_ids: np.ndarray
    source_mode: str = ""

    def __post_init__(self):
        th = np.asarray(self.thetas, float)
        xs = np.asarray(self.values, float)
        ids = np.asarray(self.event_ids, np.int64)
        if not (th.shape == xs.shape == ids.shape) or th.ndim != 1:
            raise ValueError("thetas, values and event_ids must be 1-d and equal length")
        for a in (th, xs, ids):
            a.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "values", xs)
        object.__setattr__(self, "event_ids", ids)

    def __len__(self) -> int:
        return self.values.size

    def phases(self) -> np.ndarray:
        return np.unique(self.thetas)

    def counts_by_phase(self) -> dict[float, int]:
        ph, cnt = np.unique(self.thetas, return_counts=True)
        return {float(p): int(c) for p, c in zip(ph, cnt)}


@dataclass(frozen=True)
class TomographyResult:
    """MLE output plus the Wigner-minimum summary and diagnostics."""

    rho_hat: FockDensity
    log_likelihood: np.ndarray
    converged: bool
    n_iter: int
    w_min: float
    w_min_location: tuple[float, float]
    pn_dist: np.ndarray
    bootstrap_mean: float | None = None
    bootstrap_std: float | None = None


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    values: np.ndarray
    n_nonconverged: int


# ---------------------------------------------------------------------------
# sampling helpers


def sample_quadratures(
    rho: FockDensity,
    phases: Sequence[float],
    n_per_phase: int,
    rng: np.random.Generator,
    x_max: float = 12.0,
    n_grid: int = 9601,
    source_mode: str = "direct",
) -> QuadratureSampleSet:
    """Draw homodyne samples of a single-mode state by inverse-CDF lookup."""
    xg = np.linspace(-x_max, x_max, n_grid)
    thetas, values, ids = [], [], []
    next_id = 0
    for theta in phases:
        pdf = fock.quadrature_pdf(rho, float(theta), xg)
        cdf = np.cumsum(np.clip(pdf, 0.0, None))
        cdf /= cdf[-1]
        cdf += np.linspace(0.0, 1e-12, n_grid)  # make interp table strictly increasing
        cdf /= cdf[-1]
        u = rng.random(n_per_phase)
        values.append(np.interp(u, cdf, xg))
        thetas.append(np.full(n_per_phase, float(theta)))
        ids.append(np.arange(next_id, next_id + n_per_phase, dtype=np.int64))
        next_id += n_per_phase
    if not thetas:
        return QuadratureSampleSet(np.empty(0), np.empty(0), np.empty(0, np.int64), source_mode)
    return QuadratureSampleSet(
        np.concatenate(thetas), np.concatenate(values), np.concatenate(ids), source_mode
    )


def synthesize_records(
    cfg: "HeraldConfig",
    n_events: int,
    phases: Sequence[float] = DEFAULT_PHASES,
    rng_seed: int = 0,
) -> list[HomodyneRecord]:
    """Simulate ``n_events`` heralding events per LO phase.

    Each event draws a timing error t' from the configured jitter, puts one
    lossy non-Gaussian state on the wave packet shifted by t', and fills the
    rest of the trace with background noise confined to the orthogonal
    complement of that packet:

        x(t_k) = f(t_k - t') x_f + b(t_k),   <f, b> = 0.

    Identical seeds reproduce the records bit for bit.
    """
    if n_events < 0:
        raise ValueError("n_events must be >= 0")
    grid = cfg.record_grid
    if n_events == 0:
        return []
    rng = np.random.default_rng(rng_seed)
    f_rec = cfg.build_wavepacket().restricted(grid)
    fv = np.real(f_rec.values)
    j = cfg.build_jitter(grid)
    weights = j.density * grid.dt
    weights = weights / weights.sum()
    support = np.nonzero(weights > 0)[0]
    z = grid.index_of_zero()
    rho_event = cfg.event_density()
    sigma_bg = math.sqrt(cfg.background_variance / grid.dt)
    n_t = grid.n_samples

    # shifted, renormalized packet per jitter cell, built on demand
    shift_cache: dict[int, np.ndarray] = {}

    def shifted_mode(cell: int) -> np.ndarray:
        s = cell - z
        if s not in shift_cache:
            out = np.zeros(n_t)
            if s >= 0:
                out[s:] = fv[: n_t - s]
            else:
                out[: n_t + s] = fv[-s:]
            nrm = math.sqrt(np.sum(out * out) * grid.dt)
            if nrm < 1e-12:
                raise PhysicsError("jitter shift pushes the packet off the record grid")
            shift_cache[s] = out / nrm
        return shift_cache[s]

    records: list[HomodyneRecord] = []
    event_id = 0
    for theta in phases:
        theta = float(theta)
        cells = support[rng.choice(support.size, size=n_events, p=weights[support])]
        xs = sample_quadratures(rho_event, [theta], n_events, rng).values
        noise = rng.normal(0.0, sigma_bg, size=(n_events, n_t))
        for cell_value in np.unique(cells):
            rows = np.nonzero(cells == cell_value)[0]
            mode = shifted_mode(int(cell_value))
            block = noise[rows]
            block = block - np.outer(block @ mode * grid.dt, mode)
            block += np.outer(xs[rows], mode)
            noise[rows] = block
        t_shift = grid.times[cells]
        for i in range(n_events):
            records.append(
                HomodyneRecord(event_id, theta, grid, noise[i], float(t_shift[i]))
            )
            event_id += 1
    return records


# ---------------------------------------------------------------------------
# temporal-mode recovery from data


def _record_matrix_stats(records: Sequence[HomodyneRecord], chunk: int = 2048):
    """Pooled mean and covariance of the record traces, chunked."""
    n_t = records[0].grid.n_samples
    mean = np.zeros(n_t)
    for start in range(0, len(records), chunk):
        block = np.stack([r.samples for r in records[start : start + chunk]])
        mean += block.sum(axis=0)
    mean /= len(records)
    cov = np.zeros((n_t, n_t))
    for start in range(0, len(records), chunk):
        block = np.stack([r.samples for r in records[start : start + chunk]]) - mean
        cov += block.T @ block
    cov /= len(records)
    return mean, cov


def covariance_pca(
    records: Sequence[HomodyneRecord],
    background_variance: float = 0.5,
    estimate_background: bool = False,
) -> PrincipalModeResult:
    """Recover the principal temporal mode from pooled record covariance.

    The signal mode carries more quadrature variance than the background,
    so after subtracting the background level from the diagonal the leading
    eigenvector of the excess covariance is the mode estimate. Negative
    sampling-noise eigenvalues are clipped to zero in the reported
    spectrum. ``no_signal`` is set when the leading eigenvalue does not
    clear the finite-sample noise edge.
    """
    if len(records) < 100:
        raise InsufficientDataError(f"need at least 100 records, got {len(records)}")
    grid = records[0].grid
    if any(r.grid != grid for r in records):
        raise ValueError("records live on different grids")
    _, cov = _record_matrix_stats(records)
    n_t = grid.n_samples
    if estimate_background:
        k = max(1, n_t // 10)
        edge = np.r_[np.diag(cov)[:k], np.diag(cov)[-k:]]
        bg_level = float(edge.mean())
    else:
        bg_level = background_variance / grid.dt
    excess = cov - bg_level * np.eye(n_t)
    excess = (excess + excess.T) / 2
    f1, lam1, spectrum = _leading_clipped(excess, grid)
    ratio = n_t / len(records)
    noise_level = bg_level * ((1.0 + math.sqrt(ratio)) ** 2 - 1.0)
    no_signal = bool(spectrum[0] <= 1.25 * noise_level)
    return PrincipalModeResult(f1, lam1, spectrum, no_signal, noise_level)


def _leading_clipped(matrix: np.ndarray, grid: TimeGrid):
    vals, vecs = scipy.linalg.eigh(matrix)
    vals = np.clip(vals[::-1], 0.0, None)
    v1 = _fix_phase(vecs[:, -1]) / math.sqrt(grid.dt)
    total = vals.sum()
    lam1 = float(vals[0] / total) if total > 0 else 0.0
    return ModeFunction(grid, v1), lam1, vals


def project_quadratures(
    records: Sequence[HomodyneRecord], f1: ModeFunction
) -> QuadratureSampleSet:
    """x = sum_k f1(t_k) x(t_k) dt for every record, grouped by phase."""
    if not records:
        return QuadratureSampleSet(np.empty(0), np.empty(0), np.empty(0, np.int64), "projected")
    grid = records[0].grid
    if f1.grid != grid or any(r.grid != grid for r in records):
        raise ValueError("mode and records live on different grids")
    fv = f1.values
    weights = np.real(fv) * grid.dt
    thetas = np.fromiter((r.theta for r in records), float, len(records))
    ids = np.fromiter((r.event_id for r in records), np.int64, len(records))
    values = np.empty(len(records))
    for start in range(0, len(records), 4096):
        block = np.stack([r.samples for r in records[start : start + 4096]])
        values[start : start + block.shape[0]] = block @ weights
    return QuadratureSampleSet(thetas, values, ids, "projected-f1")


# ---------------------------------------------------------------------------
# maximum-likelihood reconstruction


def _binned_projectors(
    xs: np.ndarray,
    theta: float,
    n_cut: int,
    bin_min_count: int,
    max_bins: int,
    gl_order: int = 12,
    max_piece: float = 0.25,
):
    """Quantile bins and bin-integrated projectors for one phase.

    Projector matrix elements are exp(i theta (m - n)) * int_bin psi_m psi_n,
    with the integral done by composite Gauss-Legendre on pieces short
    enough to resolve the fastest psi oscillation at this n_cut.
    """
    n = xs.size
    n_bins = max(1, min(max_bins, n // bin_min_count))
    edges = np.unique(np.quantile(xs, np.linspace(0.0, 1.0, n_bins + 1)))
    x_max = float(np.abs(xs).max()) + 6.0
    if edges.size < 2:
        edges = np.array([-x_max, x_max])
    else:
        edges = edges.copy()
        edges[0], edges[-1] = -x_max, x_max
    counts, _ = np.histogram(xs, bins=edges)
    gl_x, gl_w = np.polynomial.legendre.leggauss(gl_order)
    phase = np.exp(1j * theta * (np.arange(n_cut)[:, None] - np.arange(n_cut)[None, :]))
    projectors, kept_counts = [], []
    for b in range(edges.size - 1):
        if counts[b] == 0:
            continue
        a, c = edges[b], edges[b + 1]
        n_sub = max(1, int(np.ceil((c - a) / max_piece)))
        bounds = np.linspace(a, c, n_sub + 1)
        mids = (bounds[:-1] + bounds[1:]) / 2
        halves = (bounds[1:] - bounds[:-1]) / 2
        nodes = (mids[:, None] + halves[:, None] * gl_x).ravel()
        wts = (halves[:, None] * gl_w).ravel()
        psi = fock.quadrature_wavefunctions(n_cut, nodes)
        overlap = (psi * wts) @ psi.T
        projectors.append(phase * overlap)
        kept_counts.append(counts[b])
    return projectors, np.asarray(kept_counts, float)


def mle_reconstruct(
    samples: QuadratureSampleSet,
    n_cut: int,
    max_iter: int = 2000,
    tol: float = 1e-7,
    bin_min_count: int = 20,
    max_bins_per_phase: int = 150,
    search_radius: float = 1.0,
) -> TomographyResult:
    """Iterative maximum-likelihood density-matrix reconstruction.

    Expectation-maximization with the R rho R update over bin-integrated
    projectors; the log-likelihood trace is non-decreasing (a damped step
    is substituted in the rare case the full step would lower it). Stops
    when the max-abs change of rho falls below ``tol``; non-convergence
    within ``max_iter`` is flagged, not raised.
    """
    phases = samples.phases()
    if phases.size < 2:
        raise InsufficientDataError("tomography needs samples at >= 2 distinct phases")
    projectors, counts = [], []
    for theta in phases:
        xs = samples.values[samples.thetas == theta]
        if xs.size == 0:
            raise InsufficientDataError("empty phase group")
        pr, ct = _binned_projectors(xs, float(theta), n_cut, bin_min_count, max_bins_per_phase)
        projectors.extend(pr)
        counts.append(ct)
    P = np.stack(projectors)  # (B, N, N)
    c = np.concatenate(counts)
    freq = c / c.sum()
    P_flat = P.reshape(P.shape[0], -1)
    P_sum = P_flat.T.copy()  # contiguous for the R assembly

    def probs(rho_mat: np.ndarray) -> np.ndarray:
        # Tr(rho Pi_b) = sum_mn Pi_mn conj(rho_mn) for Hermitian rho
        return np.clip(np.real(P_flat @ rho_mat.conj().reshape(-1)), 1e-300, None)

    def loglik(p: np.ndarray) -> float:
        return float(np.dot(c, np.log(p)))

    rho = np.eye(n_cut, dtype=complex) / n_cut
    p = probs(rho)
    ll = [loglik(p)]
    converged = False
    n_done = 0
    for _ in range(max_iter):
        r_op = (P_sum @ (freq / p)).reshape(n_cut, n_cut)
        cand = r_op @ rho @ r_op
        cand = (cand + cand.conj().T) / 2
        cand /= np.trace(cand).real
        p_cand = probs(cand)
        ll_cand = loglik(p_cand)
        stalled = False
        if ll_cand < ll[-1] - 1e-12 * abs(ll[-1]):
            # full step would lower the likelihood: damp toward rho
            step = 0.5
            while True:
                mixed = (1 - step) * rho + step * cand
                p_mixed = probs(mixed)
                ll_mixed = loglik(p_mixed)
                if ll_mixed >= ll[-1] - 1e-12 * abs(ll[-1]):
                    cand, p_cand, ll_cand = mixed, p_mixed, ll_mixed
                    break
                step /= 2
                if step < 1e-6:
                    stalled = True  # likelihood stationary at float precision
                    break
        n_done += 1
        if stalled:
            converged = True
            break
        delta = float(np.abs(cand - rho).max())
        rho, p = cand, p_cand
        ll.append(ll_cand)
        if delta < tol:
            converged = True
            break
    rho_hat = FockDensity(rho)
    w_min, loc = wigner_min_near_origin(rho_hat, search_radius)
    return TomographyResult(
        rho_hat=rho_hat,
        log_likelihood=np.asarray(ll),
        converged=converged,
        n_iter=n_done,
        w_min=w_min,
        w_min_location=loc,
        pn_dist=fock.photon_number_distribution(rho_hat),
    )


def wigner_min_near_origin(
    rho: FockDensity, search_radius: float = 1.0
) -> tuple[float, tuple[float, float]]:
    """Minimum of W over the disc |(x,p)| <= search_radius.

    Polar grid scan followed by a local simplex refinement; reconstructed
    states are slightly asymmetric, so the minimum need not sit at the
    origin.
    """
    if not (search_radius > 0):
        raise ValueError("search radius must be positive")
    radii = np.linspace(0.0, search_radius, 25)
    angles = np.linspace(0.0, 2 * np.pi, 48, endpoint=False)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    xs = (rr * np.cos(aa)).ravel()
    ps = (rr * np.sin(aa)).ravel()
    vals = fock._wigner_values(rho.matrix, xs, ps)
    k = int(np.argmin(vals))
    best = (float(xs[k]), float(ps[k]))
    best_val = float(vals[k])

    def objective(v):
        r = math.hypot(v[0], v[1])
        w = fock.wigner_point(rho, float(v[0]), float(v[1]))
        if r > search_radius:
            return w + 10.0 * (r - search_radius) ** 2
        return w

    res = scipy.optimize.minimize(
        objective, x0=np.array(best), method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 300},
    )
    if res.fun < best_val and math.hypot(*res.x) <= search_radius + 1e-9:
        return float(res.fun), (float(res.x[0]), float(res.x[1]))
    return best_val, best


def _resample_by_phase(
    samples: QuadratureSampleSet, rng: np.random.Generator
) -> QuadratureSampleSet:
    thetas, values, ids = [], [], []
    for theta in samples.phases():
        sel = np.nonzero(samples.thetas == theta)[0]
        draw = sel[rng.integers(0, sel.size, sel.size)]
        thetas.append(samples.thetas[draw])
        values.append(samples.values[draw])
        ids.append(samples.event_ids[draw])
    return QuadratureSampleSet(
        np.concatenate(thetas), np.concatenate(values), np.concatenate(ids),
        samples.source_mode,
    )


def bootstrap_wmin(
    samples: QuadratureSampleSet,
    n_resamples: int,
    rng_seed: int,
    n_cut: int,
    search_radius: float = 1.0,
    jobs: int = 1,
    mle_kwargs: dict | None = None,
) -> BootstrapResult:
    """Bootstrap spread of the near-origin Wigner minimum.

    Events are resampled with replacement within each phase; every
    resample gets an independent child seed spawned from ``rng_seed``
    (np.random.SeedSequence(rng_seed).spawn), so results are reproducible
    for a fixed seed regardless of the worker count. The per-resample MLE
    uses mildly relaxed settings by default (tol 1e-6, 600 iterations),
    override via ``mle_kwargs``.
    """
    if n_resamples < 50:
        raise ValueError("need at least 50 resamples for a stable error bar")
    kwargs = {"max_iter": 600, "tol": 1e-6}
    kwargs.update(mle_kwargs or {})
    seeds = np.random.SeedSequence(rng_seed).spawn(n_resamples)

    def one(i: int) -> tuple[float, bool]:
        rng = np.random.default_rng(seeds[i])
        res = mle_reconstruct(
            _resample_by_phase(samples, rng), n_cut,
            search_radius=search_radius, **kwargs,
        )
        return res.w_min, res.converged

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(one, range(n_resamples)))
    else:
        out = [one(i) for i in range(n_resamples)]
    w_values = np.array([w for w, _ in out])
    n_bad = sum(1 for _, ok in out if not ok)
    return BootstrapResult(
        mean=float(w_values.mean()),
        std=float(w_values.std(ddof=1)),
        values=w_values,
        n_nonconverged=n_bad,
    )


def attach_bootstrap(result: TomographyResult, boot: BootstrapResult) -> TomographyResult:
    return replace(result, bootstrap_mean=boot.mean, bootstrap_std=boot.std)
