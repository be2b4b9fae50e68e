"""Truncated Fock-basis engine: states, channels, marginals, phase space.

Conventions used throughout the package (fixed once, here):
    hbar = 1,  [x, p] = i,  x = (a + a^dag)/sqrt(2),  vacuum variance 1/2.
The Wigner function is normalized to unit integral, which puts the origin
value at (1/pi) * <parity>: +1/pi for even states, -1/pi for odd ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import PhysicsError, TruncationError

WIGNER_CONVENTION = "hbar=1;vacuum-variance=1/2;unit-integral;W(0,0)=parity/pi"

_NORM_TOL = 1e-12
_TRACE_TOL = 1e-10
_EIG_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockState:
    """Pure state in the truncated photon-number basis.

    ``amplitudes[n]`` is the coefficient of |n> for n = 0 .. n_cut-1.
    Constructors in this module always return unit-norm states; the last
    retained amplitude is exposed as ``tail_mass`` so callers can check
    truncation adequacy.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise TruncationError("amplitudes must be a vector with n_cut >= 1")
        if not np.all(np.isfinite(amps.view(float))):
            raise ValueError("non-finite amplitude")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @property
    def n_cut(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def tail_mass(self) -> float:
        """Probability weight |c_{n_cut-1}|^2 of the last retained level."""
        return float(np.abs(self.amplitudes[-1]) ** 2)

    def normalized(self) -> "FockState":
        n = self.norm
        if n < 1e-150:
            raise PhysicsError("cannot normalize a zero state")
        return FockState(self.amplitudes / n)

    def overlap(self, other: "FockState") -> complex:
        """<self|other> on the common truncation."""
        k = min(self.n_cut, other.n_cut)
        return complex(np.vdot(self.amplitudes[:k], other.amplitudes[:k]))

    def mean_photon_number(self) -> float:
        p = np.abs(self.amplitudes) ** 2
        return float(np.dot(np.arange(self.n_cut), p))

    def to_density(self) -> "FockDensity":
        c = self.amplitudes
        return FockDensity(np.outer(c, c.conj()))


@dataclass(frozen=True)
class FockDensity:
    """Hermitian, unit-trace, PSD matrix in the truncated number basis."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise TruncationError("matrix must be square with n_cut >= 1")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def n_cut(self) -> int:
        return self.matrix.shape[0]

    def validate(self, check_psd: bool = True) -> None:
        m = self.matrix
        if np.abs(m - m.conj().T).max() > _NORM_TOL * max(1.0, np.abs(m).max()):
            raise PhysicsError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > _TRACE_TOL:
            raise PhysicsError(f"trace {np.trace(m).real!r} != 1")
        if check_psd:
            ev = np.linalg.eigvalsh((m + m.conj().T) / 2)
            if ev.min() < -_EIG_TOL:
                raise PhysicsError(f"negative eigenvalue {ev.min()!r}")

    def fidelity_pure(self, state: FockState) -> float:
        """<psi|rho|psi> against a pure reference."""
        k = min(self.n_cut, state.n_cut)
        c = state.amplitudes[:k]
        return float(np.real(c.conj() @ self.matrix[:k, :k] @ c))


@dataclass(frozen=True)
class WignerGrid:
    """Phase-space quasiprobability on a rectangular lattice.

    ``values[i, j]`` is W(x_axis[i], p_axis[j]).
    """

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    convention: str = field(default=WIGNER_CONVENTION)

    def __post_init__(self):
        object.__setattr__(self, "x_axis", _readonly(np.asarray(self.x_axis, float)))
        object.__setattr__(self, "p_axis", _readonly(np.asarray(self.p_axis, float)))
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, float)))

    def integral(self) -> float:
        dx = float(self.x_axis[1] - self.x_axis[0])
        dp = float(self.p_axis[1] - self.p_axis[0])
        return float(self.values.sum() * dx * dp)

    def value_at(self, x: float, p: float) -> float:
        i = int(np.argmin(np.abs(self.x_axis - x)))
        j = int(np.argmin(np.abs(self.p_axis - p)))
        return float(self.values[i, j])


# ---------------------------------------------------------------------------
# state constructors


def fock_basis_state(n: int, n_cut: int) -> FockState:
    """Number state |n>."""
    if not 0 <= n < n_cut:
        raise TruncationError(f"need 0 <= n < n_cut, got n={n}, n_cut={n_cut}")
    c = np.zeros(n_cut, dtype=complex)
    c[n] = 1.0
    return FockState(c)


def coherent_state(alpha: complex, n_cut: int) -> FockState:
    """Coherent state, c_n = exp(-|a|^2/2) a^n / sqrt(n!), renormalized.

    The amplitude recurrence c_{n+1} = c_n * a / sqrt(n+1) avoids explicit
    factorials and keeps the exact sign alternation between +a and -a.
    """
    alpha = complex(alpha)
    if not np.isfinite(alpha.real) or not np.isfinite(alpha.imag):
        raise ValueError("alpha must be finite")
    if n_cut < 1:
        raise TruncationError("n_cut must be >= 1")
    c = np.zeros(n_cut, dtype=complex)
    c[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, n_cut):
        c[n] = c[n - 1] * alpha / np.sqrt(n)
    return FockState(c).normalized()


def squeezed_vacuum(squeeze_param: float, n_cut: int) -> FockState:
    """Squeezed vacuum with variance exp(-2r)/2 along the x quadrature.

    Even levels only: c_{2m} = (cosh r)^{-1/2} (-tanh r)^m sqrt((2m)!)/(2^m m!),
    evaluated through log-gamma so the factorials never overflow.
    """
    r = float(squeeze_param)
    if not np.isfinite(r) or r < 0:
        raise ValueError("squeeze parameter must be finite and >= 0")
    if n_cut < 1:
        raise TruncationError("n_cut must be >= 1")
    c = np.zeros(n_cut, dtype=complex)
    if r == 0.0:
        c[0] = 1.0
        return FockState(c)
    m = np.arange(0, n_cut, 2)
    half = m // 2
    logs = (
        -0.5 * np.log(np.cosh(r))
        + half * np.log(np.tanh(r))
        + 0.5 * gammaln(m + 1.0)
        - half * np.log(2.0)
        - gammaln(half + 1.0)
    )
    c[m] = np.where(half % 2 == 0, 1.0, -1.0) * np.exp(logs)
    return FockState(c).normalized()


def cat_state(alpha: complex, psi: float, n_cut: int) -> FockState:
    """Superposition (|a> + e^{i psi} |-a>) / N_{psi,a}.

    N_{psi,a} = sqrt(2 + 2 cos(psi) exp(-2|a|^2)); the exactly cancelling
    case (a = 0 with psi = pi) is rejected, use a small alpha explicitly
    for the single-photon limit.
    """
    alpha = complex(alpha)
    psi = float(psi)
    norm_sq = 2.0 + 2.0 * np.cos(psi) * np.exp(-2.0 * abs(alpha) ** 2)
    if norm_sq < 1e-24:
        raise PhysicsError(
            "degenerate cat: |alpha> + e^{i psi}|-alpha> cancels "
            f"(alpha={alpha}, psi={psi})"
        )
    plus = coherent_state(alpha, n_cut)
    minus = coherent_state(-alpha, n_cut)
    c = plus.amplitudes + np.exp(1j * psi) * minus.amplitudes
    return FockState(c).normalized()


# ---------------------------------------------------------------------------
# channels and operators


def photon_subtract(state: FockState) -> FockState:
    """Apply the annihilation operator and renormalize.

    c'_n = sqrt(n+1) c_{n+1}; flips the parity of any definite-parity input.
    """
    c = state.amplitudes
    n = state.n_cut
    out = np.zeros(n, dtype=complex)
    out[: n - 1] = np.sqrt(np.arange(1, n)) * c[1:]
    nrm = np.linalg.norm(out)
    if nrm < 1e-12:
        raise PhysicsError("photon subtraction on (near-)vacuum gives a zero state")
    return FockState(out / nrm)


def loss_channel(rho: FockDensity, eta: float) -> FockDensity:
    """Beamsplitter loss map with transmittance eta.

    Kraus operators A_k |n> = sqrt(C(n,k) eta^{n-k} (1-eta)^k) |n-k>;
    trace preserving, eta=1 is the identity and eta=0 maps to vacuum.
    """
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    n = rho.n_cut
    m = rho.matrix
    if eta == 1.0:
        return FockDensity(m.copy())
    ns = np.arange(n, dtype=float)
    out = np.zeros((n, n), dtype=complex)
    log_eta = np.log(eta) if eta > 0 else -np.inf
    log_1me = np.log1p(-eta) if eta < 1 else -np.inf
    for k in range(n):
        src = np.arange(k, n)
        # log of binomial(src, k) * eta^(src-k) * (1-eta)^k, halved for amplitude
        logw = 0.5 * (
            gammaln(src + 1.0) - gammaln(src - k + 1.0) - gammaln(k + 1.0)
            + (src - k) * (log_eta if eta > 0 else 0.0)
            + k * (log_1me if eta < 1 else 0.0)
        )
        w = np.exp(logw)
        if eta == 0.0:
            w = np.where(src == k, 1.0, 0.0)
        block = m[k:, k:] * np.outer(w, w)
        out[: n - k, : n - k] += block
    out = (out + out.conj().T) / 2
    return FockDensity(out / np.trace(out).real)


# ---------------------------------------------------------------------------
# observables


def photon_number_distribution(rho: FockDensity) -> np.ndarray:
    """Diagonal of rho (real)."""
    return np.real(np.diag(rho.matrix)).copy()


def wigner_origin_parity(rho: FockDensity) -> float:
    """(1/pi) sum_n (-1)^n rho_nn, the Wigner value at the origin."""
    p = photon_number_distribution(rho)
    signs = np.where(np.arange(p.size) % 2 == 0, 1.0, -1.0)
    return float(np.dot(signs, p) / np.pi)


def _wigner_values(rho: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Wigner function at paired points via the Laguerre expansion.

    W = sum_{m>=n} rho_mn (1/pi) e^{-r^2} (-1)^n sqrt(2^{m-n} n!/m!)
        (x - i p)^{m-n} L_n^{m-n}(2 r^2),  plus the conjugate for m > n.
    The generalized Laguerre values come from the three-term recurrence in
    n, vectorized over all evaluation points.
    """
    n_cut = rho.shape[0]
    x = np.asarray(x, float).ravel()
    p = np.asarray(p, float).ravel()
    r2 = x * x + p * p
    z = 2.0 * r2
    w = np.zeros(x.shape, dtype=complex)
    xi = x - 1j * p
    xi_pow = np.ones_like(w)  # (x - i p)^k, updated per offset
    for k in range(n_cut):
        diag = np.diagonal(rho, offset=-k)  # rho[n+k, n]
        if np.any(diag != 0):
            j = np.arange(n_cut - k, dtype=float)
            coeff = np.exp(0.5 * (k * np.log(2.0) + gammaln(j + 1) - gammaln(j + k + 1)))
            coeff *= np.where(j % 2 == 0, 1.0, -1.0)
            lag_prev = np.zeros_like(z)
            lag = np.ones_like(z)
            acc = np.zeros(x.shape, dtype=complex)
            for jj in range(n_cut - k):
                c = diag[jj] * coeff[jj]
                if c != 0:
                    acc += c * lag
                lag_next = ((2 * jj + k + 1 - z) * lag - (jj + k) * lag_prev) / (jj + 1)
                lag_prev, lag = lag, lag_next
            term = acc * xi_pow
            w += term if k == 0 else term + np.conj(term)
        xi_pow = xi_pow * xi
    return np.real(w) * np.exp(-r2) / np.pi


def wigner_point(rho: FockDensity, x, p):
    """W at arbitrary points; scalar in, scalar out."""
    xv = np.atleast_1d(np.asarray(x, float))
    pv = np.atleast_1d(np.asarray(p, float))
    xv, pv = np.broadcast_arrays(xv, pv)
    vals = _wigner_values(rho.matrix, xv.ravel(), pv.ravel()).reshape(xv.shape)
    if np.isscalar(x) and np.isscalar(p):
        return float(vals.reshape(-1)[0])
    return vals


def wigner(rho: FockDensity, x_axis: np.ndarray, p_axis: np.ndarray) -> WignerGrid:
    """Wigner function on the outer product of two axes."""
    x_axis = np.asarray(x_axis, float)
    p_axis = np.asarray(p_axis, float)
    for ax, name in ((x_axis, "x_axis"), (p_axis, "p_axis")):
        if ax.ndim != 1 or ax.size < 2 or not np.all(np.isfinite(ax)):
            raise ValueError(f"{name} must be a finite 1-d axis")
        if not np.all(np.diff(ax) > 0):
            raise ValueError(f"{name} must be strictly increasing")
    X, P = np.meshgrid(x_axis, p_axis, indexing="ij")
    vals = _wigner_values(rho.matrix, X.ravel(), P.ravel()).reshape(X.shape)
    return WignerGrid(x_axis, p_axis, vals)


def default_wigner_axes(extent: float = 5.0, n_points: int = 201):
    """Symmetric axes wide enough for the default state family."""
    ax = np.linspace(-extent, extent, n_points)
    return ax, ax.copy()


def quadrature_wavefunctions(n_cut: int, x: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions psi_n(x), rows n = 0..n_cut-1.

    Normalized so psi_0^2 is a Gaussian with variance 1/2; stable upward
    recurrence psi_{n} = sqrt(2/n) x psi_{n-1} - sqrt((n-1)/n) psi_{n-2}.
    """
    x = np.asarray(x, float)
    out = np.zeros((n_cut,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-x * x / 2.0)
    if n_cut > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, n_cut):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] - np.sqrt((n - 1.0) / n) * out[n - 2]
    return out


def quadrature_pdf(rho: FockDensity, theta: float, x):
    """Homodyne marginal P(x | theta) of the rotated quadrature x cos(theta) + p sin(theta).

    P = sum_{m,n} rho_mn e^{i(n-m)theta} psi_m(x) psi_n(x); integrates to 1.
    """
    xv = np.atleast_1d(np.asarray(x, float))
    psi = quadrature_wavefunctions(rho.n_cut, xv)
    u = np.exp(1j * float(theta) * np.arange(rho.n_cut))[:, None] * psi
    vals = np.real(np.sum(u.conj() * (rho.matrix @ u), axis=0))
    if np.isscalar(x):
        return float(vals[0])
    return vals
