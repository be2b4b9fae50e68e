import numpy as np
import pytest
from scipy.linalg import expm

import gatedcat as gc
from gatedcat.errors import PhysicsError, TruncationError

from conftest import random_density

PI = np.pi


# ---------------------------------------------------------------------------
# oracles


def wigner_displaced_parity(rho: gc.FockDensity, x: float, p: float, pad: int = 25) -> float:
    """Independent Wigner oracle: (1/pi) Tr[rho D(beta) Pi D(beta)^dag], with
    the displacement operator built by expm in a padded space."""
    n = rho.n_cut + pad
    a = np.diag(np.sqrt(np.arange(1.0, n)), 1)
    beta = (x + 1j * p) / np.sqrt(2)
    disp = expm(beta * a.conj().T - np.conj(beta) * a)
    parity = np.diag((-1.0) ** np.arange(n))
    op = disp @ parity @ disp.conj().T
    k = rho.n_cut
    return float(np.real(np.trace(rho.matrix @ op[:k, :k]))) / PI


def pdf_moment(rho, theta, order, x_max=14.0, n=40001):
    xg = np.linspace(-x_max, x_max, n)
    pdf = gc.quadrature_pdf(rho, theta, xg)
    return float(np.trapezoid(xg**order * pdf, xg))


# ---------------------------------------------------------------------------
# constructors


def test_coherent_vacuum_limit():
    st = gc.coherent_state(0.0, 10)
    assert st.amplitudes[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(st.amplitudes[1:] == 0)


def test_coherent_poisson_amplitudes():
    st = gc.coherent_state(1.0, 20)
    assert st.amplitudes[0].real == pytest.approx(np.exp(-0.5), abs=1e-12)
    assert st.amplitudes[1].real == pytest.approx(np.exp(-0.5), abs=1e-12)
    assert np.linalg.norm(st.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_coherent_mean_photon_number():
    st = gc.coherent_state(2j, 30)
    assert st.mean_photon_number() == pytest.approx(4.0, abs=1e-6)


def test_coherent_rejects_bad_input():
    with pytest.raises(ValueError):
        gc.coherent_state(np.nan, 10)
    with pytest.raises(TruncationError):
        gc.coherent_state(1.0, 0)


def test_squeezed_r0_is_vacuum():
    st = gc.squeezed_vacuum(0.0, 10)
    assert st.amplitudes[0] == 1.0
    assert np.all(st.amplitudes[1:] == 0)


def test_squeezed_even_photon_nature():
    st = gc.squeezed_vacuum(0.5, 40)
    assert np.all(st.amplitudes[1::2] == 0)
    assert st.tail_mass < 1e-6


def test_squeezed_quadrature_variances():
    rho = gc.squeezed_vacuum(0.5, 40).to_density()
    assert pdf_moment(rho, 0.0, 2) == pytest.approx(np.exp(-1.0) / 2, abs=1e-6)
    assert pdf_moment(rho, PI / 2, 2) == pytest.approx(np.exp(1.0) / 2, abs=1e-6)


def test_squeezed_rejects_negative_r():
    with pytest.raises(ValueError):
        gc.squeezed_vacuum(-0.1, 10)


def test_cat_small_alpha_is_single_photon():
    st = gc.cat_state(1e-3, PI, 20)
    one = gc.fock_basis_state(1, 20)
    assert abs(st.overlap(one)) ** 2 > 1 - 1e-4


def test_cat_even_parity_exact():
    st = gc.cat_state(1.2, 0.0, 40)
    odd_mass = float(np.sum(np.abs(st.amplitudes[1::2]) ** 2))
    assert odd_mass < 1e-12


def test_cat_odd_parity():
    rho = gc.cat_state(1.2, PI, 40).to_density()
    parity = gc.wigner_origin_parity(rho) * PI
    assert parity == pytest.approx(-1.0, abs=1e-10)


def test_cat_degenerate_rejected():
    with pytest.raises(PhysicsError):
        gc.cat_state(0.0, PI, 10)


# ---------------------------------------------------------------------------
# photon subtraction and loss


def test_subtract_single_photon():
    out = gc.photon_subtract(gc.fock_basis_state(1, 10))
    assert abs(out.amplitudes[0]) == pytest.approx(1.0, abs=1e-12)


def test_subtract_squeezed_flips_parity():
    out = gc.photon_subtract(gc.squeezed_vacuum(0.5, 40))
    assert np.all(out.amplitudes[0::2] == 0)  # even support exactly empty
    parity = gc.wigner_origin_parity(out.to_density()) * PI
    assert parity == pytest.approx(-1.0, abs=1e-12)


def test_subtract_coherent_is_eigenstate():
    st = gc.coherent_state(1.0, 40)
    out = gc.photon_subtract(st)
    assert abs(out.overlap(st)) ** 2 > 1 - 1e-10


def test_subtract_vacuum_rejected():
    with pytest.raises(PhysicsError):
        gc.photon_subtract(gc.fock_basis_state(0, 10))


def test_loss_identity():
    rho = gc.cat_state(1.0, PI, 20).to_density()
    out = gc.loss_channel(rho, 1.0)
    assert np.abs(out.matrix - rho.matrix).max() < 1e-12


def test_loss_full():
    rho = gc.cat_state(1.0, PI, 20).to_density()
    out = gc.loss_channel(rho, 0.0)
    expected = np.zeros((20, 20))
    expected[0, 0] = 1.0
    assert np.abs(out.matrix - expected).max() < 1e-12


def test_loss_half_on_single_photon():
    rho = gc.fock_basis_state(1, 5).to_density()
    out = gc.loss_channel(rho, 0.5)
    assert out.matrix[0, 0].real == pytest.approx(0.5, abs=1e-12)
    assert out.matrix[1, 1].real == pytest.approx(0.5, abs=1e-12)


def test_loss_semigroup(rng):
    for _ in range(10):
        rho = random_density(rng, 12)
        a = gc.loss_channel(gc.loss_channel(rho, 0.8), 0.6)
        b = gc.loss_channel(rho, 0.48)
        assert np.abs(a.matrix - b.matrix).max() < 1e-9


def test_loss_trace_preserved(rng):
    for _ in range(5):
        rho = random_density(rng, 15)
        out = gc.loss_channel(rho, rng.uniform(0, 1))
        assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-10)


def test_loss_rejects_bad_eta():
    rho = gc.fock_basis_state(0, 4).to_density()
    with pytest.raises(ValueError):
        gc.loss_channel(rho, 1.5)


# ---------------------------------------------------------------------------
# Wigner function


def test_wigner_anchors():
    vac = gc.fock_basis_state(0, 20).to_density()
    one = gc.fock_basis_state(1, 20).to_density()
    assert gc.wigner_point(vac, 0.0, 0.0) == pytest.approx(1 / PI, abs=1e-12)
    assert gc.wigner_point(one, 0.0, 0.0) == pytest.approx(-1 / PI, abs=1e-12)
    half = gc.loss_channel(one, 0.5)
    assert gc.wigner_point(half, 0.0, 0.0) == pytest.approx(0.0, abs=1e-9)


def test_wigner_grid_integral_and_bounds():
    for rho in (
        gc.cat_state(1.2, PI, 40).to_density(),
        gc.squeezed_vacuum(0.5, 40).to_density(),
        gc.loss_channel(gc.cat_state(1.6, PI, 40).to_density(), 0.7),
    ):
        x, p = gc.fock.default_wigner_axes()
        grid = gc.wigner(rho, x, p)
        assert 0.99 <= grid.integral() <= 1.01
        assert grid.values.min() >= -1 / PI - 1e-9
        assert grid.values.max() <= 1 / PI + 1e-9


def test_wigner_coherent_center():
    rho = gc.coherent_state(1.0, 30).to_density()
    assert gc.wigner_point(rho, np.sqrt(2), 0.0) == pytest.approx(1 / PI, abs=1e-9)
    rho_i = gc.coherent_state(1j, 30).to_density()
    assert gc.wigner_point(rho_i, 0.0, np.sqrt(2)) == pytest.approx(1 / PI, abs=1e-9)


def test_wigner_against_displaced_parity_oracle(rng):
    for _ in range(3):
        rho = random_density(rng, 10)
        for x, p in [(0.0, 0.0), (0.7, -0.3), (-1.2, 0.9), (1.8, 1.1)]:
            assert gc.wigner_point(rho, x, p) == pytest.approx(
                wigner_displaced_parity(rho, x, p), abs=1e-9
            )


def test_wigner_rejects_bad_axes():
    rho = gc.fock_basis_state(0, 4).to_density()
    with pytest.raises(ValueError):
        gc.wigner(rho, np.array([0.0, -1.0]), np.array([0.0, 1.0]))


def test_parity_consistency_random(rng):
    x = np.linspace(-5, 5, 21)  # includes 0
    for _ in range(50):
        rho = random_density(rng, 10)
        grid = gc.wigner(rho, x, x)
        assert grid.value_at(0.0, 0.0) == pytest.approx(
            gc.wigner_origin_parity(rho), abs=1e-9
        )


def test_origin_parity_anchors():
    assert gc.wigner_origin_parity(gc.fock_basis_state(0, 10).to_density()) == pytest.approx(1 / PI)
    assert gc.wigner_origin_parity(gc.fock_basis_state(1, 10).to_density()) == pytest.approx(-1 / PI)
    assert gc.wigner_origin_parity(gc.squeezed_vacuum(0.5, 40).to_density()) == pytest.approx(1 / PI)


def test_marginal_consistency():
    rho = gc.cat_state(1.2, PI, 40).to_density()
    x, p = gc.fock.default_wigner_axes()
    grid = gc.wigner(rho, x, p)
    dp = p[1] - p[0]
    marginal = grid.values.sum(axis=1) * dp
    expected = gc.quadrature_pdf(rho, 0.0, x)
    assert np.abs(marginal - expected).max() < 1e-4


# ---------------------------------------------------------------------------
# quadrature marginals and photon statistics


def test_quadrature_pdf_vacuum():
    rho = gc.fock_basis_state(0, 10).to_density()
    assert gc.quadrature_pdf(rho, 0.3, 0.0) == pytest.approx(1 / np.sqrt(PI), abs=1e-12)
    assert pdf_moment(rho, 1.1, 2) == pytest.approx(0.5, abs=1e-9)


def test_quadrature_pdf_single_photon_node():
    rho = gc.fock_basis_state(1, 10).to_density()
    for theta in (0.0, 0.7, 2.0):
        assert gc.quadrature_pdf(rho, theta, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_quadrature_pdf_normalized(rng):
    for _ in range(5):
        rho = random_density(rng, 12)
        assert pdf_moment(rho, rng.uniform(0, PI), 0) == pytest.approx(1.0, abs=1e-8)


def test_quadrature_pdf_coherent_mean():
    rho = gc.coherent_state(1.0, 30).to_density()
    assert pdf_moment(rho, 0.0, 1) == pytest.approx(np.sqrt(2), abs=1e-8)
    rho_i = gc.coherent_state(1j, 30).to_density()
    assert pdf_moment(rho_i, PI / 2, 1) == pytest.approx(np.sqrt(2), abs=1e-8)


def test_photon_number_distribution():
    odd = gc.cat_state(1.0, PI, 30).to_density()
    pn = gc.photon_number_distribution(odd)
    assert np.all(pn[0::2] < 1e-12)
    vac = gc.fock_basis_state(0, 5).to_density()
    assert np.allclose(gc.photon_number_distribution(vac), [1, 0, 0, 0, 0])


def test_photon_number_mixture_support():
    cat = gc.cat_state(1.0, PI, 30).to_density().matrix
    sqz = gc.squeezed_vacuum(0.3, 30).to_density().matrix
    rho = gc.FockDensity(0.5 * cat + 0.5 * sqz)
    pn = gc.photon_number_distribution(rho)
    # strict mixture: both parities populated, and each matches its component
    assert pn[1] == pytest.approx(0.5 * gc.photon_number_distribution(gc.FockDensity(cat))[1], rel=1e-12)
    assert pn[2] == pytest.approx(0.5 * gc.photon_number_distribution(gc.FockDensity(sqz))[2], rel=1e-12)
    assert pn[1] > 1e-3 and pn[2] > 1e-3


def test_density_validate(rng):
    rho = random_density(rng, 8)
    rho.validate()
    bad = np.eye(3) * 0.5
    with pytest.raises(PhysicsError):
        gc.FockDensity(bad).validate()
