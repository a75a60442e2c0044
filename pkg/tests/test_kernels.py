import numpy as np
import pytest

from fixedb.exceptions import DomainError
from fixedb.kernels import WeightKernel, bartlett, by_name, custom_kernel, quadratic

GRID = np.linspace(0.0, 1.0, 101)


def test_w_values(bartlett_kernel, quadratic_kernel):
    assert bartlett_kernel.w(0.0) == 1.0
    assert bartlett_kernel.w(0.5) == 0.5
    assert quadratic_kernel.w(0.5) == 0.75
    assert bartlett_kernel.w(1.5) == 0.0
    assert bartlett_kernel.w(-1.0) == 0.0
    assert quadratic_kernel.w(1.0) == 0.0


def test_w_even_and_bounded(bartlett_kernel, quadratic_kernel):
    u = np.linspace(-1.0, 1.0, 1001)
    for kernel in (bartlett_kernel, quadratic_kernel):
        vals = kernel.w(u)
        assert np.max(np.abs(vals - vals[::-1])) <= 1e-12
        assert vals.min() >= 0.0 and vals.max() <= 1.0


def test_g_closed_forms(bartlett_kernel, quadratic_kernel):
    assert bartlett_kernel.g(0.0) == pytest.approx(0.5, abs=1e-15)
    assert bartlett_kernel.g(0.5) == pytest.approx(0.75, abs=1e-15)
    assert quadratic_kernel.g(0.0) == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_g_domain_error(bartlett_kernel):
    with pytest.raises(DomainError):
        bartlett_kernel.g(-0.01)
    with pytest.raises(DomainError):
        bartlett_kernel.g(1.01)


def test_integral_g(bartlett_kernel, quadratic_kernel):
    assert bartlett_kernel.integral_g() == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert quadratic_kernel.integral_g() == pytest.approx(5.0 / 6.0, abs=1e-12)
    assert 0.0 <= bartlett_kernel.integral_g() <= 1.0
    assert 0.0 <= quadratic_kernel.integral_g() <= 1.0


def test_custom_kernel_quadrature_matches_closed_form():
    # a custom copy of the triangular kernel must agree with the closed form
    kernel = custom_kernel(lambda u: 1.0 - np.abs(u), name="tri-copy")
    ref = bartlett()
    for t in (0.0, 0.25, 0.5, 0.9, 1.0):
        assert kernel.g(t) == pytest.approx(ref.g(t), abs=1e-9)
    assert kernel.integral_g() == pytest.approx(2.0 / 3.0, abs=1e-8)


def test_rho_star_point_values(bartlett_kernel, quadratic_kernel):
    assert bartlett_kernel.rho_star(0.0, 0.5) == pytest.approx(-1.0 / 12.0,
                                                               abs=1e-14)
    assert bartlett_kernel.rho_star_generic(0.0, 0.5) == pytest.approx(
        -1.0 / 12.0, abs=1e-12)
    assert quadratic_kernel.rho_star(0.5, 0.5) == 0.0
    assert quadratic_kernel.rho_star(0.0, 0.0) == pytest.approx(0.5, abs=1e-14)
    assert quadratic_kernel.rho_star_generic(0.0, 0.0) == pytest.approx(
        0.5, abs=1e-12)


def test_rho_star_domain(bartlett_kernel):
    with pytest.raises(DomainError):
        bartlett_kernel.rho_star(-0.1, 0.5)
    with pytest.raises(DomainError):
        bartlett_kernel.rho_star(0.1, 1.5)


@pytest.mark.parametrize("maker", [bartlett, quadratic])
def test_rho_star_symmetry(maker):
    kernel = maker()
    s = GRID[:, None]
    t = GRID[None, :]
    mat = kernel.rho_star(np.broadcast_to(s, (101, 101)),
                          np.broadcast_to(t, (101, 101)))
    assert np.max(np.abs(mat - mat.T)) <= 1e-12


@pytest.mark.parametrize("maker", [bartlett, quadratic])
def test_rho_star_zero_row_integral(maker):
    # int_0^1 rho_star(s, t) dt = 0 for every s (constant eigenfunction
    # belongs to the null space); composite Simpson on a fine grid
    kernel = maker()
    t = np.linspace(0.0, 1.0, 2001)
    from scipy.integrate import simpson

    for s in GRID:
        row = kernel.rho_star(np.full_like(t, s), t)
        assert abs(simpson(row, x=t)) <= 1e-8


@pytest.mark.parametrize("maker", [bartlett, quadratic])
def test_rho_star_trace_identity(maker):
    kernel = maker()
    t = np.linspace(0.0, 1.0, 2001)
    from scipy.integrate import simpson

    diag = kernel.rho_star(t, t)
    assert abs(simpson(diag, x=t) - (1.0 - kernel.integral_g())) <= 1e-8


@pytest.mark.parametrize("maker", [bartlett, quadratic])
def test_rho_star_closed_vs_generic(maker):
    kernel = maker()
    s = np.broadcast_to(GRID[:, None], (101, 101))
    t = np.broadcast_to(GRID[None, :], (101, 101))
    closed = kernel.rho_star(s, t)
    generic = kernel.rho_star_generic(s, t)
    assert np.max(np.abs(closed - generic)) <= 1e-10


def test_custom_kernel_validation():
    with pytest.raises(DomainError):  # odd part
        custom_kernel(lambda u: 1.0 - u)
    with pytest.raises(DomainError):  # w(0) != 1
        custom_kernel(lambda u: 0.5 * (1.0 - np.abs(u)))
    with pytest.raises(DomainError):  # w(1) != 0
        custom_kernel(lambda u: np.ones_like(u))
    with pytest.raises(DomainError):  # range violation
        custom_kernel(lambda u: np.cos(1.5 * np.pi * u))
    # the same kernel is accepted for diagnostics with the range check off
    kernel = custom_kernel(lambda u: np.cos(1.5 * np.pi * u),
                           check_range=False)
    assert kernel.w(2.0 / 3.0) == pytest.approx(-1.0, abs=1e-12)


def test_by_name():
    assert by_name("bartlett").id == "bartlett"
    assert by_name("QUADRATIC").id == "quadratic"
    with pytest.raises(DomainError):
        by_name("flat-top")


def test_support_enforced_for_custom():
    # the wrapper forces w to vanish outside (-1, 1) even if the raw
    # function does not
    kernel = WeightKernel("leaky", lambda u: 1.0 - np.abs(u), False)
    assert kernel.w(3.0) == 0.0
    assert kernel.w(-7.5) == 0.0
