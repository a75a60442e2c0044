import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixedb.exceptions import DomainError, NonStudentizableError
from fixedb.kernels import bartlett, quadratic
from fixedb.lagwindow import (
    _acov_direct,
    _acov_fft,
    autocovariances,
    cn_from_rule,
    gamma_n_sq,
    t_stat,
)


def gamh2_oracle(x, c_n, kernel, center):
    """Brute-force quadratic-form representation of the estimator:
    (1/n) sum_jk w((k-j)/c_n) hb_j hb_k - (2/n) S sum_k v_k hb_k
    + (u/n) S^2, with hb = x - center and S = sum hb. The identity holds
    for any centering constant."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    hb = x - center
    k = np.arange(n)
    w = kernel.w((k[:, None] - k[None, :]) / c_n)
    v = w.mean(axis=1)
    u = w.mean()
    s = hb.sum()
    return float(hb @ w @ hb / n - (2.0 / n) * s * (v @ hb) + u * s * s / n)


def test_hand_example():
    acov = autocovariances([0.0, 2.0], 1)
    assert acov[0] == pytest.approx(1.0, abs=1e-15)
    assert acov[1] == pytest.approx(-0.5, abs=1e-15)


def test_constant_sequence():
    # centering annihilates, up to the rounding of the mean itself
    acov = autocovariances(np.full(50, 3.7), 10)
    assert np.max(np.abs(acov)) <= 1e-25


def test_iid_autocovariances():
    rng = np.random.default_rng(2023)
    x = rng.standard_normal(10**5)
    acov = autocovariances(x, 1)
    assert 0.98 <= acov[0] <= 1.02
    assert abs(acov[1]) <= 0.02


def test_fft_vs_direct():
    rng = np.random.default_rng(7)
    for _ in range(25):
        for n in (3, 17, 256, 1001):
            x = rng.standard_normal(n)
            xc = x - x.mean()
            fft = _acov_fft(xc, n - 1)
            direct = _acov_direct(xc, n - 1)
            scale = np.max(np.abs(direct))
            assert np.max(np.abs(fft - direct)) <= 1e-10 * scale


def test_autocov_domain_errors():
    with pytest.raises(DomainError):
        autocovariances([1.0], 0)
    with pytest.raises(DomainError):
        autocovariances([1.0, 2.0], 2)
    with pytest.raises(DomainError):
        autocovariances([1.0, 2.0], -1)


def test_cn_one_gives_gamma0():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(200)
    est = gamma_n_sq(x, 1, bartlett())
    assert est.gamma_sq == pytest.approx(est.gamma0, abs=1e-15)


def test_iid_gamma_sq_near_one():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(10**5)
    c_n = round(len(x) ** (1.0 / 3.0))
    est = gamma_n_sq(x, c_n, bartlett())
    assert 0.9 <= est.gamma_sq <= 1.1
    assert est.ess == pytest.approx(len(x) * est.gamma0 / est.gamma_sq)


def test_quadratic_form_oracle():
    rng = np.random.default_rng(99)
    for _ in range(25):
        n = int(rng.integers(8, 512))
        c_n = int(rng.integers(1, n + 1))
        x = rng.standard_normal(n)
        for kernel in (bartlett(), quadratic()):
            est = gamma_n_sq(x, c_n, kernel).gamma_sq
            for center in (0.0, x.mean()):
                oracle = gamh2_oracle(x, c_n, kernel, center)
                assert abs(est - oracle) <= 1e-10 * max(1e-30, abs(est))


def test_nonpositive_estimate_flagged_not_clamped():
    # the parabolic kernel is not positive definite as a lag weighting, so
    # an alternating sequence can drive the estimate strictly negative
    x = np.array([1.0, -1.0] * 64)
    est = gamma_n_sq(x, 2, quadratic())
    assert est.gamma_sq < 0.0
    assert not est.positive
    assert np.isnan(est.ess)
    with pytest.raises(NonStudentizableError):
        t_stat(x, 0.0, 2, quadratic())
    # constant series: estimate is exactly zero, equally non-studentizable
    const = gamma_n_sq(np.full(64, 2.5), 4, bartlett())
    assert const.gamma_sq == 0.0
    with pytest.raises(NonStudentizableError):
        t_stat(np.full(64, 2.5), 0.0, 4, bartlett())


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-50.0, 50.0, allow_nan=False))
def test_location_invariance(shift):
    rng = np.random.default_rng(11)
    x = rng.standard_normal(257)
    base = gamma_n_sq(x, 32, bartlett()).gamma_sq
    shifted = gamma_n_sq(x + shift, 32, bartlett()).gamma_sq
    assert shifted == pytest.approx(base, rel=1e-10, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.01, 100.0, allow_nan=False))
def test_scale_equivariance(scale):
    rng = np.random.default_rng(13)
    x = rng.standard_normal(257)
    base = gamma_n_sq(x, 32, quadratic()).gamma_sq
    scaled = gamma_n_sq(scale * x, 32, quadratic()).gamma_sq
    assert scaled == pytest.approx(scale**2 * base, rel=1e-10)


def test_t_stat_affine_invariance():
    rng = np.random.default_rng(17)
    x = rng.standard_normal(500)
    base = t_stat(x, 0.2, 8, bartlett())
    a, c = 3.5, -2.0
    transformed = t_stat(a * x + c, a * 0.2 + c, 8, bartlett())
    assert transformed == pytest.approx(base, rel=1e-10)


def test_t_stat_zero_at_sample_mean():
    rng = np.random.default_rng(19)
    x = rng.standard_normal(300)
    assert t_stat(x, x.mean(), 10, bartlett()) == pytest.approx(0.0, abs=1e-12)


def test_t_stat_gaussian_tail_band():
    # classical regime: P(|T| > 1.96) approx 0.05 across replications
    n = 4096
    c_n = round(n ** (1.0 / 3.0))
    kernel = bartlett()
    z = 1.959963984540054
    count = 0
    reps = 2000
    for i in range(reps):
        x = np.random.default_rng(1000 + i).standard_normal(n)
        count += abs(t_stat(x, 0.0, c_n, kernel)) > z
    assert 0.035 <= count / reps <= 0.065


def test_t_stat_fixed_b_tail_band():
    # fixed-b regime on an AR(1) chain, Table-1 critical value
    from fixedb.chains import ar1_chain

    kernel = bartlett()
    n = 4096
    count = 0
    reps = 2000
    for i in range(reps):
        run = ar1_chain(0.5, n, 2000 + i)
        count += abs(t_stat(run.h_path, 0.0, n, kernel)) > 3.796
    assert 0.08 <= count / reps <= 0.12


def test_cn_rules():
    assert cn_from_rule(1000, "n") == 1000
    assert cn_from_rule(1000, "npow:0.5") == 32
    assert cn_from_rule(1000, "17") == 17
    with pytest.raises(DomainError):
        cn_from_rule(1000, "npow:1.5")
    with pytest.raises(DomainError):
        cn_from_rule(1000, "bogus")


def test_gamma_domain_errors():
    with pytest.raises(DomainError):
        gamma_n_sq([1.0, 2.0, 3.0], 0, bartlett())
    with pytest.raises(DomainError):
        gamma_n_sq([1.0, 2.0, 3.0], 4, bartlett())
    with pytest.raises(DomainError):
        gamma_n_sq([1.0], 1, bartlett())
