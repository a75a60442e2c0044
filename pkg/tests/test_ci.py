import numpy as np
import pytest

from fixedb.chains import ar1_chain
from fixedb.ci import ci_classical, ci_fixedb
from fixedb.exceptions import (
    DomainError,
    MissingTableRowError,
    NonStudentizableError,
)
from fixedb.kernels import bartlett, quadratic
from fixedb.lagwindow import gamma_n_sq


def test_normal_quantile_value():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(1000)
    interval = ci_classical(x, 8, bartlett(), level=0.95)
    assert interval.critical_value == pytest.approx(1.959964, abs=1e-5)
    assert interval.lower == interval.center - interval.halfwidth
    assert interval.upper == interval.center + interval.halfwidth


def test_constant_input_non_studentizable():
    with pytest.raises(NonStudentizableError):
        ci_classical(np.full(100, 1.5), 4, bartlett())


def test_classical_coverage_iid():
    kernel = bartlett()
    n = 10**4
    c_n = round(n ** (1.0 / 3.0))
    hits = 0
    reps = 2000
    for i in range(reps):
        x = np.random.default_rng(3000 + i).standard_normal(n)
        hits += ci_classical(x, c_n, kernel, 0.95).contains(0.0)
    assert 0.936 <= hits / reps <= 0.964


def test_translation_equivariance():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(512)
    base = ci_classical(x, 8, bartlett())
    shifted = ci_classical(x + 2.5, 8, bartlett())
    assert shifted.lower == pytest.approx(base.lower + 2.5, abs=1e-12)
    assert shifted.upper == pytest.approx(base.upper + 2.5, abs=1e-12)


def test_scale_equivariance():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(512)
    base = ci_classical(x, 8, bartlett())
    scaled = ci_classical(3.0 * x, 8, bartlett())
    assert scaled.halfwidth == pytest.approx(3.0 * base.halfwidth, rel=1e-10)


def test_monotone_in_level():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(512)
    hw95 = ci_classical(x, 8, bartlett(), 0.95).halfwidth
    hw99 = ci_classical(x, 8, bartlett(), 0.99).halfwidth
    assert hw99 > hw95


def test_classical_needs_small_cn():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(100)
    with pytest.raises(DomainError):
        ci_classical(x, 100, bartlett())
    with pytest.warns(UserWarning):
        ci_classical(x, 80, bartlett())


def test_fixedb_uses_table_value(default_tables):
    rng = np.random.default_rng(8)
    x = rng.standard_normal(1024)
    table = default_tables["bartlett"]
    interval = ci_fixedb(x, bartlett(), 0.95, table)
    # a 95% interval uses the tail-0.025 row
    assert interval.critical_value == table.lookup(0.025).critical_value
    assert interval.c_n == len(x)
    expected = interval.critical_value * np.sqrt(
        gamma_n_sq(x, len(x), bartlett()).gamma_sq / len(x))
    assert interval.halfwidth == pytest.approx(expected, rel=1e-12)
    interval90 = ci_fixedb(x, bartlett(), 0.90, table)
    assert interval90.critical_value == table.lookup(0.05).critical_value


def test_fixedb_errors(default_tables):
    rng = np.random.default_rng(9)
    x = rng.standard_normal(256)
    with pytest.raises(DomainError):
        ci_fixedb(x, quadratic(), 0.95, default_tables["bartlett"])
    with pytest.raises(MissingTableRowError):
        ci_fixedb(x, bartlett(), 0.5, default_tables["bartlett"])
    with pytest.raises(NonStudentizableError):
        ci_fixedb(np.full(128, 3.0), bartlett(), 0.95,
                  default_tables["bartlett"])


def test_fixedb_wider_than_classical_in_median(default_tables):
    # on the same i.i.d. data the fixed-b interval is typically wider
    kernel = bartlett()
    table = default_tables["bartlett"]
    ratio = []
    for i in range(500):
        x = np.random.default_rng(4000 + i).standard_normal(512)
        hw_fb = ci_fixedb(x, kernel, 0.95, table).halfwidth
        hw_cl = ci_classical(x, 8, kernel, 0.95).halfwidth
        ratio.append(hw_fb / hw_cl)
    assert np.median(ratio) > 1.0


def test_fixedb_coverage_ar1(default_tables):
    kernel = bartlett()
    table = default_tables["bartlett"]
    n = 2**14
    hits = 0
    reps = 500
    for i in range(reps):
        run = ar1_chain(0.9, n, 5000 + i)
        hits += ci_fixedb(run.h_path, kernel, 0.95, table).contains(0.0)
    assert 0.91 <= hits / reps <= 0.985


def test_level_validation():
    rng = np.random.default_rng(10)
    x = rng.standard_normal(128)
    with pytest.raises(DomainError):
        ci_classical(x, 4, bartlett(), level=1.2)
