import json

import numpy as np
import pytest

from fixedb.exceptions import DomainError, KernelNotPositiveDefiniteError
from fixedb.kernels import custom_kernel
from fixedb.mercer import (
    MercerDecomposition,
    nystrom_decompose,
    nystrom_nodes,
    positive_definiteness_report,
)


def test_quadratic_single_eigenvalue(quadratic_kernel):
    decomp = nystrom_decompose(quadratic_kernel, m=500)
    assert decomp.n_retained == 1
    assert abs(decomp.eigenvalues[0] - 1.0 / 6.0) <= 1e-4


def test_quadratic_rank_one(quadratic_kernel):
    # second-largest positive eigenvalue of the grid matrix is numerically 0
    mat = quadratic_kernel.rho_star_grid(nystrom_nodes(500)) / 500
    vals = np.sort(np.linalg.eigvalsh(mat))[::-1]
    assert vals[1] <= 1e-6


def test_quadratic_eigenfunction_shape(quadratic_kernel):
    decomp = nystrom_decompose(quadratic_kernel, m=500)
    phi = decomp.eigenfunctions[0]
    target = nystrom_nodes(500) - 0.5
    target = target / np.sqrt(np.mean(target**2))
    assert np.max(np.abs(phi - target)) <= 1e-6


def test_bartlett_trace_identity(bartlett_kernel):
    decomp = nystrom_decompose(bartlett_kernel, m=500, trace_fraction=1.0)
    assert abs(decomp.eigenvalues.sum() - 1.0 / 3.0) <= 1e-3


def test_retained_sum_bounded(bartlett_kernel):
    decomp = nystrom_decompose(bartlett_kernel, m=1000)
    assert decomp.eigenvalues.sum() <= (1.0 - bartlett_kernel.integral_g()) + 1e-6
    assert np.all(np.diff(decomp.eigenvalues) <= 0.0)
    assert np.all(decomp.eigenvalues > 1e-10)


def test_kept_trace_fraction(bartlett_kernel):
    decomp = nystrom_decompose(bartlett_kernel, m=500, trace_fraction=0.995)
    assert 0.995 <= decomp.kept_trace_fraction <= 1.0


def test_constant_vector_in_null_space(bartlett_kernel, quadratic_kernel):
    for kernel in (bartlett_kernel, quadratic_kernel):
        for m in (500, 1000):
            mat = kernel.rho_star_grid(nystrom_nodes(m)) / m
            assert np.max(np.abs(mat @ np.ones(m))) <= 1e-6


def test_orthonormality(bartlett_kernel):
    decomp = nystrom_decompose(bartlett_kernel, m=500)
    funcs = decomp.eigenfunctions
    gram = funcs @ funcs.T / decomp.m
    assert np.max(np.abs(gram - np.eye(len(funcs)))) <= 1e-8


def test_eigenvalue_convergence_in_m(bartlett_kernel, quadratic_kernel):
    for kernel in (bartlett_kernel, quadratic_kernel):
        lam250 = nystrom_decompose(kernel, m=250).eigenvalues[0]
        lam1000 = nystrom_decompose(kernel, m=1000).eigenvalues[0]
        assert abs(lam250 - lam1000) <= 1e-3


def test_positive_definiteness_reports(bartlett_kernel, quadratic_kernel):
    assert positive_definiteness_report(bartlett_kernel, 300).passed
    assert positive_definiteness_report(quadratic_kernel, 300).passed


def test_non_psd_kernel_flagged():
    # a pure cosine of the difference is always positive semidefinite (sum
    # of products by the addition formula), so modulate a polynomial taper
    # to get a genuinely indefinite kernel
    wobble = custom_kernel(lambda u: (1.0 - u**2) * np.cos(3 * np.pi * u),
                           check_range=False)
    report = positive_definiteness_report(wobble, 300)
    assert not report.passed
    assert report.min_eigenvalue < -1e-8
    with pytest.raises(KernelNotPositiveDefiniteError):
        nystrom_decompose(wobble, m=300)


def test_preconditions(bartlett_kernel):
    with pytest.raises(DomainError):
        nystrom_decompose(bartlett_kernel, m=10)
    with pytest.raises(DomainError):
        nystrom_decompose(bartlett_kernel, m=100, trace_fraction=0.5)
    with pytest.raises(DomainError):
        positive_definiteness_report(bartlett_kernel, m=10)


def test_json_round_trip(quadratic_kernel):
    decomp = nystrom_decompose(quadratic_kernel, m=200)
    doc = json.loads(decomp.to_json())
    assert doc["kernel_id"] == "quadratic"
    back = MercerDecomposition.from_json(decomp.to_json())
    assert back.m == decomp.m
    assert np.allclose(back.eigenvalues, decomp.eigenvalues)
    assert back.kept_trace_fraction == decomp.kept_trace_fraction
