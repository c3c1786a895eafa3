import numpy as np
import pytest

from synvolution.numeric import DomainError, Rng
from synvolution.spectral import SirenParams, eigenphase, init_siren, siren_forward, unit_eigenvalues


def test_zero_input_zero_bias_gives_zero():
    p = init_siren(4, 6, Rng(0))
    p.b1[:] = 0
    p.b2[:] = 0
    np.testing.assert_array_equal(siren_forward(p, np.zeros((3, 4))), 0.0)
    np.testing.assert_array_equal(eigenphase(p, np.zeros((3, 4))), 0.0)


def test_output_range_and_constant_rows():
    p = init_siren(4, 6, Rng(1))
    X = Rng(2).normal((10, 4), 5.0)
    out = siren_forward(p, X)
    assert np.all(np.abs(out) <= 1)
    lam = eigenphase(p, np.tile(X[:1], (5, 1)))
    np.testing.assert_array_equal(lam, lam[0])


def test_eigenphase_matches_row_mean_loop():
    p = init_siren(3, 5, Rng(3))
    X = Rng(4).normal((2, 6, 3))
    S = siren_forward(p, X)
    lam = eigenphase(p, X)
    for b in range(2):
        for n in range(6):
            assert abs(lam[b, n] - sum(S[b, n]) / 5) < 1e-12


def test_siren_formula():
    rng = Rng(5)
    p = SirenParams(rng.normal((2, 3)), rng.normal(3), rng.normal((3, 3)), rng.normal(3), omega0=2.0, omega1=0.5)
    X = rng.normal((4, 2))
    ref = np.sin(0.5 * (np.sin(2.0 * (X @ p.W1 + p.b1)) @ p.W2 + p.b2))
    np.testing.assert_allclose(siren_forward(p, X), ref, atol=1e-15)


def test_siren_rejects_complex_and_bad_frequency():
    p = init_siren(2, 3, Rng(0))
    with pytest.raises(DomainError):
        siren_forward(p, np.zeros((2, 2), complex))
    with pytest.raises(ValueError):
        SirenParams(p.W1, p.b1, p.W2, p.b2, omega0=0.0)


def test_unit_eigenvalues():
    np.testing.assert_array_equal(unit_eigenvalues(np.zeros(3)), 1.0)
    np.testing.assert_allclose(unit_eigenvalues(np.ones(2)), -1.0, atol=1e-15)
    lam = Rng(0).uniform(-1, 1, 100)
    assert np.max(np.abs(np.abs(unit_eigenvalues(lam)) - 1)) < 1e-14
    with pytest.raises(DomainError):
        unit_eigenvalues(np.array([1.5]))
