import numpy as np
import pytest

from synvolution import registry  # noqa: F401  (fills REGISTRY)
from synvolution.gradcheck import REGISTRY, broken_vjp, check_gradient, sweep
from synvolution.numeric import Rng


EXPECTED = {"matmul", "hadamard", "pscan", "dhhp_forward", "dhhp_inverse", "siren", "eigenphase", "kpm_eval",
            "kpl", "synvolution", "kernelution", "gffn", "post_scale_norm", "gru", "cross_entropy",
            "self_attention", "converter_forward"}


def test_registry_covers_required_ops():
    assert EXPECTED <= set(REGISTRY)


@pytest.mark.parametrize("name", sorted(EXPECTED - {"converter_forward"}))
def test_op_passes(name):
    for variant in range(REGISTRY[name].n_shapes):
        inputs = REGISTRY[name].make_inputs(Rng(variant), variant)
        report = check_gradient(name, inputs, tol=1e-5, seed=variant)
        assert report.passed, report.max_rel_error


def test_matmul_tight_tolerance():
    inputs = REGISTRY["matmul"].make_inputs(Rng(0), 0)
    assert check_gradient("matmul", inputs, tol=1e-6).passed


def test_gffn_zero_input_variant():
    inputs = REGISTRY["gffn"].make_inputs(Rng(0), 1)
    assert np.all(inputs["Z"] == 0)
    assert check_gradient("gffn", inputs).passed


def test_broken_vjp_is_detected():
    with broken_vjp("mul"):
        report = check_gradient("hadamard", REGISTRY["hadamard"].make_inputs(Rng(0), 0))
    assert not report.passed
    # the patch is undone afterwards
    assert check_gradient("hadamard", REGISTRY["hadamard"].make_inputs(Rng(0), 0)).passed


def test_sweep_reports_each_op_once():
    results = sweep(names=["kpl", "matmul"])
    assert list(results) == ["kpl", "matmul"]
    assert all(len(r) == 3 for r in results.values())


def test_unknown_op():
    with pytest.raises(KeyError):
        check_gradient("nope", {})
