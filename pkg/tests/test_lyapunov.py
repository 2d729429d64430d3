import numpy as np
import pytest

from sddc.analysis.lyapunov import (
    REFERENCE_P,
    MlfCertificate,
    comparison_constant,
    compare_with_reference,
    decay_rate,
    falsify_mlf,
    reference_certificate,
    safety_threshold,
    verify_mlf,
)
from sddc.exceptions import CertificateError, InfeasibleParameterError
from sddc.model.plant import CallableSwitchedPlant


def test_dc_motor_recomputed_certificate(recomputed):
    assert recomputed.rho == 1.0
    assert recomputed.lambda1 == pytest.approx(0.08470, abs=5e-5)
    assert recomputed.lambda0 == pytest.approx(1.02204, abs=5e-5)
    assert recomputed.source == "recomputed"
    assert 0 < recomputed.alpha1_coeff < recomputed.alpha2_coeff
    assert recomputed.alpha1(2.0) == pytest.approx(4.0 * recomputed.alpha1_coeff)


def test_reference_certificate(reference):
    np.testing.assert_allclose(reference.P0, REFERENCE_P)
    assert (reference.lambda0, reference.lambda1, reference.rho) == (1.03, 0.1, 1.0)
    assert reference.source == "reference"


def test_threshold_values(reference):
    assert safety_threshold(reference) == pytest.approx(0.9677, abs=1e-4)
    assert safety_threshold(reference, 0.7) == pytest.approx(0.6 / 0.93)


@pytest.mark.parametrize("eta", [0.05, 0.1, 1.0, 1.2])
def test_infeasible_rate(reference, eta):
    with pytest.raises(InfeasibleParameterError) as info:
        safety_threshold(reference, eta)
    assert "convergence rate infeasible" in info.value.message


def test_threshold_needs_ordered_rates(reference):
    swapped = reference.with_values(lambda0=0.5, lambda1=0.9)
    with pytest.raises(InfeasibleParameterError):
        safety_threshold(swapped)


def test_condition_rho_min_lambda(reference):
    with pytest.raises(CertificateError):
        reference.with_values(lambda0=1.2, lambda1=1.1)
    with pytest.raises(CertificateError):
        reference.with_values(rho=0.9)


def test_not_positive_definite(plant):
    with pytest.raises(CertificateError):
        verify_mlf(plant, [[1.0, 0.0], [0.0, -1.0]], np.eye(2))
    with pytest.raises(CertificateError):
        verify_mlf(plant, [[1.0, 0.5], [0.0, 1.0]], np.eye(2))


def test_nonlinear_plant_needs_falsification():
    plant = CallableSwitchedPlant(1, lambda z, w: z, lambda z, w: z)
    with pytest.raises(CertificateError):
        verify_mlf(plant, np.eye(1), np.eye(1))


def test_decay_rate_and_comparison_constant():
    assert decay_rate(0.5 * np.eye(2), np.eye(2)) == pytest.approx(0.25)
    P = np.array(REFERENCE_P)
    assert comparison_constant(P, P) == 1.0
    assert comparison_constant(2.0 * P, P) == pytest.approx(2.0)
    assert comparison_constant(P, 3.0 * P) == pytest.approx(3.0)


def test_distinct_matrices_give_rho_above_one(plant):
    cert = verify_mlf(plant, np.array(REFERENCE_P), np.diag([6.0, 0.05]))
    assert cert.rho > 1.0


def test_compare_with_reference_flags_deviation(recomputed, reference):
    report = compare_with_reference(recomputed, reference)
    assert report["tolerance"] == 0.005
    assert report["parameters"]["rho"]["within_tolerance"]
    assert not report["parameters"]["lambda1"]["within_tolerance"]
    assert not report["parameters"]["lambda0"]["within_tolerance"]
    assert report["parameters"]["lambda1"]["deviation"] == pytest.approx(0.1 - 0.08470, abs=5e-5)
    assert report["parameters"]["lambda0"]["deviation"] == pytest.approx(1.03 - 1.02204, abs=5e-5)
    assert not report["within_tolerance"]


def test_compare_with_reference_within_tolerance(reference):
    close = reference.with_values(lambda0=1.032, lambda1=0.098, source="recomputed")
    report = compare_with_reference(close, reference)
    assert report["within_tolerance"]
    assert report["parameters"]["lambda0"]["deviation"] == pytest.approx(0.002)


def test_mapping_roundtrip(reference):
    rebuilt = MlfCertificate.from_mapping(reference.to_mapping())
    assert rebuilt.lambda0 == reference.lambda0
    assert rebuilt.chi_coeff == reference.chi_coeff
    assert rebuilt.source == "explicit"


def test_falsification_accepts_verified_constants(zero_input_plant):
    P = np.array(REFERENCE_P)
    cert = verify_mlf(zero_input_plant, P, P)
    rng = np.random.default_rng(5)
    samples = np.hstack([rng.uniform(-1, 1, size=(200, 2)), np.zeros((200, 2))])
    report = falsify_mlf(zero_input_plant, P, P, cert.lambda0, cert.lambda1, cert.rho, samples)
    assert report.checked == 200
    assert not report.falsified


def test_falsification_finds_too_small_rate(zero_input_plant):
    P = np.array(REFERENCE_P)
    samples = [[1.0, 0.0, 0.0, 0.0]]
    report = falsify_mlf(zero_input_plant, P, P, 1.03, 0.05, 1.0, samples)
    assert report.falsified
    assert report.violations[0]["condition"] == "decay"
    assert report.violations[0]["mode"] == 1


def test_reference_certificate_custom_matrix():
    cert = reference_certificate(np.eye(2))
    assert cert.lambda1 == 0.1
    np.testing.assert_array_equal(cert.P1, np.eye(2))
