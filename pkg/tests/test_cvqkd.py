import math

import numpy as np
import pytest

from app.core.exceptions import InvalidCovarianceError
from app.models.results import ChannelPoint, TwoModeCM
from app.models.schemas import Detection
from app.services.bounds import plob
from app.services.cvqkd import (
    asymptotic_rate,
    asymptotic_rate_het_limit,
    asymptotic_rate_hom_limit,
    cm_det_sqrt,
    holevo_bound,
    mutual_info,
    symplectic_eigenvalues,
    two_mode_cm,
)

OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _brute_force_eigenvalues(cm: TwoModeCM):
    """Symplectic spectrum from the Hermitian form i V^1/2 Omega V^1/2."""
    z = np.diag([1.0, -1.0])
    v = np.block([[cm.a * np.eye(2), cm.c * z], [cm.c * z, cm.b * np.eye(2)]])
    w, q = np.linalg.eigh(v)
    root = q @ np.diag(np.sqrt(w)) @ q.T
    spectrum = np.linalg.eigvalsh(1j * root @ OMEGA @ root)
    positive = np.sort(spectrum[spectrum > 0])
    return positive[1], positive[0]


def test_mutual_information():
    assert mutual_info(ChannelPoint(tau=0.0, n_bar=0.0, mu=10.0), Detection.HOM) == 0.0
    assert mutual_info(ChannelPoint(tau=0.5, n_bar=0.0, mu=1.0), Detection.HET) == 0.0
    assert mutual_info(ChannelPoint(tau=1.0, n_bar=0.0, mu=3.0), Detection.HOM) == pytest.approx(0.5 * math.log2(3.0))


def test_vacuum_and_pure_states():
    assert symplectic_eigenvalues(TwoModeCM(a=1.0, b=1.0, c=0.0)) == pytest.approx((1.0, 1.0))
    mu = 7.0
    assert symplectic_eigenvalues(TwoModeCM(a=mu, b=mu, c=math.sqrt(mu ** 2 - 1.0))) == pytest.approx((1.0, 1.0))


def test_unphysical_matrix_rejected():
    with pytest.raises(InvalidCovarianceError):
        symplectic_eigenvalues(TwoModeCM(a=1.0, b=1.0, c=2.0))


def test_symplectic_oracle_on_random_states():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        point = ChannelPoint(tau=rng.uniform(0.01, 0.99), n_bar=rng.uniform(0.0, 0.5), mu=rng.uniform(1.0, 50.0))
        cm = two_mode_cm(point)
        nu_plus, nu_minus = symplectic_eigenvalues(cm, det_sqrt=cm_det_sqrt(point))
        ref_plus, ref_minus = _brute_force_eigenvalues(cm)
        assert abs(nu_plus - ref_plus) < 1e-10
        assert abs(nu_minus - ref_minus) < 1e-10
        assert nu_minus >= 1.0 - 1e-12


def test_holevo_limits():
    assert holevo_bound(ChannelPoint(tau=1.0 - 1e-9, n_bar=0.0, mu=10.0), Detection.HOM) < 1e-6
    assert holevo_bound(ChannelPoint(tau=0.5, n_bar=0.0, mu=1.0), Detection.HET) == pytest.approx(0.0, abs=1e-12)


def test_large_modulation_eigenvalues():
    tau, n_bar, mu = 0.4, 0.01, 1e5
    point = ChannelPoint(tau=tau, n_bar=n_bar, mu=mu)
    nu_plus, nu_minus = symplectic_eigenvalues(two_mode_cm(point), det_sqrt=cm_det_sqrt(point))
    assert nu_plus == pytest.approx((1.0 - tau) * mu, rel=0.01)
    assert nu_minus == pytest.approx(1.0 + 2.0 * n_bar / (1.0 - tau), rel=0.01)


@pytest.mark.parametrize("tau,n_bar", [(0.4, 0.0), (0.4, 0.01), (0.8, 0.001)])
def test_large_modulation_closed_forms(tau, n_bar):
    point = ChannelPoint(tau=tau, n_bar=n_bar, mu=1e5)
    hom = asymptotic_rate(point, 1.0, Detection.HOM)
    het = asymptotic_rate(point, 1.0, Detection.HET)
    assert hom == pytest.approx(asymptotic_rate_hom_limit(tau, n_bar), rel=0.01)
    assert het == pytest.approx(asymptotic_rate_het_limit(tau, n_bar), rel=0.01)


def test_pure_loss_homodyne_limit_is_below_plob():
    assert asymptotic_rate_hom_limit(0.4, 0.0) < plob(0.4)


def test_zero_reconciliation_is_clamped():
    assert asymptotic_rate(ChannelPoint(tau=0.4, n_bar=0.01, mu=20.0), 0.0, Detection.HET) == 0.0


def test_rate_decreases_with_noise():
    rates = [
        asymptotic_rate(ChannelPoint(tau=0.4, n_bar=n, mu=20.0), 0.98, Detection.HET)
        for n in [0.0, 1e-3, 1e-2, 5e-2, 0.1]
    ]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
