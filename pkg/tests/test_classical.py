import math
import warnings

import numpy as np
import pytest

from transrad import radiation as rad
from transrad.classical import (BunchMember, classical_amplitude, exclusive_vs_inclusive_report, form_factor,
                                n_particle_probability, packet_overlap)
from transrad.dirac import SpinDensityMatrix
from transrad.errors import AccuracyWarning, OverlapViolation, RegimeViolation, RegimeWarning
from transrad.kinematics import ParticleParams, PhotonKinematics, build_polarization
from transrad.wavepackets import GaussianSuperposition, TwistedPacket

PROTON = ParticleParams.charged(1.0, 0.3, 1.79)
P3 = -1.0
K0 = 1e-3 * P3 ** 2 / math.hypot(1.0, P3)  # recoil chi = 1e-3


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        warnings.simplefilter("ignore", AccuracyWarning)
        yield


def _packet(s=0.02, zeta=(0.6, 0.0, 0.8)):
    return GaussianSuperposition(mean=[0.0, 0.0, P3], cov=np.diag([s * s] * 3),
                                 spin=SpinDensityMatrix.from_zeta(list(zeta)))


def _setup(mode="in-plane", theta=0.6, phi=0.2):
    photon = PhotonKinematics(K0, theta, phi)
    return photon, build_polarization(photon, mode)


def test_translation_multiplies_by_plane_wave_phase():
    photon, pol = _setup()
    pk = _packet()
    a0 = classical_amplitude(pk, photon, pol, PROTON)
    b = np.array([120.0, -40.0, 300.0])
    a1 = classical_amplitude(pk, photon, pol, PROTON, position=b)
    assert a1.amplitude == pytest.approx(a0.amplitude * np.exp(-1j * a0.k_transfer @ b), rel=1e-13)
    assert a1.probability == pytest.approx(a0.probability, rel=1e-13)
    np.testing.assert_allclose(a0.k_transfer[:2], photon.k[:2])


def test_gaussian_form_factor_matches_quadrature():
    pk = GaussianSuperposition(mean=[0.01, 0.0, P3], cov=np.diag([4e-4, 2e-4, 3e-4]),
                               centers=[[0, 0, 0], [30.0, 0, 10.0]], weights=[1.0, 0.5j])
    kt = np.array([0.004, -0.002, -0.01])
    rule = pk.quadrature_rule(pk.quadrature_levels() - 1)
    dens = pk.density(rule.nodes)
    num = np.sum(rule.weights * pk.amplitude(rule.nodes - kt).conj() * pk.amplitude(rule.nodes) / dens)
    assert abs(form_factor(pk, kt) - num) < 1e-8
    assert form_factor(pk, np.zeros(3)) == pytest.approx(1.0, abs=1e-12)


def test_zero_couplings_give_zero_amplitude():
    photon, pol = _setup()
    assert classical_amplitude(_packet(), photon, pol, ParticleParams(mass=1.0)).amplitude == 0


def test_unpolarized_orthogonal_amplitude_vanishes_at_normal_incidence():
    photon, pol = _setup("orthogonal")
    pk = GaussianSuperposition(mean=[0.0, 0.0, P3], cov=np.diag([4e-4] * 3))
    scale = abs(classical_amplitude(_packet(), photon, pol, PROTON).amplitude)
    assert scale > 0
    assert abs(classical_amplitude(pk, photon, pol, PROTON).amplitude) < 1e-12 * scale


def test_single_packet_total_is_quantum():
    photon, pol = _setup()
    pk = _packet()
    res = n_particle_probability([BunchMember(pk)], photon, pol, PROTON)
    q = rad.probability(pk, photon, pol, PROTON).value
    assert res.total == pytest.approx(q, rel=1e-14)
    assert res.coherent_classical == pytest.approx(res.incoherent_classical_subtraction, rel=1e-14)


def test_opposite_phase_pair_cancels_coherently():
    photon, pol = _setup()
    pk = _packet()
    kt = classical_amplitude(pk, photon, pol, PROTON).k_transfer
    # k_transfer . b = 201 pi with |b| far beyond the packet size
    b = 201 * math.pi * kt / (kt @ kt)
    res = n_particle_probability([BunchMember(pk), BunchMember(pk, b)], photon, pol, PROTON)
    assert res.coherent_classical < 1e-20 * res.incoherent_classical_subtraction
    assert res.total == pytest.approx(res.incoherent_quantum - res.incoherent_classical_subtraction, rel=1e-12)


def test_overlapping_packets_rejected():
    photon, pol = _setup()
    pk = _packet()
    assert packet_overlap(BunchMember(pk), BunchMember(pk)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(OverlapViolation):
        n_particle_probability([BunchMember(pk), BunchMember(pk, (10.0, 0, 0))], photon, pol, PROTON)


def test_wide_packet_rejected():
    photon, pol = _setup()
    with pytest.raises(RegimeViolation):
        classical_amplitude(_packet(s=0.06), photon, pol, PROTON)


@pytest.mark.parametrize("mode", ["in-plane", "orthogonal", "helicity+", "helicity-"])
@pytest.mark.parametrize("theta", [0.3, 1.0])
def test_exclusive_not_above_inclusive(mode, theta):
    photon, pol = _setup(mode, theta)
    rep = exclusive_vs_inclusive_report(_packet(), photon, pol, PROTON, rtol=1e-8)
    assert rep.consistent
    assert rep.exclusive <= rep.inclusive * (1 + rep.tolerance)


@pytest.mark.parametrize("mode", ["in-plane", "helicity+"])
@pytest.mark.parametrize("theta", [0.3, 1.0])
def test_exclusive_approaches_inclusive_at_small_recoil(mode, theta):
    photon, pol = _setup(mode, theta)
    rep = exclusive_vs_inclusive_report(_packet(), photon, pol, PROTON, rtol=1e-8)
    assert abs(rep.ratio - 1) < 1e-2


def test_twisted_exclusive_is_flagged():
    photon, pol = _setup()
    tw = TwistedPacket(p=P3, sigma3=0.01, sigma_perp=0.01, l=10)
    rep = exclusive_vs_inclusive_report(tw, photon, pol, PROTON)
    assert any("l=10" in f for f in rep.flags)
    assert not exclusive_vs_inclusive_report(_packet(), photon, pol, PROTON).flags


def test_coherent_term_bounds_and_translation_invariance():
    photon, pol = _setup("helicity+")
    pk = _packet()
    rng = np.random.default_rng(21)
    pos = rng.uniform(-5e3, 5e3, size=(5, 3))
    res = n_particle_probability([BunchMember(pk, b) for b in pos], photon, pol, PROTON)
    n = len(pos)
    assert res.coherent_classical <= n * res.incoherent_classical_subtraction * (1 + 1e-12)
    assert res.coherent_classical <= math.fsum(abs(a) for a in res.amplitudes) ** 2 * (1 + 1e-12)
    shift = np.array([1234.5, -77.0, 9.0])
    moved = n_particle_probability([BunchMember(pk, b + shift) for b in pos], photon, pol, PROTON)
    assert moved.total == pytest.approx(res.total, rel=1e-10)
    assert "neglected" in res.exchange_term
