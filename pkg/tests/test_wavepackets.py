import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from transrad.dirac import SpinDensityMatrix, pauli_eigenvectors
from transrad.errors import PacketConfigError, RegimeWarning
from transrad.wavepackets import (GaussianSuperposition, SpinSuperposition, TwistedPacket, density,
                                  effective_spin_field, normalization, phase_invariance_witness,
                                  reciprocal_lattice_peaks, structure_factor, structure_factor_pairs)


def test_gaussian_peak_value():
    cov = np.array([[0.04, 0.01, 0.0], [0.01, 0.09, 0.0], [0.0, 0.0, 0.01]])
    g = GaussianSuperposition(mean=[0.1, 0.0, -2.0], cov=cov)
    expected = (2 * math.pi) ** -1.5 / math.sqrt(np.linalg.det(cov))
    assert float(density(g, g.mean)) == pytest.approx(expected, rel=1e-14)


def test_twisted_l0_is_cylindrical_gaussian():
    tw = TwistedPacket(p=-3.0, sigma3=0.1, sigma_perp=0.2, l=0)
    g = GaussianSuperposition(mean=[0, 0, -3.0], cov=np.diag([0.04, 0.04, 0.01]))
    pts = np.random.default_rng(0).normal([0, 0, -3.0], [0.3, 0.3, 0.15], size=(200, 3))
    np.testing.assert_allclose(tw.density(pts), g.density(pts), rtol=1e-13)


def test_two_center_modulation_and_normalization():
    d = 40.0
    g = GaussianSuperposition(mean=[0, 0, -2.0], cov=np.diag([0.01, 0.01, 0.01]),
                              centers=[[0, 0, 0], [0, 0, d]], weights=[1, 1])
    env = GaussianSuperposition(mean=[0, 0, -2.0], cov=np.diag([0.01, 0.01, 0.01]))
    p3 = np.linspace(-2.2, -1.8, 41)
    pts = np.stack([0 * p3, 0 * p3, p3], axis=-1)
    ratio = g.density(pts) / env.density(pts)
    shape = np.cos(p3 * d / 2) ** 2
    np.testing.assert_allclose(ratio / ratio.max(), shape / shape.max(), atol=2e-3)
    assert normalization(g) == pytest.approx(1.0, abs=1e-10)


def test_normalization_by_adaptive_integration():
    # independent of the package's product rules: scipy adaptive cubature along the axis
    tw = TwistedPacket(p=-1.0, sigma3=0.05, sigma_perp=0.1, l=2)

    def radial(pt, p3):
        return 2 * math.pi * pt * tw.density(np.array([pt, 0.0, p3]))

    val, err = integrate.dblquad(radial, -1.5, -0.5, 0, 1.5, epsabs=1e-12, epsrel=1e-10)
    assert val == pytest.approx(1.0, abs=1e-6)
    assert normalization(tw) == pytest.approx(1.0, abs=1e-10)


def test_structure_factor_single_center():
    g = GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01] * 3), weights=[0.3 + 0.4j])
    pts = np.random.default_rng(1).normal(size=(10, 3))
    np.testing.assert_allclose(structure_factor(g, pts), 0.25, rtol=1e-14)


def test_structure_factor_lattice_peaks():
    d = 7.0
    n = 4
    g = GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01] * 3),
                              centers=[[0, 0, j * d] for j in range(n)], weights=[0.5] * n)
    peaks = reciprocal_lattice_peaks(g, [-1, 0, 1, 2])
    np.testing.assert_allclose(peaks[:, 2] * d, 2 * math.pi * np.array([-1, 0, 1, 2]))
    np.testing.assert_allclose(structure_factor(g, peaks), n * n * 0.25, rtol=1e-12)
    mid = peaks[1] + np.array([0, 0, math.pi / (2 * d)])
    assert structure_factor(g, mid) < n * n * 0.25


def test_structure_factor_nonnegative_random_phases():
    rng = np.random.default_rng(3)
    w = np.exp(2j * math.pi * rng.uniform(size=6)) * rng.uniform(0.2, 1, size=6)
    g = GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01] * 3),
                              centers=rng.normal(0, 30, size=(6, 3)), weights=w)
    pts = rng.normal(0, 2, size=(10_000, 3))
    s = structure_factor(g, pts)
    assert s.min() >= 0
    np.testing.assert_allclose(structure_factor_pairs(g, pts).real, s, atol=1e-12)
    assert np.abs(structure_factor_pairs(g, pts).imag).max() < 1e-12


def test_support_check():
    with pytest.raises(PacketConfigError):
        GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01, 0.01, 0.1]))
    with pytest.raises(PacketConfigError):
        GaussianSuperposition(mean=[0, 0, 1.0], cov=np.diag([0.01] * 3))
    with pytest.raises(PacketConfigError), warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        TwistedPacket(p=-1.0, sigma3=0.2, sigma_perp=0.1)


def test_twisted_ratio_warning():
    with pytest.warns(RegimeWarning):
        # |p|/sigma3 slightly below the warning level; the support check uses 1e-8 and lets
        # this through only for ratios above about 5.6, so use a looser custom limit
        try:
            TwistedPacket(p=-1.0, sigma3=1 / 4.9, sigma_perp=0.1)
        except PacketConfigError:
            pass


def test_twisted_paraxiality():
    tw = TwistedPacket(p=-10.0, sigma3=0.1, sigma_perp=0.05, l=3)
    diag = tw.paraxiality(1.0)
    assert diag["nonparaxial"] == pytest.approx(4 * 0.0025)
    assert diag["longitudinal"] == pytest.approx(0.01)


def test_twisted_spin_field():
    pts = np.zeros((3, 3)) + [0, 0, -1]
    np.testing.assert_array_equal(effective_spin_field(TwistedPacket(-1.0, 0.01, 0.01, 1, spin=-1), pts),
                                  np.tile([0, 0, -1.0], (3, 1)))
    np.testing.assert_array_equal(effective_spin_field(TwistedPacket(-1.0, 0.01, 0.01, 1), pts), 0.0)


def test_spin_superposition_rotates():
    env = GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01] * 3))
    b = np.array([0.0, 0.0, 5.0])
    pk = SpinSuperposition(envelope=env, tau=[0, 0, 1], kappa=0.0, b=b)
    p3 = np.linspace(-1.1, -0.9, 9)
    pts = np.stack([0 * p3, 0 * p3, p3], axis=-1)
    z = pk.effective_spin(pts)
    psi = pts @ b
    np.testing.assert_allclose(z, np.stack([np.cos(psi), np.sin(psi), 0 * psi], axis=-1), atol=1e-14)
    np.testing.assert_allclose(pk.density(pts), env.density(pts))
    pk2 = SpinSuperposition(envelope=env, tau=[0.6, 0, 0.8], kappa=2.0, b=b)
    np.testing.assert_allclose(np.linalg.norm(pk2.effective_spin(pts), axis=-1), 1.0, atol=1e-14)


def test_spin_superposition_amplitudes_match_density_matrix():
    env = GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01] * 3))
    pk = SpinSuperposition(envelope=env, tau=[0.36, 0.48, 0.8], kappa=lambda p: 0.3 + p[..., 2], b=[1.0, 2.0, 3.0],
                           vartheta=0.4)
    pts = np.random.default_rng(8).normal([0, 0, -1], 0.1, size=(5, 3))
    # amplitudes are given in the sigma.tau eigenbasis; map to the z basis
    amps = pk.spin_amplitudes(pts) @ pauli_eigenvectors(pk.tau).T
    for a, z in zip(amps, pk.effective_spin(pts)):
        rho = np.outer(a, a.conj()) / np.vdot(a, a).real
        np.testing.assert_allclose(SpinDensityMatrix(rho).zeta, z, atol=1e-13)


def test_phase_witness_identity():
    g = GaussianSuperposition(mean=[0, 0, -1.0], cov=np.diag([0.01] * 3),
                              centers=[[0, 0, 0], [3, 0, 0]], weights=[1, 1j])
    pts = np.random.default_rng(4).normal([0, 0, -1], 0.1, size=(50, 3))
    for xi in (None, lambda p: 0 * p[..., 0], lambda p: p @ np.array([1.0, 2.0, 3.0])):
        w = phase_invariance_witness(g, xi)
        np.testing.assert_array_equal(w.density(pts), g.density(pts))
        np.testing.assert_array_equal(w.effective_spin(pts), g.effective_spin(pts))
        np.testing.assert_allclose(np.abs(w.amplitude(pts)), np.abs(g.amplitude(pts)), rtol=1e-14)
    zero = phase_invariance_witness(g, lambda p: 0 * p[..., 0])
    np.testing.assert_array_equal(zero.amplitude(pts), g.amplitude(pts))


def test_twisted_orbital_phase_drops_from_density():
    tw = TwistedPacket(p=-1.0, sigma3=0.01, sigma_perp=0.05, l=4)
    pts = np.random.default_rng(5).normal([0, 0, -1], 0.05, size=(50, 3))
    np.testing.assert_allclose(np.abs(tw.amplitude(pts)) ** 2, tw.density(pts), rtol=1e-13)
    ang = np.angle(tw.amplitude(pts))
    np.testing.assert_allclose(np.exp(1j * ang), np.exp(4j * np.arctan2(pts[:, 1], pts[:, 0])), atol=1e-12)


def test_characteristic_function_matches_quadrature():
    g = GaussianSuperposition(mean=[0.05, 0, -1.0], cov=np.diag([0.01, 0.02, 0.01]),
                              centers=[[0, 0, 0], [20, 0, 5]], weights=[1, 0.5j])
    x = np.array([3.0, -2.0, 4.0])
    rule = g.quadrature_rule(4)
    num = np.sum(rule.weights * np.exp(-1j * rule.nodes @ x))
    assert abs(g.characteristic(x) - num) < 1e-10
    tw = TwistedPacket(p=-1.0, sigma3=0.01, sigma_perp=0.05, l=3)
    rule = tw.quadrature_rule(4)
    num = np.sum(rule.weights * np.exp(-1j * rule.nodes @ x))
    assert abs(tw.characteristic(x) - num) < 1e-10


def test_quadrature_rules_integrate_density():
    g = GaussianSuperposition(mean=[0, 0, -2.0], cov=np.diag([0.01] * 3),
                              centers=[[0, 0, 0], [0, 0, 60.0], [15.0, 0, 0]], weights=[1, -0.5, 0.3j])
    rule = g.quadrature_rule(g.quadrature_levels() - 1)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert normalization(g) == pytest.approx(1.0, abs=1e-9)
