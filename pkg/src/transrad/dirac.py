"""Explicit 4x4 Dirac algebra and an independent evaluation of the vertex tensor.

Everything here is done by multiplying matrices; no trace identities are
used.  The brute-force tensor serves as the oracle for the traced
expressions in ``radiation``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kinematics import ParticleParams, ScatteringKinematics

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def _levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        eps[perm] = np.linalg.det(np.eye(4)[list(perm)])
    return eps


LEVI_CIVITA = _levi_civita()  # upper indices, eps^{0123} = +1


@dataclass(frozen=True, eq=False)
class DiracBasis:
    """Gamma matrices gamma^mu, gamma^5, sigma^{mu nu} and the rest-frame embedding.

    ``embed`` maps a two-component Pauli spinor to the positive-energy rest
    frame bispinor; it transforms together with the gamma matrices.
    """

    gamma: np.ndarray  # (4, 4, 4)
    gamma5: np.ndarray
    sigma: np.ndarray  # (4, 4, 4, 4)
    embed: np.ndarray  # (4, 2)

    def slash(self, v) -> np.ndarray:
        """gamma^mu v_mu for contravariant v with shape (..., 4)."""
        v = np.asarray(v)
        lowered = v * np.diag(METRIC)
        return np.einsum("...m,mab->...ab", lowered, self.gamma)

    def anticommutator_defect(self) -> float:
        worst = 0.0
        eye = np.eye(4)
        for mu in range(4):
            for nu in range(4):
                ac = self.gamma[mu] @ self.gamma[nu] + self.gamma[nu] @ self.gamma[mu]
                worst = max(worst, np.abs(ac - 2 * METRIC[mu, nu] * eye).max())
        return worst


def gamma_basis(transform: Optional[np.ndarray] = None) -> DiracBasis:
    """Dirac (Bjorken-Drell) representation, optionally conjugated by a unitary U."""
    z = np.zeros((2, 2))
    eye2 = np.eye(2)
    g = np.empty((4, 4, 4), dtype=complex)
    g[0] = np.block([[eye2, z], [z, -eye2]])
    for k in range(3):
        g[k + 1] = np.block([[z, PAULI[k]], [-PAULI[k], z]])
    embed = np.zeros((4, 2), dtype=complex)
    embed[0, 0] = embed[1, 1] = 1.0
    if transform is not None:
        u = np.asarray(transform, dtype=complex)
        if np.abs(u @ u.conj().T - np.eye(4)).max() > 1e-12:
            raise ValueError("basis transform must be unitary")
        g = np.einsum("ab,mbc,dc->mad", u, g, u.conj())
        embed = u @ embed
    g5 = -1j * g[0] @ g[1] @ g[2] @ g[3]
    sig = np.empty((4, 4, 4, 4), dtype=complex)
    for mu in range(4):
        for nu in range(4):
            sig[mu, nu] = 0.5j * (g[mu] @ g[nu] - g[nu] @ g[mu])
    return DiracBasis(gamma=g, gamma5=g5, sigma=sig, embed=embed)


_DEFAULT_BASIS = gamma_basis()


def pauli_eigenvectors(tau) -> np.ndarray:
    """Columns chi_+ and chi_- with (sigma . tau) chi_s = s chi_s."""
    tau = np.asarray(tau, dtype=float)
    theta = math.acos(max(-1.0, min(1.0, tau[2] / np.linalg.norm(tau))))
    phi = math.atan2(tau[1], tau[0])
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    plus = np.array([c, np.exp(1j * phi) * s])
    minus = np.array([-np.exp(-1j * phi) * s, c])
    return np.stack([plus, minus], axis=1)


def four_momentum(p, m: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    p0 = np.sqrt(m * m + np.sum(p * p, axis=-1))
    return np.concatenate([p0[..., None], p], axis=-1)


@dataclass(frozen=True, eq=False)
class Bispinor:
    components: np.ndarray
    p: np.ndarray
    s: int
    tau: np.ndarray
    mass: float
    basis: DiracBasis = _DEFAULT_BASIS

    def bar(self) -> np.ndarray:
        return self.components.conj() @ self.basis.gamma[0]


def _boost(p, m: float, basis: DiracBasis) -> np.ndarray:
    """(m + p-slash)/sqrt(2m(p0 + m)), batch aware."""
    p4 = four_momentum(p, m)
    eye = np.eye(4)
    return (m * eye + basis.slash(p4)) / np.sqrt(2.0 * m * (p4[..., 0] + m))[..., None, None]


def build_spinor(p, s: int, tau, m: float, basis: DiracBasis = _DEFAULT_BASIS) -> Bispinor:
    """Positive-energy spinor u_s(p) with rest-frame spin s along tau, normalized to u-bar u = 1."""
    if s not in (1, -1):
        raise ValueError("spin label must be +1 or -1")
    tau = np.asarray(tau, dtype=float)
    if abs(np.linalg.norm(tau) - 1.0) > 1e-12:
        raise ValueError("quantization axis must be a unit vector")
    chi = pauli_eigenvectors(tau)[:, 0 if s == 1 else 1]
    u = _boost(p, m, basis) @ (basis.embed @ chi)
    return Bispinor(components=u, p=np.asarray(p, dtype=float), s=s, tau=tau, mass=m, basis=basis)


def spin_four_vector(zeta, p, m: float) -> np.ndarray:
    """s^mu = (zeta.p/m, zeta + p (zeta.p)/(m (p0 + m))), batch aware."""
    zeta = np.asarray(zeta, dtype=float)
    p = np.asarray(p, dtype=float)
    p0 = np.sqrt(m * m + np.sum(p * p, axis=-1))
    zp = np.sum(zeta * p, axis=-1)
    s0 = zp / m
    sv = zeta + p * (zp / (m * (p0 + m)))[..., None]
    return np.concatenate([np.asarray(s0)[..., None], sv], axis=-1)


@dataclass(frozen=True, eq=False)
class SpinState:
    zeta: np.ndarray
    p: np.ndarray
    mass: float

    def __post_init__(self):
        if np.linalg.norm(self.zeta) > 1.0 + 1e-12:
            raise ValueError("spin vector must satisfy |zeta| <= 1")

    @property
    def four_vector(self) -> np.ndarray:
        return spin_four_vector(self.zeta, self.p, self.mass)

    @property
    def pure(self) -> bool:
        return abs(np.linalg.norm(self.zeta) - 1.0) < 1e-12


def zeta0(tau, psi) -> np.ndarray:
    """Unit vector orthogonal to tau that rotates with the relative phase psi."""
    tau = np.asarray(tau, dtype=float)
    th = math.acos(max(-1.0, min(1.0, tau[2] / np.linalg.norm(tau))))
    ph = math.atan2(tau[1], tau[0])
    psi = np.asarray(psi, dtype=float)
    c, s = np.cos(psi - ph), np.sin(psi - ph)
    ct, st, cp, sp = math.cos(th), math.sin(th), math.cos(ph), math.sin(ph)
    return np.stack([ct * cp * c - sp * s, ct * sp * c + cp * s, -st * c], axis=-1)


def effective_spin(tau, kappa, psi) -> np.ndarray:
    """zeta = tau tanh(kappa) + zeta0(psi)/cosh(kappa); broadcasts over kappa, psi."""
    tau = np.asarray(tau, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    z0 = zeta0(tau, psi)
    return tau * np.tanh(kappa)[..., None] + z0 / np.cosh(kappa)[..., None]


@dataclass(frozen=True, eq=False)
class SpinDensityMatrix:
    """Two-by-two spin density matrix in the Pauli basis (quantization along z)."""

    rho: np.ndarray
    tau: Optional[np.ndarray] = None
    kappa: Optional[float] = None
    psi: Optional[float] = None

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise ValueError("density matrix must be 2x2")
        if np.abs(rho - rho.conj().T).max() > 1e-12 or abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError("density matrix must be Hermitian with unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValueError("density matrix must be positive semidefinite")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_zeta(cls, zeta) -> "SpinDensityMatrix":
        zeta = np.asarray(zeta, dtype=float)
        return cls(0.5 * (np.eye(2) + np.einsum("i,iab->ab", zeta, PAULI)))

    @classmethod
    def natural(cls) -> "SpinDensityMatrix":
        return cls(0.5 * np.eye(2))

    @classmethod
    def from_superposition(cls, tau, kappa: float, psi: float) -> "SpinDensityMatrix":
        """rho for the pure state sum_s exp(s(kappa - i psi)/2) chi_s / sqrt(2 cosh kappa)."""
        chi = pauli_eigenvectors(tau)
        rho = np.zeros((2, 2), dtype=complex)
        for i, s in enumerate((1, -1)):
            for j, sb in enumerate((1, -1)):
                w = np.exp(kappa * (s + sb) / 2 - 1j * psi * (s - sb) / 2) / (2 * math.cosh(kappa))
                rho += w * np.outer(chi[:, i], chi[:, j].conj())
        return cls(rho, tau=np.asarray(tau, dtype=float), kappa=kappa, psi=psi)

    @property
    def zeta(self) -> np.ndarray:
        return np.einsum("ab,iba->i", self.rho, PAULI).real


def brute_force_tensor(sk: ScatteringKinematics, params: ParticleParams, zeta,
                       basis: DiracBasis = _DEFAULT_BASIS, extended: bool = False) -> np.ndarray:
    """M^{ij} = m sum_ab rho_ab  U_b-bar Gbar^i (m + p'-slash) G^j U_a, by explicit matrix products.

    G^j = e gamma^j - i mu (p' - p)_nu sigma^{nu j} and Gbar^i its Dirac
    conjugate.  U_a are the boosted rest-frame basis spinors and rho is built
    from zeta; the spin projector formula is not used.  The products run in
    extended precision because the sandwich cancels entries of order gamma^2
    down to the physical value; ``extended`` keeps that precision in the
    returned array.  Batch aware; returns shape (..., 3, 3).
    """
    ld = np.longdouble
    cld = np.clongdouble
    m = ld(sk.mass)
    e, mu = ld(params.charge), ld(params.mu_a)
    gam = basis.gamma.astype(cld)
    sig = basis.sigma.astype(cld)
    embed = basis.embed.astype(cld)
    metric = np.diag(METRIC).astype(ld)
    p = np.asarray(sk.p, dtype=ld)
    p0 = np.sqrt(m * m + np.sum(p * p, axis=-1))
    p4 = np.concatenate([p0[..., None], p], axis=-1)
    pf = np.asarray(sk.p_final, dtype=ld)
    pf4 = np.concatenate([np.sqrt(m * m + np.sum(pf * pf, axis=-1))[..., None], pf], axis=-1)
    d_low = -np.asarray(sk.q, dtype=ld) * metric  # (p' - p)_nu without cancellation
    sigma_nu_j = np.einsum("...n,njab->...jab", d_low.astype(cld), sig[:, 1:])
    g_vertex = e * gam[1:] - 1j * mu * sigma_nu_j  # (..., 3, 4, 4)
    g_bar = e * gam[1:] + 1j * mu * sigma_nu_j
    eye = np.eye(4, dtype=cld)

    def slash(v):
        return np.einsum("...m,mab->...ab", (v * metric).astype(cld), gam)

    prop = m * eye + slash(pf4)
    boost = (m * eye + slash(p4)) / np.sqrt(2 * m * (p0 + m))[..., None, None]
    U = boost @ embed  # (..., 4, 2), columns U_a
    Ubar = np.swapaxes(U.conj(), -1, -2) @ gam[0]  # (..., 2, 4)
    zeta = np.broadcast_to(np.asarray(zeta, dtype=float), np.shape(sk.p)).astype(ld)
    rho = (np.eye(2) + np.einsum("...i,iab->...ab", zeta, PAULI.astype(cld))) / 2
    left = np.einsum("...bx,...ixy->...biy", Ubar, g_bar)
    left = np.einsum("...biy,...yz->...biz", left, prop)
    right = np.einsum("...jzw,...wa->...jza", g_vertex, U)
    sandwich = np.einsum("...biz,...jza->...ijba", left, right)
    out = m * np.einsum("...ab,...ijba->...ij", rho, sandwich)
    return out if extended else out.astype(complex)


def transition_matrix(sk: ScatteringKinematics, params: ParticleParams, vec,
                      basis: DiracBasis = _DEFAULT_BASIS) -> np.ndarray:
    """T_ba = u_b(p')-bar (vec . G) u_a(p) for rest-frame spin labels a, b along z.

    ``vec`` holds contravariant spatial components contracted with G^j, the
    same vertex as in ``brute_force_tensor``.  Single kinematic point.
    """
    m = sk.mass
    e, mu = params.charge, params.mu_a
    p = np.asarray(sk.p, dtype=float)
    pf = np.asarray(sk.p_final, dtype=float)
    d = -sk.q
    d_low = d * np.diag(METRIC)
    sigma_nu_j = np.einsum("n,njab->jab", d_low, basis.sigma[:, 1:])
    g_vertex = e * basis.gamma[1:] - 1j * mu * sigma_nu_j
    op = np.einsum("j,jab->ab", np.asarray(vec, dtype=complex), g_vertex)
    U = _boost(p, m, basis) @ basis.embed
    Uf = _boost(pf, m, basis) @ basis.embed
    Ufbar = Uf.conj().T @ basis.gamma[0]
    return Ufbar @ op @ U
