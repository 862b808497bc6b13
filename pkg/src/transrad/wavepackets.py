"""Wave-packet momentum densities c(p) and effective spin fields zeta(p).

Radiation probabilities depend on a packet only through the momentum
diagonal of its density matrix, so packets expose c(p) and zeta(p).  Momentum
amplitudes with phases are available for tests of phase invariance.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import erfc, eval_laguerre
from scipy.stats import multivariate_normal

from . import quadrature
from .dirac import SpinDensityMatrix, effective_spin as _effective_spin
from .errors import PacketConfigError, RegimeWarning

SUPPORT_LIMIT = 1e-8
TWISTED_RATIO_WARN = 5.0


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError("momenta must have 3 components")
    return p


@dataclass(frozen=True, eq=False)
class GaussianSuperposition:
    """Superposition of Gaussian packets displaced in space by ``centers``.

    c(p) = N(p; mean, cov) |sum_l k_l exp(-i p.b_l)|^2 / Z where cov is the
    momentum covariance matrix and Z fixes the normalization.
    """

    mean: np.ndarray
    cov: np.ndarray
    centers: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    spin: Optional[SpinDensityMatrix] = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(3)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape == (3,):
            cov = np.diag(cov)
        if cov.shape != (3, 3) or np.abs(cov - cov.T).max() > 1e-12 * np.abs(cov).max():
            raise PacketConfigError("covariance must be a symmetric 3x3 matrix")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise PacketConfigError("covariance must be positive definite") from exc
        if mean[2] >= 0:
            raise PacketConfigError("mean momentum must point into the mirror (p3 < 0)")
        centers = np.zeros((1, 3)) if self.centers is None else np.asarray(self.centers, dtype=float).reshape(-1, 3)
        n = len(centers)
        weights = np.ones(n, dtype=complex) if self.weights is None else np.asarray(self.weights, dtype=complex).reshape(-1)
        if len(weights) != n:
            raise PacketConfigError("need one weight per center")
        if not np.any(weights):
            raise PacketConfigError("weights must not all vanish")
        spin = SpinDensityMatrix.natural() if self.spin is None else self.spin
        for name, val in (("mean", mean), ("cov", cov), ("centers", centers), ("weights", weights)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "spin", spin)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_norm", self._normalization_sum())
        tail = self.positive_p3_mass_bound()
        if tail >= SUPPORT_LIMIT:
            raise PacketConfigError(
                f"packet has up to {tail:.3g} of its mass at p3 >= 0 (limit {SUPPORT_LIMIT:g})")

    def _pair_shifts(self) -> np.ndarray:
        b = self.centers
        return b[:, None, :] - b[None, :, :]

    def _normalization_sum(self) -> float:
        bkl = self._pair_shifts()
        kk = self.weights[:, None] * self.weights[None, :].conj()
        quad = np.einsum("kli,ij,klj->kl", bkl, self.cov, bkl)
        z = np.sum(kk * np.exp(-1j * bkl @ self.mean - quad / 2))
        return float(z.real)

    @property
    def normalization_constant(self) -> float:
        """k^2 with c(p) = k^2 exp(-dp.G^-1.dp/2) S(p)."""
        return 1.0 / ((2 * math.pi) ** 1.5 * math.sqrt(np.linalg.det(self.cov)) * self._norm)

    def positive_p3_mass_bound(self) -> float:
        tail = 0.5 * erfc(-self.mean[2] / math.sqrt(2 * self.cov[2, 2]))
        return float(tail * np.sum(np.abs(self.weights)) ** 2 / self._norm)

    def structure_factor(self, p) -> np.ndarray:
        p = _as_points(p)
        amp = np.exp(-1j * p @ self.centers.T) @ self.weights
        return np.abs(amp) ** 2

    def density(self, p) -> np.ndarray:
        p = _as_points(p)
        dp = p - self.mean
        sol = np.linalg.solve(self.cov, dp.reshape(-1, 3).T).T.reshape(dp.shape)
        quad = np.sum(dp * sol, axis=-1)
        return self.normalization_constant * np.exp(-quad / 2) * self.structure_factor(p)

    def amplitude(self, p) -> np.ndarray:
        p = _as_points(p)
        dp = p - self.mean
        sol = np.linalg.solve(self.cov, dp.reshape(-1, 3).T).T.reshape(dp.shape)
        quad = np.sum(dp * sol, axis=-1)
        env = math.sqrt(self.normalization_constant) * np.exp(-quad / 4)
        return env * (np.exp(-1j * p @ self.centers.T) @ self.weights)

    def effective_spin(self, p) -> np.ndarray:
        p = _as_points(p)
        return np.broadcast_to(self.spin.zeta, p.shape)

    def characteristic(self, x) -> complex:
        """Integral of c(p) exp(-i p.x) dp."""
        x = np.asarray(x, dtype=float)
        bkl = self._pair_shifts() + x
        kk = self.weights[:, None] * self.weights[None, :].conj()
        quad = np.einsum("kli,ij,klj->kl", bkl, self.cov, bkl)
        return complex(np.sum(kk * np.exp(-1j * bkl @ self.mean - quad / 2)) / self._norm)

    def center(self) -> np.ndarray:
        return self.mean

    def spread(self) -> tuple[float, float]:
        perp = math.sqrt(float(np.linalg.eigvalsh(self.cov[:2, :2]).max()))
        return perp, math.sqrt(self.cov[2, 2])

    # quadrature support
    def quadrature_levels(self) -> int:
        return len(quadrature.GAUSSIAN_ORDERS)

    def quadrature_rule(self, level: int, order: Optional[int] = None) -> quadrature.MomentumRule:
        base = quadrature.GAUSSIAN_ORDERS[level] if order is None else order
        freqs = (self._pair_shifts().reshape(-1, 3)) @ self._chol
        frame, comps = quadrature.oscillation_frame(freqs)
        orders = [base + quadrature.extra_order(w) for w in comps]
        t, w = quadrature.product_normal_rule(orders)
        x = t @ frame.T
        nodes = self.mean + x @ self._chol.T
        weights = w * self.structure_factor(nodes) / self._norm
        return quadrature.MomentumRule(nodes, weights)


KappaLike = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class SpinSuperposition:
    """Pure spin state whose spinor components carry relative amplitude exp(kappa)
    and relative phase psi(p) = p.b + vartheta, on a Gaussian envelope."""

    envelope: GaussianSuperposition
    tau: np.ndarray
    kappa: KappaLike = 0.0
    b: np.ndarray = np.zeros(3)
    vartheta: float = 0.0

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if abs(np.linalg.norm(tau) - 1.0) > 1e-12:
            raise PacketConfigError("quantization axis must be a unit vector")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(3))

    def _kappa(self, p):
        if callable(self.kappa):
            return np.asarray(self.kappa(p), dtype=float)
        return np.full(p.shape[:-1], float(self.kappa))

    def psi(self, p) -> np.ndarray:
        return p @ self.b + self.vartheta

    def density(self, p) -> np.ndarray:
        return self.envelope.density(p)

    def effective_spin(self, p) -> np.ndarray:
        p = _as_points(p)
        return _effective_spin(self.tau, self._kappa(p), self.psi(p))

    def spin_amplitudes(self, p) -> np.ndarray:
        """phi_s(p) for s = +1, -1 on the last axis (basis of eigenvectors of sigma.tau)."""
        p = _as_points(p)
        kap = self._kappa(p)
        psi = self.psi(p)
        env = self.envelope.amplitude(p)
        norm = np.sqrt(2 * np.cosh(kap))
        plus = env * np.exp((kap - 1j * psi) / 2) / norm
        minus = env * np.exp(-(kap - 1j * psi) / 2) / norm
        return np.stack([plus, minus], axis=-1)

    def amplitude(self, p) -> np.ndarray:
        return self.envelope.amplitude(p)

    def center(self) -> np.ndarray:
        return self.envelope.center()

    def spread(self) -> tuple[float, float]:
        return self.envelope.spread()

    def quadrature_levels(self) -> int:
        return self.envelope.quadrature_levels()

    def quadrature_rule(self, level: int, order: Optional[int] = None) -> quadrature.MomentumRule:
        return self.envelope.quadrature_rule(level, order)


@dataclass(frozen=True, eq=False)
class TwistedPacket:
    """Packet with definite orbital angular momentum projection l along z.

    c(p) = k^2 p_perp^(2|l|) exp(-(p3 - p)^2/(2 sigma3^2) - p_perp^2/(2 sigma_perp^2)).
    ``spin`` is +1, -1 (pure, along z) or 'natural'.
    """

    p: float
    sigma3: float
    sigma_perp: float
    l: int = 0
    spin: Union[int, str] = "natural"

    def __post_init__(self):
        if self.p >= 0:
            raise PacketConfigError("longitudinal momentum must be negative")
        if self.sigma3 <= 0 or self.sigma_perp <= 0:
            raise PacketConfigError("momentum spreads must be positive")
        if int(self.l) != self.l:
            raise PacketConfigError("orbital quantum number must be an integer")
        object.__setattr__(self, "l", int(self.l))
        if self.spin not in (1, -1, "natural"):
            raise PacketConfigError("spin must be +1, -1 or 'natural'")
        if abs(self.p) / self.sigma3 < TWISTED_RATIO_WARN:
            warnings.warn(f"|p|/sigma3 = {abs(self.p) / self.sigma3:.3g} < {TWISTED_RATIO_WARN}: "
                          "the Gaussian profile reaches p3 > 0", RegimeWarning)
        tail = self.positive_p3_mass_bound()
        if tail >= SUPPORT_LIMIT:
            raise PacketConfigError(f"packet has {tail:.3g} of its mass at p3 >= 0 (limit {SUPPORT_LIMIT:g})")

    @property
    def normalization_constant(self) -> float:
        la = abs(self.l)
        s2 = self.sigma_perp ** 2
        return 1.0 / ((2 * math.pi) ** 1.5 * self.sigma3 * s2 * (2 * s2) ** la * math.factorial(la))

    def positive_p3_mass_bound(self) -> float:
        return float(0.5 * erfc(abs(self.p) / (math.sqrt(2) * self.sigma3)))

    def paraxiality(self, m: float) -> dict:
        return {"nonparaxial": (abs(self.l) + 1) * self.sigma_perp ** 2 / m ** 2,
                "longitudinal": self.sigma3 / abs(self.p)}

    def density(self, p) -> np.ndarray:
        p = _as_points(p)
        pp2 = p[..., 0] ** 2 + p[..., 1] ** 2
        return self.normalization_constant * pp2 ** abs(self.l) * np.exp(
            -(p[..., 2] - self.p) ** 2 / (2 * self.sigma3 ** 2) - pp2 / (2 * self.sigma_perp ** 2))

    def amplitude(self, p) -> np.ndarray:
        p = _as_points(p)
        pp2 = p[..., 0] ** 2 + p[..., 1] ** 2
        env = math.sqrt(self.normalization_constant) * pp2 ** (abs(self.l) / 2) * np.exp(
            -(p[..., 2] - self.p) ** 2 / (4 * self.sigma3 ** 2) - pp2 / (4 * self.sigma_perp ** 2))
        return env * np.exp(1j * self.l * np.arctan2(p[..., 1], p[..., 0]))

    def effective_spin(self, p) -> np.ndarray:
        p = _as_points(p)
        z = np.zeros(3) if self.spin == "natural" else np.array([0.0, 0.0, float(self.spin)])
        return np.broadcast_to(z, p.shape)

    def characteristic(self, x) -> complex:
        """Integral of c(p) exp(-i p.x) dp (Laguerre-Gaussian transverse profile)."""
        x = np.asarray(x, dtype=float)
        v = self.sigma_perp ** 2 * (x[0] ** 2 + x[1] ** 2) / 2
        trans = math.exp(-v) * eval_laguerre(abs(self.l), v)
        longi = np.exp(-1j * self.p * x[2] - self.sigma3 ** 2 * x[2] ** 2 / 2)
        return complex(trans * longi)

    def center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.p])

    def spread(self) -> tuple[float, float]:
        return self.sigma_perp * math.sqrt(abs(self.l) + 1), self.sigma3

    def quadrature_levels(self) -> int:
        return len(quadrature.TWISTED_ORDERS)

    def quadrature_rule(self, level: int, orders=None) -> quadrature.MomentumRule:
        nr, nphi, nz = quadrature.TWISTED_ORDERS[level] if orders is None else orders
        u, wu = quadrature.gauss_laguerre(nr, abs(self.l))
        phi = 2 * math.pi * (np.arange(nphi) + 0.5) / nphi
        z, wz = quadrature.gauss_hermite(nz)
        U, PH, Z = np.meshgrid(u, phi, z, indexing="ij")
        W = (wu[:, None, None] * wz[None, None, :] / nphi) * np.ones_like(U)
        rho = self.sigma_perp * np.sqrt(2 * U)
        nodes = np.stack([rho * np.cos(PH), rho * np.sin(PH), self.p + self.sigma3 * Z], axis=-1)
        return quadrature.MomentumRule(nodes.reshape(-1, 3), W.ravel())


@dataclass(frozen=True, eq=False)
class PhaseWitness:
    """A packet whose momentum amplitude carries an extra phase exp(i xi(p)).

    Density and spin field are delegated unchanged to the base packet.
    """

    base: object
    xi: Callable[[np.ndarray], np.ndarray]

    def density(self, p):
        return self.base.density(p)

    def effective_spin(self, p):
        return self.base.effective_spin(p)

    def amplitude(self, p):
        p = _as_points(p)
        return self.base.amplitude(p) * np.exp(1j * self.xi(p))

    def center(self):
        return self.base.center()

    def spread(self):
        return self.base.spread()

    def characteristic(self, x):
        return self.base.characteristic(x)

    def quadrature_levels(self):
        return self.base.quadrature_levels()

    def quadrature_rule(self, level, *args):
        return self.base.quadrature_rule(level, *args)


def phase_invariance_witness(packet, xi: Optional[Callable] = None, seed: int = 0) -> PhaseWitness:
    """Wrap ``packet`` with a momentum-dependent phase; a random smooth phase by default."""
    if xi is None:
        rng = np.random.default_rng(seed)
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        c = rng.uniform(0, 2 * math.pi)
        scale = 1.0 / max(packet.spread())

        def xi(p):
            return p @ a * scale + np.sin(p @ b * scale + c)
    return PhaseWitness(packet, xi)


def density(packet, p) -> np.ndarray:
    """Momentum density c(p) >= 0."""
    return packet.density(p)


def effective_spin_field(packet, p) -> np.ndarray:
    """Effective rest-frame spin vector zeta(p)."""
    return packet.effective_spin(p)


def structure_factor(packet: GaussianSuperposition, p) -> np.ndarray:
    """S(p) = |sum_l k_l exp(-i p.b_l)|^2."""
    return packet.structure_factor(p)


def structure_factor_pairs(packet: GaussianSuperposition, p) -> np.ndarray:
    """S(p) from the explicit double sum over center pairs."""
    p = _as_points(p)
    b = packet.centers
    bkl = b[:, None, :] - b[None, :, :]
    kk = packet.weights[:, None] * packet.weights[None, :].conj()
    return np.einsum("kl,...kl->...", kk, np.exp(-1j * np.einsum("...i,kli->...kl", p, bkl)))


def reciprocal_lattice_peaks(packet: GaussianSuperposition, orders) -> np.ndarray:
    """Momentum shifts p_n along the lattice vector d with p_n.d = 2 pi n.

    Requires equally weighted centers b_l = b_0 + l d.
    """
    b = packet.centers
    w = packet.weights
    if len(b) < 2:
        raise ValueError("a lattice needs at least two centers")
    if np.abs(w - w[0]).max() > 1e-12 * abs(w[0]):
        raise ValueError("lattice peaks need equal weights")
    d = b[1] - b[0]
    expected = b[0] + np.arange(len(b))[:, None] * d
    if np.abs(b - expected).max() > 1e-9 * np.linalg.norm(d):
        raise ValueError("centers do not form a one-dimensional lattice")
    orders = np.asarray(orders, dtype=float)
    return 2 * math.pi * orders[:, None] * d / float(d @ d)


def packet_center(packet) -> np.ndarray:
    return np.asarray(packet.center(), dtype=float)


def packet_spread(packet) -> tuple[float, float]:
    """(transverse, longitudinal) rms momentum spread per component."""
    return packet.spread()


def normalization(packet, order: int = 40) -> float:
    """Integral of density(p) dp by an envelope-aligned product rule.

    The rule weights come from a reference measure independent of the
    packet's own normalization constant.
    """
    base = packet.base if isinstance(packet, PhaseWitness) else packet
    if isinstance(base, SpinSuperposition):
        base = base.envelope
    if isinstance(base, GaussianSuperposition):
        t, w = quadrature.product_normal_rule([order] * 3)
        nodes = base.mean + t @ np.linalg.cholesky(base.cov).T
        ref = multivariate_normal(mean=base.mean, cov=base.cov).pdf(nodes)
        return float(np.sum(w * packet.density(nodes) / ref))
    if isinstance(base, TwistedPacket):
        la = abs(base.l)
        nr = max(order, 2 * la + 20)
        u, wu = quadrature.gauss_laguerre(nr, la)
        z, wz = quadrature.gauss_hermite(order)
        nphi = 8
        phi = 2 * math.pi * np.arange(nphi) / nphi
        U, PH, Z = np.meshgrid(u, phi, z, indexing="ij")
        s = base.sigma_perp
        rho = s * np.sqrt(2 * U)
        nodes = np.stack([rho * np.cos(PH), rho * np.sin(PH), base.p + base.sigma3 * Z], axis=-1)
        # reference density: Gamma(la+1) in u, uniform in phi, normal in p3
        ref = (U ** la * np.exp(-U) / math.gamma(la + 1)) / (2 * math.pi) * (
            np.exp(-Z ** 2 / 2) / (math.sqrt(2 * math.pi) * base.sigma3))
        jac = s * s  # dp = s^2 du dphi dp3
        vals = packet.density(nodes) * jac / ref
        W = wu[:, None, None] * wz[None, None, :] / nphi
        return float(np.sum(W * vals))
    raise TypeError(f"unsupported packet type {type(packet).__name__}")
