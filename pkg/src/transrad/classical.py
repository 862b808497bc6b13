"""Classical per-packet radiation amplitudes and N-packet inclusive probabilities.

The classical (exclusive) amplitude is the emission amplitude with the
outgoing particle found in the freely evolved initial state.  For a narrow
packet it factorizes into the spin-diagonal Dirac matrix element at the
packet centroid times the packet form factor, the overlap of the packet with
its own copy shifted by the transferred momentum.  For N well separated
packets the inclusive probability splits into the incoherent sum of
single-packet quantum probabilities plus the coherent classical term with
the incoherent classical part removed.  The exchange term is not evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dirac import SpinDensityMatrix, transition_matrix
from .errors import OverlapViolation, RegimeViolation
from .kinematics import ParticleParams, PhotonKinematics, PolarizationBasis, solve_final_momentum
from .radiation import DEFAULT_RTOL, probability
from .wavepackets import (GaussianSuperposition, PhaseWitness, SpinSuperposition, TwistedPacket,
                          packet_center, packet_spread)

NARROW_LIMIT = 0.05
OVERLAP_LIMIT = 1e-3
FORM_FACTOR_LEVEL = 3
EXCHANGE_NOTE = ("neglected: packets are assumed separated so that their mutual overlaps vanish; "
                 "cross matrix elements of the emission operator are not evaluated")


@dataclass(frozen=True)
class ClassicalAmplitude:
    """Complex amplitude a with |a|^2 the exclusive probability density dP/d^3k."""

    amplitude: complex
    k_transfer: np.ndarray  # (k_perp, q3), conjugate to the packet displacement
    position: np.ndarray
    point_amplitude: complex = 0j
    form_factor: complex = 1 + 0j

    @property
    def probability(self) -> float:
        return abs(self.amplitude) ** 2

    def translated(self, b) -> "ClassicalAmplitude":
        b = np.asarray(b, dtype=float)
        phase = np.exp(-1j * float(self.k_transfer @ b))
        return ClassicalAmplitude(self.amplitude * phase, self.k_transfer, self.position + b,
                                  self.point_amplitude, self.form_factor * phase)


def check_narrow(packet, limit: float = NARROW_LIMIT) -> None:
    center = packet_center(packet)
    perp, longi = packet_spread(packet)
    ratio = max(perp, longi) / float(np.linalg.norm(center))
    if ratio >= limit:
        raise RegimeViolation(f"packet width/|p| = {ratio:.3g} >= {limit}: point-current approximation invalid")


def _gaussian_form_factor(packet: GaussianSuperposition, kt: np.ndarray) -> complex:
    # integral of conj(phi(p - kt)) phi(p) dp in closed form
    b = packet.centers
    w = packet.weights
    cov = packet.cov
    delta = b[:, None, :] - b[None, :, :]
    bsum = b[:, None, :] + b[None, :, :]
    kk = w.conj()[:, None] * w[None, :]
    quad = np.einsum("kli,ij,klj->kl", delta, cov, delta)
    phase = delta @ packet.mean - bsum @ kt / 2
    s = np.sum(kk * np.exp(1j * phase - quad / 2))
    damp = math.exp(-float(kt @ np.linalg.solve(cov, kt)) / 8)
    return complex(damp * s / packet._norm)


def form_factor(packet, kt) -> complex:
    """F(kt) = integral of conj(phi(p - kt)) phi(p) dp (overlap with the shifted packet)."""
    kt = np.asarray(kt, dtype=float)
    base = packet.base if isinstance(packet, PhaseWitness) else packet
    if isinstance(base, GaussianSuperposition) and base is packet:
        return _gaussian_form_factor(base, kt)
    rule = packet.quadrature_rule(min(FORM_FACTOR_LEVEL, packet.quadrature_levels() - 1))
    dens = packet.density(rule.nodes)
    keep = dens > 0
    nodes = rule.nodes[keep]
    vals = packet.amplitude(nodes - kt).conj() * packet.amplitude(nodes) / dens[keep]
    return complex(np.sum(rule.weights[keep] * vals))


def classical_amplitude(packet, photon: PhotonKinematics, pol: PolarizationBasis, params: ParticleParams,
                        position=(0.0, 0.0, 0.0)) -> ClassicalAmplitude:
    """Exclusive amplitude of a narrow packet displaced by ``position``.

    a = m sqrt(2 pref) Tr(rho T) F(kt), with T the spin matrix of the vertex
    contracted with conj(g), g = sum_r f_r/D_r, at the centroid kinematics,
    pref = 1/(32 pi^3 k0 |p3' p3|), rho built from zeta at the centroid and
    F the packet form factor at kt = (k_perp, q3).  At small recoil the
    matrix element reduces to the current e(p + p')/2 of a point charge
    plus the magnetization of its moment.
    """
    check_narrow(packet)
    m = params.mass
    p = packet_center(packet)
    sk = solve_final_momentum(p, photon, m)
    d = sk.denominators()
    g = sum(pol.reflected(r) / d[i] for i, r in enumerate((1, -1)))
    t = transition_matrix(sk, params, g.conj())
    zeta = np.asarray(packet.effective_spin(p[None, :])[0], dtype=float)
    rho = SpinDensityMatrix.from_zeta(zeta).rho
    pref = 1.0 / (32.0 * math.pi ** 3 * photon.k0 * abs(float(sk.p3_final) * p[2]))
    point = complex(m * math.sqrt(2.0 * pref) * np.einsum("ab,ba->", rho, t))
    kt = np.array([photon.k[0], photon.k[1], float(sk.q3)])
    ff = form_factor(packet, kt)
    base = ClassicalAmplitude(point * ff, kt, np.zeros(3), point, ff)
    return base.translated(position)


@dataclass(frozen=True)
class BunchMember:
    """A one-particle packet translated in space by ``position``."""

    packet: object
    position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))


@dataclass(frozen=True)
class NParticleResult:
    incoherent_quantum: float
    coherent_classical: float
    incoherent_classical_subtraction: float
    total: float
    amplitudes: tuple
    quantum_terms: tuple
    exchange_term: str = EXCHANGE_NOTE

    @property
    def enhancement(self) -> float:
        """Coherent term over the mean single-packet classical term."""
        n = len(self.amplitudes)
        if self.incoherent_classical_subtraction == 0.0:
            return 0.0
        return self.coherent_classical / (self.incoherent_classical_subtraction / n)


def packet_overlap(a: BunchMember, b: BunchMember, level: int = 3) -> float:
    """|<phi_a|phi_b>| for two translated packets."""
    shift = np.asarray(b.position) - np.asarray(a.position)
    if a.packet is b.packet:
        return abs(a.packet.characteristic(shift))
    rule = a.packet.quadrature_rule(min(level, a.packet.quadrature_levels() - 1))
    dens = a.packet.density(rule.nodes)
    keep = dens > 0
    nodes = rule.nodes[keep]
    amp_a = a.packet.amplitude(nodes) * np.exp(-1j * nodes @ np.asarray(a.position))
    amp_b = b.packet.amplitude(nodes) * np.exp(-1j * nodes @ np.asarray(b.position))
    return float(abs(np.sum(rule.weights[keep] * amp_a.conj() * amp_b / dens[keep])))


def check_overlaps(members: Sequence[BunchMember], limit: float = OVERLAP_LIMIT) -> float:
    worst = 0.0
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            ov = packet_overlap(members[i], members[j])
            worst = max(worst, ov)
            if ov >= limit:
                raise OverlapViolation(f"packets {i} and {j} overlap by {ov:.3g} (limit {limit:g})")
    return worst


def n_particle_probability(members: Sequence[BunchMember], photon: PhotonKinematics,
                           pol: PolarizationBasis, params: ParticleParams,
                           rtol: float = DEFAULT_RTOL) -> NParticleResult:
    """Inclusive probability for N separated one-particle packets (exchange term neglected)."""
    members = [m if isinstance(m, BunchMember) else BunchMember(m) for m in members]
    if not members:
        raise ValueError("need at least one packet")
    check_overlaps(members)
    quantum = []
    cache = {}
    for mem in members:
        key = id(mem.packet)
        if key not in cache:
            cache[key] = probability(mem.packet, photon, pol, params, rtol=rtol).value
        quantum.append(cache[key])
    amps = [classical_amplitude(mem.packet, photon, pol, params, mem.position).amplitude for mem in members]
    # fixed summation order for reproducibility
    re = math.fsum(a.real for a in amps)
    im = math.fsum(a.imag for a in amps)
    coherent = re * re + im * im
    subtraction = math.fsum(abs(a) ** 2 for a in amps)
    incoherent = math.fsum(quantum)
    total = incoherent + coherent - subtraction
    return NParticleResult(incoherent_quantum=incoherent, coherent_classical=coherent,
                           incoherent_classical_subtraction=subtraction, total=total,
                           amplitudes=tuple(amps), quantum_terms=tuple(quantum))


@dataclass(frozen=True)
class ExclusiveReport:
    exclusive: float
    inclusive: float
    ratio: float
    tolerance: float
    consistent: bool
    flags: tuple = ()


def exclusive_vs_inclusive_report(packet, photon: PhotonKinematics, pol: PolarizationBasis,
                                  params: ParticleParams, rtol: float = DEFAULT_RTOL) -> ExclusiveReport:
    """Compare |a|^2 with the inclusive probability; the ratio measures recoil suppression.

    The exclusive value is evaluated at the centroid while the inclusive one
    averages over the packet, so the comparison allows the quadrature
    tolerance plus the relative spread of the packet squared.
    """
    exc = classical_amplitude(packet, photon, pol, params).probability
    inc_res = probability(packet, photon, pol, params, rtol=rtol)
    inc = inc_res.value
    center = packet_center(packet)
    spread = max(packet_spread(packet)) / float(np.linalg.norm(center))
    tol = rtol + spread ** 2 + inc_res.error / max(abs(inc), 1e-300)
    flags = []
    if isinstance(packet, TwistedPacket) and packet.l != 0:
        flags.append(f"twisted l={packet.l}: the inclusive probability ignores the orbital phase while the "
                     "classical current of the packet carries an orbital magnetic moment; the exclusive "
                     "quantity is not an approximation to the inclusive one")
    if inc == 0.0:
        ratio = 0.0 if exc == 0.0 else math.inf
    else:
        ratio = exc / inc
    consistent = exc <= inc * (1.0 + tol) + 1e-300
    return ExclusiveReport(exclusive=exc, inclusive=inc, ratio=ratio, tolerance=tol,
                           consistent=bool(consistent), flags=tuple(flags))
