"""Inclusive transition-radiation probability from a Dirac wave packet on an ideal mirror.

Results are densities with respect to d^3k.  The integrand at fixed incident
momentum is available in two independent forms: the traced vertex tensor
contracted with the mirror-reflected polarization vectors (``general``) and
the closed scalar contraction identities (``fastpath``).
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import quadrature
from .dirac import LEVI_CIVITA, METRIC, spin_four_vector
from .errors import (AccuracyWarning, ChannelClosed, ChannelClosedOnSupport, RegimeViolation,
                     RegimeWarning, TransradError, UnknownForm)
from .kinematics import (CHI_REJECT, CHI_SMALL, THETA_MAX_DEFAULT, ApplicabilityContext,
                         ParticleParams, PhotonKinematics, PolarizationBasis, ScatteringKinematics,
                         angle_dispersion_bound, applicability, build_polarization,
                         small_recoil_transfer, solve_final_momentum, twisted_recoil_threshold)
from .wavepackets import TwistedPacket, packet_center, packet_spread

CLOSED_MASS_LIMIT = 1e-6
DEFAULT_RTOL = 1e-4

# sign of the Levi-Civita terms in the traced route; flipped only by the
# mutation smoke test of the verification driver
_EPS_SIGN = 1.0

_ETA3 = -np.eye(3)

# the contractions cancel entries of order |p|^2 down to the physical value,
# so both integrand routes evaluate in extended precision
EXT = np.longdouble


@dataclass(frozen=True)
class RadiationResult:
    """dP/d^3k with its split into the e^2, e*mu_a and mu_a^2 coupling blocks."""

    value: float
    term_e2: float
    term_emu: float
    term_mu2: float
    method: str
    error: float = 0.0
    flags: tuple = ()

    @classmethod
    def from_terms(cls, terms, method: str, error: float = 0.0, flags=()) -> "RadiationResult":
        t = [float(x) for x in terms]
        return cls(value=math.fsum(t), term_e2=t[0], term_emu=t[1], term_mu2=t[2],
                   method=method, error=float(error), flags=tuple(flags))


def _couplings(params: ParticleParams) -> np.ndarray:
    e, mu = params.charge, params.mu_a
    return np.array([e * e, e * mu, mu * mu])


def _prefactor(sk: ScatteringKinematics) -> np.ndarray:
    return 1.0 / (32.0 * math.pi ** 3 * sk.k0 * np.abs(sk.p3_final * sk.p[..., 2]))


def _lower(v: np.ndarray) -> np.ndarray:
    return v * np.diag(METRIC)


def _eps_pair(a_low: np.ndarray, b_low: np.ndarray) -> np.ndarray:
    """eps^{mu nu i j} a_mu b_nu for spatial i, j."""
    eps = LEVI_CIVITA[:, :, 1:, 1:].astype(a_low.dtype)
    return np.einsum("...m,...n,mnij->...ij", a_low, b_low, eps)


def vertex_blocks(sk: ScatteringKinematics, s4: np.ndarray) -> np.ndarray:
    """Traced vertex tensor split by coupling, shape (..., 3, 3, 3).

    The leading axis after the batch dimensions selects the e^2, e*mu_a and
    mu_a^2 block (couplings stripped); the last two are the spatial indices
    i (paired with f) and j (paired with f*).
    """
    m = EXT(sk.mass)
    p = np.asarray(sk.p, dtype=EXT)
    pf = np.asarray(sk.p_final, dtype=EXT)
    q4 = np.asarray(sk.q, dtype=EXT)
    s4 = np.asarray(s4, dtype=EXT)
    p0 = np.sqrt(m * m + np.sum(p * p, axis=-1))
    p4 = np.concatenate([p0[..., None], p], axis=-1)
    q3 = q4[..., 3]
    k3 = EXT(sk.k[2])
    q2 = ((k3 - q3) * (k3 + q3))[..., None, None]
    eta3 = _ETA3.astype(EXT)
    qs = np.sum(_lower(q4) * s4, axis=-1)[..., None, None]
    eps_qs = _EPS_SIGN * _eps_pair(_lower(q4), _lower(s4))
    eps_pq = _EPS_SIGN * _eps_pair(_lower(p4), _lower(q4))
    qv = q4[..., 1:]
    ppf = np.einsum("...i,...j->...ij", p, pf)
    qq = np.einsum("...i,...j->...ij", qv, qv)
    ssum = p + pf
    pp = np.einsum("...i,...j->...ij", ssum, ssum)
    t_e2 = ppf + np.swapaxes(ppf, -1, -2) + eta3 * q2 / 2 + 1j * m * eps_qs
    t_em = (2 * m * q2 * eta3 - 2 * m * qq
            + 1j * (2 * m * m * eps_qs + qs * eps_pq + q2 * eps_qs / 2))
    t_m2 = (q2 * (2 * m * m * eta3 - pp / 2) - 2 * m * m * qq
            + 2j * m * (qs * eps_pq + q2 * eps_qs / 2))
    return np.stack([t_e2, t_em, t_m2], axis=-3)


def polarization_weights(sk: ScatteringKinematics, pol: PolarizationBasis) -> np.ndarray:
    """W^{ij} = sum_{r r'} f_r^i conj(f_r'^j) / (D_r D_r')."""
    d = sk.denominators().astype(EXT)
    w = 0.0
    for a, r in enumerate((1, -1)):
        fr = pol.reflected(r).astype(np.clongdouble)
        for b, rp in enumerate((1, -1)):
            frp = pol.reflected(rp).astype(np.clongdouble)
            w = w + np.einsum("i,j->ij", fr, frp.conj()) / (d[..., a] * d[..., b])[..., None, None]
    return w


def _prepare(p, photon, params, zeta, sk=None):
    if sk is None:
        sk = solve_final_momentum(p, photon, params.mass)
    zeta = np.broadcast_to(np.asarray(zeta, dtype=float), np.shape(sk.p))
    s4 = spin_four_vector(zeta, sk.p, params.mass)
    return sk, s4


def integrand_general(p, photon: PhotonKinematics, pol: PolarizationBasis, params: ParticleParams,
                      zeta=(0.0, 0.0, 0.0), breakdown: bool = False, sk: ScatteringKinematics = None):
    """Integrand of dP/d^3k at fixed incident momentum from the traced vertex tensor.

    Returns the total (or, with ``breakdown``, the e^2, e*mu_a, mu_a^2 parts
    on the last axis).  Batch aware in ``p`` and ``zeta``.
    """
    sk, s4 = _prepare(p, photon, params, zeta, sk)
    blocks = vertex_blocks(sk, s4)
    w = polarization_weights(sk, pol)
    contracted = np.einsum("...ij,...bij->...b", w, blocks).real.astype(float)
    terms = contracted * _couplings(params) * _prefactor(sk)[..., None]
    return terms if breakdown else terms.sum(axis=-1)


def _xeps(a, b, gxg):
    """eps^{mu nu i j} a_mu b_nu g^i conj(g^j) = (b^0 a - a^0 b) . (g x g*), contravariant input."""
    vec = b[..., :1] * a[..., 1:] - a[..., :1] * b[..., 1:]
    return _EPS_SIGN_FAST * np.sum(vec * gxg, axis=-1)


_EPS_SIGN_FAST = 1.0


def integrand_contracted(p, photon: PhotonKinematics, pol: PolarizationBasis, params: ParticleParams,
                         zeta=(0.0, 0.0, 0.0), breakdown: bool = False, sk: ScatteringKinematics = None):
    """Same integrand as ``integrand_general`` via closed contraction identities.

    Uses g = sum_r f_r/D_r = (2/q^2)(k3 f + (q3 - k3) f3 e3), valid when f3 is
    real, and the scalar products of g with p, p', q and eta.
    """
    f = pol.f
    if f[2].imag != 0.0:
        raise ValueError("the contraction identities need a real f3")
    sk, s4 = _prepare(p, photon, params, zeta, sk)
    m = EXT(sk.mass)
    pv = np.asarray(sk.p, dtype=EXT)
    s4 = np.asarray(s4, dtype=EXT)
    p3 = pv[..., 2]
    k3 = EXT(photon.k[2])
    q3 = np.asarray(sk.q3, dtype=EXT)
    q2 = (k3 - q3) * (k3 + q3)
    c = q3 - k3
    f = f.astype(np.clongdouble)
    f3 = f[2].real
    pf = pv @ f
    re_pf = pf.real
    abs_pf2 = pf.real ** 2 + pf.imag ** 2
    inv_q4 = 1 / (q2 * q2)
    s1 = 8 * inv_q4 * (k3 ** 2 * abs_pf2 + k3 * f3 * (2 * c * p3 + q2) * re_pf
                       + (c * c * p3 * p3 + q2 * c * p3) * f3 ** 2)
    eta = 4 * inv_q4 * (q2 * f3 ** 2 - k3 ** 2)
    qq = 4 * f3 ** 2
    h = c * p3 + q2 / 2
    pp = 16 * inv_q4 * (k3 ** 2 * abs_pf2 + 2 * k3 * f3 * h * re_pf + h * h * f3 ** 2)
    # g x g* = (4/q^4) [k3^2 f x f* + k3 c f3 (f x e3 + e3 x f*)]
    e3 = np.array([0, 0, 1], dtype=EXT)
    fxf = np.cross(f, f.conj())
    mix = np.cross(f, e3) + np.cross(e3, f.conj())
    gxg = 4 * inv_q4[..., None] * (k3 ** 2 * fxf + (k3 * c * f3)[..., None] * mix)
    kv = photon.k.astype(EXT)
    q4 = np.stack(np.broadcast_arrays(EXT(photon.k0), kv[0], kv[1], q3), axis=-1)
    p0 = np.sqrt(m * m + np.sum(pv * pv, axis=-1))
    p4 = np.concatenate([p0[..., None], pv], axis=-1)
    qs = np.sum(_lower(q4) * s4, axis=-1)
    x_qs = _xeps(q4, s4, gxg)
    x_pq = _xeps(p4, q4, gxg)
    v_e2 = s1 + q2 / 2 * eta + 1j * m * x_qs
    v_em = 2 * m * q2 * eta - 2 * m * qq + 1j * (2 * m * m * x_qs + qs * x_pq + q2 * x_qs / 2)
    v_m2 = q2 * (2 * m * m * eta - pp / 2) - 2 * m * m * qq + 2j * m * (qs * x_pq + q2 * x_qs / 2)
    blocks = np.stack([v_e2, v_em, v_m2], axis=-1).real.astype(float)
    terms = blocks * _couplings(params) * _prefactor(sk)[..., None]
    return terms if breakdown else terms.sum(axis=-1)


def summed_bracket_integrand(p, photon: PhotonKinematics, params: ParticleParams,
                             breakdown: bool = False, sk: ScatteringKinematics = None):
    """Polarization-summed integrand for a particle falling along the mirror normal.

    [(e^2 - q^2 mu^2) n_perp^2 (2 p3 q3/q^2 + 1)^2 - (e + 2 m mu)^2 2 k3^2/q^2] / (16 pi^3 k0 |p3' p3|).
    The transverse incident momentum enters only through the kinematics.
    """
    if sk is None:
        sk = solve_final_momentum(p, photon, params.mass)
    e, mu, m = params.charge, params.mu_a, params.mass
    p3 = np.asarray(sk.p, dtype=float)[..., 2]
    q2, q3 = sk.q2, sk.q3
    k3 = photon.k[2]
    nperp2 = photon.n_perp ** 2
    a = nperp2 * (2 * p3 * q3 / q2 + 1) ** 2
    b = -2 * k3 ** 2 / q2
    pre = 1.0 / (16 * math.pi ** 3 * photon.k0 * np.abs(sk.p3_final * p3))
    terms = np.stack([(a + b) * e * e, 4 * m * e * mu * b, (-q2 * a + 4 * m * m * b) * mu * mu], axis=-1)
    terms = terms * pre[..., None]
    return terms if breakdown else terms.sum(axis=-1)


def charge_small_recoil_integrand(p, photon: PhotonKinematics, f, params: ParticleParams):
    """Charge-only integrand with first-order recoil kinematics (spin independent).

    e^2 |k3 (p.f) + (q3 - k3) p3 f3|^2 / (p3^2 q^4 4 pi^3 k0).
    """
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=complex)
    r = small_recoil_transfer(p, photon, params.mass)
    k3 = photon.k[2]
    p3 = p[..., 2]
    amp = k3 * (p @ f) + (r.q3 - k3) * p3 * f[2]
    return params.charge ** 2 * np.abs(amp) ** 2 / (p3 ** 2 * r.q2 ** 2 * 4 * math.pi ** 3 * photon.k0)


def moment_small_recoil_integrand(p, photon: PhotonKinematics, f, params: ParticleParams):
    """Magnetic-moment-only integrand with first-order recoil kinematics.

    -mu_a^2 [m^2 k3^2 + |k3 (p.f) + (q3 - k3) p3 f3|^2] / (p3^2 q^2 4 pi^3 k0).
    """
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=complex)
    m = params.mass
    r = small_recoil_transfer(p, photon, m)
    k3 = photon.k[2]
    p3 = p[..., 2]
    amp = k3 * (p @ f) + (r.q3 - k3) * p3 * f[2]
    return -params.mu_a ** 2 * (m * m * k3 ** 2 + np.abs(amp) ** 2) / (
        p3 ** 2 * r.q2 * 4 * math.pi ** 3 * photon.k0)


# --------------------------------------------------------------------------
# integration over the packet


def _support_kinematics(packet, rule, photon, params):
    sk = solve_final_momentum(rule.nodes, photon, params.mass, strict=False)
    closed = ~sk.is_open
    if np.any(closed):
        mass_closed = float(np.sum(np.abs(rule.weights[closed])))
        if mass_closed > CLOSED_MASS_LIMIT:
            raise ChannelClosedOnSupport(
                f"{mass_closed:.3g} of the packet cannot emit k0 = {photon.k0:g} (limit {CLOSED_MASS_LIMIT:g})")
    return sk, closed


def _open_subset(rule, sk, closed):
    if not np.any(closed):
        return rule.nodes, rule.weights, sk
    keep = ~closed
    nodes = rule.nodes[keep]
    sub = ScatteringKinematics(p=nodes, photon=sk.photon, mass=sk.mass, p3_final=sk.p3_final[keep],
                               q3=sk.q3[keep], is_open=sk.is_open[keep])
    return nodes, rule.weights[keep], sub


def integrate_packet(packet, terms_fn: Callable, photon: PhotonKinematics, params: ParticleParams,
                     rtol: float = DEFAULT_RTOL, check_support: bool = True):
    """Adaptive packet-aligned quadrature of a vector-valued integrand.

    ``terms_fn(nodes, sk, zeta)`` returns an array (M, K).  Returns
    (integral (K,), error estimate, flags).
    """
    flags = []
    previous = None
    estimate = None
    for rule in quadrature.rule_ladder(packet):
        if check_support:
            sk, closed = _support_kinematics(packet, rule, photon, params)
            nodes, weights, sk = _open_subset(rule, sk, closed)
            if np.any(closed):
                flags.append("closed-nodes-dropped")
        else:
            nodes, weights, sk = rule.nodes, rule.weights, None
        zeta = packet.effective_spin(nodes)
        vals = terms_fn(nodes, sk, zeta)
        estimate = np.einsum("m,mk->k", weights, vals)
        if previous is not None:
            err = float(np.max(np.abs(estimate - previous)))
            scale = abs(float(np.sum(estimate)))
            if err <= rtol * scale or err == 0.0:
                return estimate, err, tuple(sorted(set(flags)))
        previous = estimate
    err = float(np.max(np.abs(estimate - previous))) if previous is not None else math.inf
    warnings.warn(f"quadrature did not reach rtol={rtol:g} (estimated error {err:.3g})", AccuracyWarning)
    flags.append("accuracy-warning")
    return estimate, err, tuple(sorted(set(flags)))


def probability(packet, photon: PhotonKinematics, pol: PolarizationBasis, params: ParticleParams,
                method: str = "general", rtol: float = DEFAULT_RTOL) -> RadiationResult:
    """dP/d^3k for a packet, integrating the fixed-momentum integrand over c(p)."""
    if method == "general":
        fn = integrand_general
        tag = "GeneralQuadrature"
    elif method == "fastpath":
        fn = integrand_contracted
        tag = "ContractionFastPath"
    else:
        raise ValueError(f"unknown method {method!r}")

    def terms(nodes, sk, zeta):
        return fn(nodes, photon, pol, params, zeta, breakdown=True, sk=sk)

    est, err, flags = integrate_packet(packet, terms, photon, params, rtol)
    return RadiationResult.from_terms(est, tag, err, flags)


NORMAL_INCIDENCE_TOL = 1e-3


def is_normal_incidence(packet, tol: float = NORMAL_INCIDENCE_TOL) -> bool:
    """True when c(p) is concentrated near p_perp = 0 (mean and spread both small)."""
    center = packet_center(packet)
    spread_perp = packet_spread(packet)[0]
    scale = abs(center[2])
    return bool(np.hypot(center[0], center[1]) <= 1e-12 * scale and spread_perp <= tol * scale)


def probability_polarization_summed(packet, photon: PhotonKinematics, params: ParticleParams,
                                    rtol: float = DEFAULT_RTOL, method: str = "auto") -> RadiationResult:
    """Probability summed over the two photon polarizations.

    ``method`` 'bracket' uses the closed normal-incidence bracket, 'modes'
    sums the in-plane and orthogonal linear modes, 'auto' picks the bracket
    for normal-incidence packets.
    """
    if method == "auto":
        method = "bracket" if is_normal_incidence(packet) else "modes"
    if method == "bracket":
        def terms(nodes, sk, zeta):
            return summed_bracket_integrand(nodes, photon, params, breakdown=True, sk=sk)

        est, err, flags = integrate_packet(packet, terms, photon, params, rtol)
        return RadiationResult.from_terms(est, "GeneralQuadrature(summed-bracket)", err, flags)
    if method == "modes":
        a = probability(packet, photon, build_polarization(photon, "in-plane"), params, rtol=rtol)
        b = probability(packet, photon, build_polarization(photon, "orthogonal"), params, rtol=rtol)
        terms = (a.term_e2 + b.term_e2, a.term_emu + b.term_emu, a.term_mu2 + b.term_mu2)
        return RadiationResult.from_terms(terms, "GeneralQuadrature(mode-sum)", a.error + b.error,
                                          tuple(sorted(set(a.flags + b.flags))))
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# closed forms


CLOSED_FORMS = ("OrthoPolNormal", "OrthoPolNonrel", "SummedPolSmallRecoil",
                "TwistedE_inplane", "TwistedE_ortho", "TwistedN_inplane", "TwistedN_ortho")


def _regime_flags(packet, photon, params, twisted: bool) -> list[str]:
    flags = []
    m = params.mass
    center = packet_center(packet)
    p3 = center[2]
    p0 = math.sqrt(m * m + float(center @ center))
    chi = photon.k0 * p0 / p3 ** 2
    if chi >= CHI_SMALL:
        flags.append(f"recoil chi={chi:.3g} not small")
    if abs(p3 / p0) < 1e-2:
        flags.append("beta3 close to zero: outside validity")
    sp_perp, sp_long = packet_spread(packet)
    if sp_long > 0.2 * abs(p3):
        flags.append("longitudinal spread not small against |p|")
    if twisted:
        if not isinstance(packet, TwistedPacket):
            raise TypeError("twisted closed forms need a TwistedPacket")
        par = (abs(packet.l) + 1) * packet.sigma_perp ** 2 / m ** 2
        if par > 0.1:
            flags.append(f"non-paraxial parameter {par:.3g} not small")
        p_th, t_th = twisted_recoil_threshold(m, packet.sigma_perp, packet.l, photon.k0, photon.n_perp)
        if abs(p3) < p_th:
            flags.append(f"recoil corrections may exceed the spread correction below kinetic energy {t_th:.4g}")
    else:
        general, specific, label = angle_dispersion_bound(center, photon, m)
        if (sp_perp / abs(p3)) ** 2 > 0.1 * general:
            flags.append("angular spread of the packet is not small against the recoil bound")
    for fl in flags:
        warnings.warn(fl, RegimeWarning)
    return flags


def closed_form(name: str, photon: PhotonKinematics, params: ParticleParams, packet,
                leading_only: bool = False) -> RadiationResult:
    """Evaluate a named closed-form limit at the packet's central momentum.

    Names: OrthoPolNormal, OrthoPolNonrel, SummedPolSmallRecoil (sharp
    momentum peak on the mirror normal); TwistedE_inplane, TwistedE_ortho,
    TwistedN_inplane, TwistedN_ortho (twisted packet, including the first
    correction in (|l|+1) sigma_perp^2 unless ``leading_only``).
    """
    if name not in CLOSED_FORMS:
        raise UnknownForm(f"unknown closed form {name!r}; known: {', '.join(CLOSED_FORMS)}")
    twisted = name.startswith("Twisted")
    flags = _regime_flags(packet, photon, params, twisted)
    e, mu, m = params.charge, params.mu_a, params.mass
    k0 = photon.k0
    n3, nperp = photon.n3, photon.n_perp
    center = packet_center(packet)
    pmag2 = float(center @ center)
    g2 = 1.0 + pmag2 / m ** 2
    b3sq = center[2] ** 2 / (m * m + pmag2)
    den = n3 ** 2 + nperp ** 2 * g2
    pi3 = math.pi ** 3
    if name in ("OrthoPolNormal", "OrthoPolNonrel"):
        geo = n3 ** 2 / (m * m * (den if name == "OrthoPolNormal" else 1.0)) / (16 * pi3 * k0)
        terms = (e * e * geo, 4 * m * e * mu * geo, 4 * m * m * mu * mu * geo)
    elif name == "SummedPolSmallRecoil":
        pre = 1.0 / (den * 8 * pi3 * k0)
        terms = (pre * (2 * nperp ** 2 * g2 * e * e * b3sq * g2 / (k0 ** 2 * den) + e * e * n3 ** 2 / m ** 2),
                 pre * 4 * e * mu * n3 ** 2 / m,
                 pre * (2 * nperp ** 2 * g2 * mu * mu + 4 * mu * mu * n3 ** 2))
    else:
        s = 0.0 if leading_only else (abs(packet.l) + 1) * packet.sigma_perp ** 2
        p2 = packet.p ** 2
        d = m * m + nperp ** 2 * p2
        n2 = nperp ** 2
        if name == "TwistedE_inplane":
            corr = m ** 4 * (1 - 10 * n2 + 10 * n2 ** 2) - 2 * m * m * p2 * n2 * (5 - 7 * n2 + n2 ** 2) + p2 ** 2 * n2 ** 2
            val = e * e * p2 / d ** 2 * (n2 * (m * m + p2) + s / d ** 2 * corr) / (4 * pi3 * k0 ** 3)
            terms = (val, 0.0, 0.0)
        elif name == "TwistedE_ortho":
            terms = (e * e * p2 * s / d ** 2 * n3 ** 2 / (4 * pi3 * k0 ** 3), 0.0, 0.0)
        elif name == "TwistedN_inplane":
            terms = (0.0, 0.0, mu * mu * (1 - s * n3 ** 2 / d) / (4 * pi3 * k0))
        else:
            corr = m ** 4 * (1 - 3 * n2) - m * m * p2 * n2 * (4 - n2) - p2 ** 2 * n2 ** 2
            terms = (0.0, 0.0, mu * mu / d * (m * m - s / d ** 2 * corr) * n3 ** 2 / (4 * pi3 * k0))
    return RadiationResult.from_terms(terms, f"ClosedForm({name})", 0.0, flags)


# --------------------------------------------------------------------------
# detector scans


@dataclass(frozen=True)
class ScanGrid:
    k0: tuple
    theta: tuple
    phi: tuple = (0.0,)
    theta_max: float = THETA_MAX_DEFAULT

    def __post_init__(self):
        if any(k <= 0 for k in self.k0):
            raise ValueError("photon energies must be positive")
        if any(not (0.0 <= t <= self.theta_max) for t in self.theta):
            raise ValueError(f"theta values must lie in [0, {self.theta_max}]")

    def points(self):
        for k0 in self.k0:
            for th in self.theta:
                for ph in self.phi:
                    yield k0, th, ph


@dataclass(frozen=True)
class ScanPoint:
    k0: float
    theta: float
    phi: float
    result: Optional[RadiationResult]
    error: Optional[str] = None


@dataclass(frozen=True)
class DetectorScan:
    grid: ScanGrid
    polarization: str
    points: tuple
    applicability: tuple = ()

    def values(self) -> np.ndarray:
        return np.array([np.nan if pt.result is None else pt.result.value for pt in self.points])


def worker_count() -> int:
    env = os.environ.get("TRANSRAD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def evaluate_point(packet, photon: PhotonKinematics, pol_mode: str, params: ParticleParams,
                   method: str = "general", rtol: float = DEFAULT_RTOL) -> RadiationResult:
    """One detector point: ``pol_mode`` is a polarization mode or 'summed'."""
    if method.startswith("closedform:"):
        return closed_form(method.split(":", 1)[1], photon, params, packet)
    if pol_mode == "summed":
        return probability_polarization_summed(packet, photon, params, rtol=rtol)
    pol = build_polarization(photon, pol_mode)
    return probability(packet, photon, pol, params, method=method, rtol=rtol)


def scan(packet, grid: ScanGrid, pol_mode: str, params: ParticleParams, method: str = "general",
         rtol: float = DEFAULT_RTOL, workers: Optional[int] = None,
         context: ApplicabilityContext = ApplicabilityContext()) -> DetectorScan:
    """Evaluate the probability on a detector grid; per-point failures are recorded, not raised."""
    pts = list(grid.points())

    def task(pt):
        k0, th, ph = pt
        try:
            photon = PhotonKinematics(k0, th, ph)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegimeWarning)
                warnings.simplefilter("ignore", AccuracyWarning)
                res = evaluate_point(packet, photon, pol_mode, params, method, rtol)
            return ScanPoint(k0, th, ph, res)
        except (TransradError, ValueError) as exc:
            return ScanPoint(k0, th, ph, None, f"{type(exc).__name__}: {exc}")

    n = workers if workers is not None else worker_count()
    if n <= 1 or len(pts) == 1:
        results = [task(pt) for pt in pts]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(task, pts))
    center = packet_center(packet)
    notes = []
    for k0 in grid.k0:
        for th in (min(grid.theta), max(grid.theta)):
            try:
                sk = solve_final_momentum(center, PhotonKinematics(k0, th, grid.phi[0]), params.mass)
                notes.append(applicability(sk, context))
            except (ChannelClosed, ValueError):
                continue
    return DetectorScan(grid=grid, polarization=pol_mode, points=tuple(results), applicability=tuple(notes))
