"""Momenta, photon polarization vectors, momentum transfer and regime checks.

Conventions: natural units, metric (+,-,-,-), all 3-vectors are contravariant
components.  The mirror occupies z > 0 side of the detector geometry: the
particle moves towards the plate with p3 < 0 and the photon is detected at
n3 >= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ChannelClosed, RegimeViolation
from .units import (E_CHARGE, ELECTRON_ANOMALY, ELECTRON_MASS_EV, NEUTRON_MASS_EV,
                    NEUTRON_MOMENT_NUCLEAR, NUCLEAR_MAGNETON, PROTON_ANOMALY, PROTON_MASS_EV)

THETA_MAX_DEFAULT = math.pi / 2 - 1e-3

# chi thresholds separating the recoil regimes
CHI_SMALL = 0.1
CHI_REJECT = 1.0

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class ParticleParams:
    """Couplings of a spin-1/2 particle: mass, charge and anomalous moment.

    For charged particles mu_a = a*e/(2m) is enforced.  Neutral particles
    set ``charge=0`` and give ``mu_a``; their ``anomaly`` is then reported
    in units of e/(2m) with e the elementary charge.
    """

    mass: float
    charge: float = 0.0
    mu_a: float = 0.0
    anomaly: Optional[float] = None

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.charge != 0.0:
            a = 0.0 if self.anomaly is None else self.anomaly
            if self.anomaly is None and self.mu_a != 0.0:
                a = 2.0 * self.mass * self.mu_a / self.charge
            expected = a * self.charge / (2.0 * self.mass)
            mu = self.mu_a if self.mu_a != 0.0 else expected
            if abs(mu - expected) > 4 * np.finfo(float).eps * abs(expected):
                raise ValueError("inconsistent couplings: mu_a must equal a*e/(2m)")
            object.__setattr__(self, "anomaly", a)
            object.__setattr__(self, "mu_a", expected)
        elif self.anomaly is None:
            object.__setattr__(self, "anomaly", 2.0 * self.mass * self.mu_a / E_CHARGE)

    @classmethod
    def charged(cls, mass: float, charge: float, anomaly: float = 0.0) -> "ParticleParams":
        return cls(mass=mass, charge=charge, mu_a=anomaly * charge / (2.0 * mass), anomaly=anomaly)

    @classmethod
    def neutral(cls, mass: float, mu_a: float) -> "ParticleParams":
        return cls(mass=mass, charge=0.0, mu_a=mu_a)

    @classmethod
    def electron(cls) -> "ParticleParams":
        return cls.charged(ELECTRON_MASS_EV, -E_CHARGE, ELECTRON_ANOMALY)

    @classmethod
    def proton(cls) -> "ParticleParams":
        return cls.charged(PROTON_MASS_EV, E_CHARGE, PROTON_ANOMALY)

    @classmethod
    def neutron(cls) -> "ParticleParams":
        return cls.neutral(NEUTRON_MASS_EV, NEUTRON_MOMENT_NUCLEAR * NUCLEAR_MAGNETON)

    @property
    def e_plus_2m_mu(self) -> float:
        return self.charge + 2.0 * self.mass * self.mu_a


@dataclass(frozen=True)
class PhotonKinematics:
    """Photon energy and direction; ``theta`` is measured from the mirror normal."""

    k0: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (self.k0 > 0 and math.isfinite(self.k0)):
            raise ValueError(f"photon energy must be positive, got {self.k0}")
        if not (0.0 <= self.theta < math.pi / 2):
            raise ValueError(f"theta must lie in [0, pi/2), got {self.theta}")
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")
        object.__setattr__(self, "phi", self.phi % (2 * math.pi))

    @property
    def n(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    @property
    def n3(self) -> float:
        return math.cos(self.theta)

    @property
    def n_perp(self) -> float:
        return math.sin(self.theta)

    @property
    def k(self) -> np.ndarray:
        return self.k0 * self.n


POLARIZATION_MODES = ("helicity+", "helicity-", "in-plane", "orthogonal", "custom")


@dataclass(frozen=True, eq=False)
class PolarizationBasis:
    """Photon polarization vector f and its mirror-reflected partners f_r.

    The common phase is fixed so that f3 is real.
    """

    mode: str
    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=complex)
        if f[2].imag != 0.0:
            # rotate the common phase so that f3 is real, keeping its sign when already real
            f = f * np.exp(-1j * np.angle(f[2]))
            f[2] = f[2].real
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.f.imag == 0.0))

    def reflected(self, r: int) -> np.ndarray:
        """f_r = r f + (1 - r) e3 f3."""
        out = r * self.f
        out = out.copy()
        out[2] = out[2] + (1 - r) * self.f[2]
        return out


def build_polarization(photon: PhotonKinematics, mode: str = "in-plane",
                       vector=None) -> PolarizationBasis:
    """Polarization vector of the detected photon.

    ``mode`` is one of 'helicity+', 'helicity-', 'in-plane', 'orthogonal' or
    'custom' (then ``vector`` must be transverse to n).
    """
    th, ph = photon.theta, photon.phi
    ct, st, cp, sp = math.cos(th), math.sin(th), math.cos(ph), math.sin(ph)
    if mode in ("helicity+", "helicity-"):
        lam = 1.0 if mode == "helicity+" else -1.0
        f = np.array([cp * ct - 1j * lam * sp, sp * ct + 1j * lam * cp, -st]) / math.sqrt(2.0)
    elif mode == "in-plane":
        f = np.array([ct * cp, ct * sp, -st], dtype=complex)
    elif mode == "orthogonal":
        f = np.array([-sp, cp, 0.0], dtype=complex)
    elif mode == "custom":
        if vector is None:
            raise ValueError("custom polarization needs a vector")
        f = np.asarray(vector, dtype=complex)
        if f.shape != (3,):
            raise ValueError("polarization vector must have 3 components")
        norm = math.sqrt(float(np.vdot(f, f).real))
        if norm == 0:
            raise ValueError("polarization vector must be nonzero")
        f = f / norm
        if abs(np.dot(f, photon.n)) > 1e-10:
            raise ValueError("polarization vector must be transverse to the photon direction")
    else:
        raise ValueError(f"unknown polarization mode {mode!r}; expected one of {POLARIZATION_MODES}")
    return PolarizationBasis(mode=mode, f=f)


@dataclass(frozen=True, eq=False)
class ScatteringKinematics:
    """Incident and outgoing particle momenta for a fixed emitted photon.

    Array fields carry an optional leading batch shape.  Only the branch in
    which the particle keeps moving into the mirror (p3' < 0) is represented.
    """

    p: np.ndarray  # (..., 3)
    photon: PhotonKinematics
    mass: float
    p3_final: np.ndarray  # (...)
    q3: np.ndarray  # p3 - p3', computed without cancellation
    is_open: np.ndarray = field(repr=False)

    @property
    def k(self) -> np.ndarray:
        return self.photon.k

    @property
    def k0(self) -> float:
        return self.photon.k0

    @property
    def p0(self) -> np.ndarray:
        return np.sqrt(self.mass ** 2 + np.sum(self.p ** 2, axis=-1))

    @property
    def p_final(self) -> np.ndarray:
        k = self.k
        out = np.empty_like(self.p)
        out[..., 0] = self.p[..., 0] - k[0]
        out[..., 1] = self.p[..., 1] - k[1]
        out[..., 2] = self.p3_final
        return out

    @property
    def p0_final(self) -> np.ndarray:
        return self.p0 - self.k0

    @property
    def q(self) -> np.ndarray:
        """Four-momentum transfer q = p - p' (contravariant)."""
        k = self.k
        shape = self.q3.shape + (4,)
        out = np.empty(shape)
        out[..., 0] = self.k0
        out[..., 1] = k[0]
        out[..., 2] = k[1]
        out[..., 3] = self.q3
        return out

    @property
    def q2(self) -> np.ndarray:
        k3 = self.k[2]
        return (k3 - self.q3) * (k3 + self.q3)

    @property
    def beta(self) -> np.ndarray:
        return self.p / self.p0[..., None]

    @property
    def beta3(self) -> np.ndarray:
        return self.p[..., 2] / self.p0

    @property
    def gamma(self) -> np.ndarray:
        return self.p0 / self.mass

    @property
    def chi(self) -> np.ndarray:
        """Quantum recoil parameter k0/(p3 beta3)."""
        return self.k0 * self.p0 / self.p[..., 2] ** 2

    def denominators(self) -> np.ndarray:
        """D_r = p'^3 - p^3 + r k^3 for r = (+1, -1), stacked on the last axis.

        These are contravariant components; both are positive.  The
        corresponding lower-index combinations p'_3 - p_3 + r k_3 = -D_r are
        negative.
        """
        k3 = self.k[2]
        return np.stack([-self.q3 + k3, -self.q3 - k3], axis=-1)

    def covariant_denominators(self) -> np.ndarray:
        return -self.denominators()

    def recoil_regime(self) -> np.ndarray:
        chi = np.asarray(self.chi)
        return np.where(chi < CHI_SMALL, "small", np.where(chi < CHI_REJECT, "moderate", "large"))


def _radicand(p: np.ndarray, photon: PhotonKinematics, m: float):
    k = photon.k
    k0 = photon.k0
    p0 = np.sqrt(m * m + np.sum(p * p, axis=-1))
    p3 = p[..., 2]
    # p3^2 - p3'^2, kept separate to avoid cancellation when p' is close to p
    delta = 2.0 * k0 * p0 - 2.0 * (p[..., 0] * k[0] + p[..., 1] * k[1]) - k[2] ** 2
    rad = p3 * p3 - delta
    energy_ok = p0 - k0 > m
    return p0, delta, rad, energy_ok


def solve_final_momentum(p, photon: PhotonKinematics, m: float, strict: bool = True) -> ScatteringKinematics:
    """Outgoing momentum after emitting ``photon`` (recoil branch p3' < 0).

    ``p`` may be a single 3-vector or an array of shape (..., 3).  With
    ``strict`` a closed channel anywhere raises ChannelClosed; otherwise the
    closed points are marked in ``is_open`` and carry NaN.
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError("momentum must have 3 components")
    incoming = p[..., 2] < 0
    if strict and not np.all(incoming):
        raise ValueError("incident momentum must point into the mirror (p3 < 0)")
    p0, delta, rad, energy_ok = _radicand(p, photon, m)
    is_open = energy_ok & (rad > 0) & incoming
    if strict and not np.all(is_open):
        raise ChannelClosed(
            f"photon energy {photon.k0:g} cannot be emitted: p0 - k0 - m = "
            f"{np.min(p0 - photon.k0 - m):.6g}, min radicand {np.min(rad):.6g}")
    with np.errstate(invalid="ignore"):
        root = np.where(is_open, np.sqrt(np.where(is_open, rad, 1.0)), np.nan)
        abs_p3 = -p[..., 2]
        q3 = -delta / (abs_p3 + root)
        q3 = np.where(is_open, q3, np.nan)
    p3f = -root
    return ScatteringKinematics(p=p, photon=photon, mass=m, p3_final=p3f, q3=q3, is_open=is_open)


def sigma_plus_final_momentum(p, photon: PhotonKinematics, m: float) -> np.ndarray:
    """Diagnostic only: outgoing momentum on the reflected branch (p3' > 0).

    This branch describes scattering of the particle on its image and is
    never included in probabilities.
    """
    p = np.asarray(p, dtype=float)
    p0, delta, rad, energy_ok = _radicand(p, photon, m)
    if not np.all(energy_ok & (rad > 0)):
        raise ChannelClosed("photon energy too large for this momentum")
    out = p - np.concatenate([photon.k[:2], [0.0]])
    out[..., 2] = np.sqrt(rad)
    return out


@dataclass(frozen=True)
class RecoilApproximation:
    """Small-recoil approximants of q3, q3 - r k3 and q^2."""

    regime: str
    q3: np.ndarray
    q3_minus_k3: np.ndarray  # r = +1
    q3_plus_k3: np.ndarray  # r = -1
    q2: np.ndarray

    def q3_minus_rk3(self, r: int) -> np.ndarray:
        return self.q3_minus_k3 if r == 1 else self.q3_plus_k3


def small_recoil_transfer(p, photon: PhotonKinematics, m: float) -> RecoilApproximation:
    """First-order recoil expressions for arbitrary incident momentum."""
    p = np.asarray(p, dtype=float)
    p0 = np.sqrt(m * m + np.sum(p * p, axis=-1))
    b3 = p[..., 2] / p0
    n = photon.n
    bn = (p[..., 0] * n[0] + p[..., 1] * n[1]) / p0
    k0 = photon.k0
    q3 = k0 * (1.0 - bn) / b3
    qm = k0 * (1.0 - bn - b3 * n[2]) / b3
    qp = k0 * (1.0 - bn + b3 * n[2]) / b3
    q2 = -k0 ** 2 * ((1.0 - bn) ** 2 - b3 ** 2 * n[2] ** 2) / b3 ** 2
    return RecoilApproximation("small", q3, qm, qp, q2)


def recoil_approximations(sk: ScatteringKinematics, regime: str = "small") -> RecoilApproximation:
    """Approximants of the momentum transfer in the small-recoil limit.

    ``regime`` selects the general first-order form ('small'), its
    nonrelativistic limit ('nonrel') or the ultrarelativistic limit
    ('ultra').  Raises RegimeViolation when chi >= 1.
    """
    chi = np.asarray(sk.chi)
    if np.any(chi >= CHI_REJECT):
        raise RegimeViolation(f"recoil parameter chi = {np.max(chi):.3g} >= 1; approximation invalid")
    if regime == "small":
        return small_recoil_transfer(sk.p, sk.photon, sk.mass)
    k0 = sk.k0
    b3 = sk.beta3
    if regime == "nonrel":
        q3 = k0 / b3
        return RecoilApproximation("nonrel", q3, q3, q3, -(k0 / b3) ** 2)
    if regime == "ultra":
        n = sk.photon.n
        g = sk.gamma
        bperp = sk.beta[..., :2]
        d2 = (bperp[..., 0] - n[0]) ** 2 + (bperp[..., 1] - n[1]) ** 2
        small = k0 * (1.0 + d2 * g ** 2) / (2.0 * g ** 2)
        s = np.sign(b3)
        # the transfer q3 - r k3 is small for r = sign(beta3)
        q_small = s * small
        q_large = 2.0 * s * k0
        qm = np.where(s > 0, q_small, q_large)
        qp = np.where(s > 0, q_large, q_small)
        q2 = -k0 ** 2 * (1.0 + d2 * g ** 2) / g ** 2
        return RecoilApproximation("ultra", s * k0, qm, qp, q2)
    raise ValueError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class ApplicabilityContext:
    """Optional experimental scales; None means not supplied."""

    plate_size: Optional[float] = None  # L_perp
    interaction_time: Optional[float] = None  # T
    layer_thickness: Optional[float] = None  # delta
    packet_scale_long: Optional[float] = None  # p3^phi
    packet_scale_perp: Optional[float] = None  # p_perp^phi


# "much less" and "of order or larger" are interpreted as ratio thresholds
MUCH = 10.0


@dataclass(frozen=True)
class ApplicabilityReport:
    formation_length: float  # the larger of the two r = +-1 scales
    formation_lengths: tuple  # (r = +1, r = -1)
    chi: float
    recoil_regime: str
    recoil_small: bool
    channel_open: bool
    branch_sigma_plus_suppressed: Optional[bool]
    time_vs_formation: Optional[bool]
    time_vs_packet: Optional[bool]
    plate_vs_packet: Optional[bool]
    sharp_boundary: Optional[bool]
    angle_dispersion_bound: float
    angle_dispersion_bound_regime: float
    regime_label: str
    notes: tuple = ()

    def warnings(self) -> list[str]:
        out = list(self.notes)
        if not self.recoil_small:
            out.append(f"recoil parameter chi = {self.chi:.3g} is not small")
        for name in ("time_vs_formation", "time_vs_packet", "plate_vs_packet", "sharp_boundary"):
            if getattr(self, name) is False:
                out.append(f"applicability condition {name} fails")
        return out


def formation_lengths(p, photon: PhotonKinematics, m: float) -> tuple[float, float]:
    """Longitudinal saturation scales 1/|q3 - r k3| for r = +1, -1 (small recoil)."""
    p = np.asarray(p, dtype=float)
    p0 = math.sqrt(m * m + float(p @ p))
    b3 = p[2] / p0
    n = photon.n
    bn = (p[0] * n[0] + p[1] * n[1]) / p0
    out = []
    for r in (1, -1):
        out.append(abs(b3) / (photon.k0 * (1.0 - bn + r * abs(b3) * n[2])))
    return tuple(out)


def angle_dispersion_bound(p, photon: PhotonKinematics, m: float) -> tuple[float, float, str]:
    """Upper scale for the angular spread of the packet around the mirror normal.

    Returns (|q^2|/p3^2 from first-order recoil, the regime-specific
    estimate, regime label).  The regime-specific estimates are
    (k0/(p3 beta3))^2 for slow particles, k0^2 (1 + n_perp^2 gamma^2)/(gamma p3)^2
    for fast particles at small n_perp and k0^2/p3^2 at large n_perp.
    """
    p = np.asarray(p, dtype=float)
    p0 = math.sqrt(m * m + float(p @ p))
    p3 = p[2]
    b3 = p3 / p0
    g = p0 / m
    k0 = photon.k0
    general = float(abs(small_recoil_transfer(p, photon, m).q2)) / p3 ** 2
    if g < 1.1:
        return general, (k0 / (p3 * b3)) ** 2, "nonrelativistic"
    nperp = photon.n_perp
    if nperp * g < 1.0 or nperp < 0.25:
        return general, k0 ** 2 * (1.0 + nperp ** 2 * g ** 2) / (g * p3) ** 2, "ultrarelativistic"
    return general, (k0 / p3) ** 2, "ultrarelativistic"


def twisted_recoil_threshold(m: float, sigma_perp: float, l: int, k0: float,
                             n_perp: float = 0.0) -> tuple[float, float]:
    """Minimal momentum (and kinetic energy) for which the transverse-spread
    correction of a twisted packet exceeds the quantum-recoil correction.

    Solves (|l|+1) sigma_perp^2/m^2 = k0^2 (n3^2 + n_perp^2 gamma^2)/p^2,
    where the right side equals k0^2/p^2 + k0^2 n_perp^2/m^2.
    """
    lhs = (abs(l) + 1) * sigma_perp ** 2 / m ** 2 - (k0 * n_perp / m) ** 2
    if lhs <= 0:
        return math.inf, math.inf
    p = k0 / math.sqrt(lhs)
    return p, math.hypot(p, m) - m


def applicability(sk: ScatteringKinematics, context: ApplicabilityContext = ApplicabilityContext()) -> ApplicabilityReport:
    """Model-applicability flags at a single kinematic point (advisory only)."""
    p = np.asarray(sk.p, dtype=float)
    if p.shape != (3,):
        raise ValueError("applicability is evaluated at a single incident momentum")
    m = sk.mass
    photon = sk.photon
    chi = float(sk.chi)
    regime = "small" if chi < CHI_SMALL else ("moderate" if chi < CHI_REJECT else "large")
    lz = formation_lengths(p, photon, m)
    ell = max(lz)
    b3 = abs(float(sk.beta3))
    ctx = context
    delta = ctx.layer_thickness
    plus_len = 1.0 / (2.0 * abs(p[2]))
    sigma_plus = None if delta is None else bool(delta >= MUCH * plus_len)
    sharp = None if delta is None else bool(delta * MUCH <= min(lz))
    T = ctx.interaction_time
    t_form = None if T is None else bool(T * b3 >= MUCH * ell)
    t_pack = None if (T is None or ctx.packet_scale_long is None) else bool(T * b3 * ctx.packet_scale_long >= 1.0)
    plate = None if (ctx.plate_size is None or ctx.packet_scale_perp is None) else bool(
        ctx.plate_size * ctx.packet_scale_perp >= 1.0)
    general, specific, label = angle_dispersion_bound(p, photon, m)
    notes = (f"packet angular dispersion must satisfy dtheta^2 << {specific:.3g} ({label} estimate)",)
    return ApplicabilityReport(
        formation_length=ell, formation_lengths=lz, chi=chi, recoil_regime=regime,
        recoil_small=chi < CHI_SMALL, channel_open=bool(np.all(sk.is_open)),
        branch_sigma_plus_suppressed=sigma_plus, time_vs_formation=t_form,
        time_vs_packet=t_pack, plate_vs_packet=plate, sharp_boundary=sharp,
        angle_dispersion_bound=general, angle_dispersion_bound_regime=specific,
        regime_label=label, notes=notes)
