"""Run configuration: strict TOML with explicit units at the boundary."""
from __future__ import annotations

import hashlib
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import units
from .classical import BunchMember
from .dirac import SpinDensityMatrix
from .errors import ConfigError, PacketConfigError
from .kinematics import POLARIZATION_MODES, THETA_MAX_DEFAULT, ParticleParams
from .radiation import CLOSED_FORMS, ScanGrid
from .wavepackets import GaussianSuperposition, TwistedPacket

SCHEMA = {
    "particle": {"kind", "mass", "charge", "anomaly", "mu_a"},
    "packet": {"type", "momentum", "kinetic_energy", "incidence", "azimuth", "sigma_perp", "sigma_long",
               "l", "spin", "centers", "weights"},
    "detector": {"k0", "theta", "phi", "polarization"},
    "method": {"name", "rtol", "theta_max"},
    "output": {"path", "format"},
    "bunch": {"count", "spacing", "axis", "positions"},
}
RANGE_KEYS = {"start", "stop", "num", "scale"}
PARTICLE_KINDS = ("electron", "proton", "neutron", "custom")
PACKET_TYPES = ("gaussian", "twisted")


def _key_line(text: str, table: str, key: Optional[str]) -> Optional[int]:
    """Line number (1-based) of ``key`` inside ``[table]``, or of the table header."""
    current = None
    header_line = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]$", line)
        if m:
            current = m.group(1)
            if current == table:
                header_line = n
            continue
        if current == table and key is not None:
            if re.match(rf"^{re.escape(key)}\s*=", line) or re.search(rf"[{{,]\s*{re.escape(key)}\s*=", line):
                return n
    return header_line


@dataclass
class RunConfig:
    params: ParticleParams
    packet: Any
    grid: Optional[ScanGrid]
    polarization: str
    method: str
    rtol: float
    output_path: Optional[str]
    output_format: str
    members: tuple = ()
    digest: str = ""
    source: str = ""
    raw: dict = field(default_factory=dict)


class _Loader:
    def __init__(self, text: str):
        self.text = text

    def fail(self, msg, table=None, key=None):
        raise ConfigError(msg, _key_line(self.text, table, key) if table else None)

    def quantity(self, table, key, value, parser):
        if not isinstance(value, str):
            self.fail(f"{table}.{key} needs a quantity with a unit, e.g. '1 keV'", table, key)
        try:
            return parser(value)
        except units.UnitError as exc:
            self.fail(f"{table}.{key}: {exc}", table, key)

    def number(self, table, key, value, integer=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{table}.{key} must be a number", table, key)
        if integer and not isinstance(value, int):
            self.fail(f"{table}.{key} must be an integer", table, key)
        return value

    def axis_values(self, table, key, value, parser):
        if isinstance(value, str):
            return (self.quantity(table, key, value, parser),)
        if isinstance(value, list):
            return tuple(self.quantity(table, key, v, parser) for v in value)
        if isinstance(value, dict):
            extra = set(value) - RANGE_KEYS
            if extra:
                self.fail(f"unknown key {sorted(extra)[0]!r} in {table}.{key}", table, sorted(extra)[0])
            for req in ("start", "stop", "num"):
                if req not in value:
                    self.fail(f"{table}.{key} needs '{req}'", table, key)
            a = self.quantity(table, "start", value["start"], parser)
            b = self.quantity(table, "stop", value["stop"], parser)
            n = self.number(table, "num", value["num"], integer=True)
            if n < 1:
                self.fail(f"{table}.{key}.num must be >= 1", table, "num")
            scale = value.get("scale", "linear")
            if scale == "linear":
                vals = np.linspace(a, b, n)
            elif scale == "log":
                if a <= 0 or b <= 0:
                    self.fail(f"{table}.{key}: log scale needs positive bounds", table, key)
                vals = np.geomspace(a, b, n)
            else:
                self.fail(f"{table}.{key}.scale must be 'linear' or 'log'", table, "scale")
            return tuple(float(v) for v in vals)
        self.fail(f"{table}.{key} must be a quantity, a list or a range table", table, key)


def _particle(ld: _Loader, tab: dict) -> ParticleParams:
    kind = tab.get("kind", "custom")
    if kind not in PARTICLE_KINDS:
        ld.fail(f"particle.kind must be one of {', '.join(PARTICLE_KINDS)}", "particle", "kind")
    if kind != "custom":
        extra = set(tab) - {"kind"}
        if extra:
            ld.fail(f"particle.{sorted(extra)[0]} is not allowed with kind = '{kind}'", "particle", sorted(extra)[0])
        return {"electron": ParticleParams.electron, "proton": ParticleParams.proton,
                "neutron": ParticleParams.neutron}[kind]()
    if "mass" not in tab:
        ld.fail("particle.mass is required for a custom particle", "particle")
    mass = ld.quantity("particle", "mass", tab["mass"], units.parse_energy)
    charge = ld.number("particle", "charge", tab.get("charge", 0.0)) * units.E_CHARGE
    if "anomaly" in tab and "mu_a" in tab:
        ld.fail("give either particle.anomaly or particle.mu_a, not both", "particle", "mu_a")
    try:
        if charge != 0.0:
            if "mu_a" in tab:
                mu = ld.quantity("particle", "mu_a", tab["mu_a"], units.parse_inverse_energy)
                return ParticleParams.charged(mass, charge, 2.0 * mass * mu / charge)
            return ParticleParams.charged(mass, charge, ld.number("particle", "anomaly", tab.get("anomaly", 0.0)))
        if "anomaly" in tab:
            ld.fail("neutral particles need particle.mu_a", "particle", "anomaly")
        mu = ld.quantity("particle", "mu_a", tab["mu_a"], units.parse_inverse_energy) if "mu_a" in tab else 0.0
        return ParticleParams.neutral(mass, mu)
    except ValueError as exc:
        ld.fail(f"particle: {exc}", "particle")


def _spin(ld: _Loader, value, twisted: bool):
    if value == "natural":
        return "natural" if twisted else SpinDensityMatrix.natural()
    if twisted:
        if value in (1, -1):
            return value
        ld.fail("packet.spin for a twisted packet must be +1, -1 or 'natural'", "packet", "spin")
    if isinstance(value, list) and len(value) == 3 and all(isinstance(v, (int, float)) for v in value):
        if np.linalg.norm(value) > 1 + 1e-12:
            ld.fail("packet.spin vector must have length <= 1", "packet", "spin")
        return SpinDensityMatrix.from_zeta(np.asarray(value, dtype=float))
    ld.fail("packet.spin must be 'natural' or a 3-vector", "packet", "spin")


def _packet(ld: _Loader, tab: dict, params: ParticleParams):
    ptype = tab.get("type")
    if ptype not in PACKET_TYPES:
        ld.fail(f"packet.type must be one of {', '.join(PACKET_TYPES)}", "packet", "type")
    m = params.mass
    if ("momentum" in tab) == ("kinetic_energy" in tab):
        ld.fail("give exactly one of packet.momentum and packet.kinetic_energy", "packet")
    if "momentum" in tab:
        pmag = ld.quantity("packet", "momentum", tab["momentum"], units.parse_energy)
    else:
        t = ld.quantity("packet", "kinetic_energy", tab["kinetic_energy"], units.parse_energy)
        pmag = math.sqrt(t * (t + 2 * m))
    if pmag <= 0:
        ld.fail("packet momentum must be positive (direction is set by packet.incidence)", "packet")
    for req in ("sigma_perp", "sigma_long"):
        if req not in tab:
            ld.fail(f"packet.{req} is required", "packet")
    sp = ld.quantity("packet", "sigma_perp", tab["sigma_perp"], units.parse_momentum_spread)
    sl = ld.quantity("packet", "sigma_long", tab["sigma_long"], units.parse_momentum_spread)
    try:
        if ptype == "twisted":
            for bad in ("incidence", "azimuth", "centers", "weights"):
                if bad in tab:
                    ld.fail(f"packet.{bad} is not allowed for a twisted packet", "packet", bad)
            l = ld.number("packet", "l", tab.get("l", 0), integer=True)
            return TwistedPacket(p=-pmag, sigma3=sl, sigma_perp=sp, l=l, spin=_spin(ld, tab.get("spin", "natural"), True))
        if "l" in tab:
            ld.fail("packet.l is only allowed for twisted packets", "packet", "l")
        inc = ld.quantity("packet", "incidence", tab.get("incidence", "0 deg"), units.parse_angle)
        az = ld.quantity("packet", "azimuth", tab.get("azimuth", "0 deg"), units.parse_angle)
        mean = pmag * np.array([math.sin(inc) * math.cos(az), math.sin(inc) * math.sin(az), -math.cos(inc)])
        centers = None
        if "centers" in tab:
            cs = tab["centers"]
            if not isinstance(cs, list) or not all(isinstance(c, list) and len(c) == 3 for c in cs):
                ld.fail("packet.centers must be a list of 3-component lists of lengths", "packet", "centers")
            centers = np.array([[ld.quantity("packet", "centers", x, units.parse_length) for x in c] for c in cs])
        weights = None
        if "weights" in tab:
            ws = tab["weights"]
            if not isinstance(ws, list):
                ld.fail("packet.weights must be a list", "packet", "weights")
            weights = np.array([_weight(ld, w) for w in ws])
        return GaussianSuperposition(mean=mean, cov=np.diag([sp ** 2, sp ** 2, sl ** 2]), centers=centers,
                                     weights=weights, spin=_spin(ld, tab.get("spin", "natural"), False))
    except PacketConfigError as exc:
        ld.fail(f"packet: {exc}", "packet")


def _weight(ld, w):
    if isinstance(w, (int, float)) and not isinstance(w, bool):
        return complex(w)
    if isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w):
        return complex(w[0], w[1])
    ld.fail("packet.weights entries must be numbers or [re, im] pairs", "packet", "weights")


def _bunch(ld: _Loader, tab: dict, packet) -> tuple:
    if "positions" in tab:
        if set(tab) - {"positions"}:
            ld.fail("bunch.positions excludes count/spacing/axis", "bunch", "positions")
        pos = tab["positions"]
        if not isinstance(pos, list) or not all(isinstance(c, list) and len(c) == 3 for c in pos):
            ld.fail("bunch.positions must be a list of 3-component lists of lengths", "bunch", "positions")
        pts = [[ld.quantity("bunch", "positions", x, units.parse_length) for x in c] for c in pos]
    else:
        for req in ("count", "spacing"):
            if req not in tab:
                ld.fail(f"bunch.{req} is required", "bunch")
        n = ld.number("bunch", "count", tab["count"], integer=True)
        if n < 1:
            ld.fail("bunch.count must be >= 1", "bunch", "count")
        d = ld.quantity("bunch", "spacing", tab["spacing"], units.parse_length)
        axis = tab.get("axis", [1.0, 0.0, 0.0])
        if not (isinstance(axis, list) and len(axis) == 3 and np.linalg.norm(axis) > 0):
            ld.fail("bunch.axis must be a nonzero 3-vector", "bunch", "axis")
        axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
        pts = [list(j * d * axis) for j in range(n)]
    return tuple(BunchMember(packet, tuple(p)) for p in pts)


def loads(text: str, source: str = "<string>", require_bunch: bool = False) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", int(m.group(1)) if m else None) from None
    ld = _Loader(text)
    for table, body in raw.items():
        if table not in SCHEMA:
            ld.fail(f"unknown table [{table}]", table)
        if not isinstance(body, dict):
            ld.fail(f"{table} must be a table", table)
        for key in body:
            if key not in SCHEMA[table]:
                ld.fail(f"unknown key {key!r} in [{table}]", table, key)
    for req in ("particle", "packet"):
        if req not in raw:
            raise ConfigError(f"missing table [{req}]")
    if require_bunch and "bunch" not in raw:
        raise ConfigError("missing table [bunch]")
    if not require_bunch and "bunch" in raw:
        ld.fail("[bunch] is only used by the nparticle command", "bunch")
    params = _particle(ld, raw["particle"])
    packet = _packet(ld, raw["packet"], params)

    meth = raw.get("method", {})
    method = meth.get("name", "general")
    if not (method in ("general", "fastpath") or (method.startswith("closedform:")
                                                  and method.split(":", 1)[1] in CLOSED_FORMS)):
        ld.fail(f"method.name must be general, fastpath or closedform:NAME with NAME in "
                f"{', '.join(CLOSED_FORMS)}", "method", "name")
    rtol = ld.number("method", "rtol", meth.get("rtol", 1e-4))
    if not 0 < rtol < 1:
        ld.fail("method.rtol must lie in (0, 1)", "method", "rtol")
    theta_max = THETA_MAX_DEFAULT
    if "theta_max" in meth:
        theta_max = ld.quantity("method", "theta_max", meth["theta_max"], units.parse_angle)
        if not 0 < theta_max < math.pi / 2:
            ld.fail("method.theta_max must lie in (0, 90 deg)", "method", "theta_max")

    det = raw.get("detector")
    if det is None:
        raise ConfigError("missing table [detector]")
    for req in ("k0", "theta"):
        if req not in det:
            ld.fail(f"detector.{req} is required", "detector")
    k0 = ld.axis_values("detector", "k0", det["k0"], units.parse_energy)
    theta = ld.axis_values("detector", "theta", det["theta"], units.parse_angle)
    phi = ld.axis_values("detector", "phi", det.get("phi", "0 deg"), units.parse_angle)
    pol = det.get("polarization", "summed")
    allowed = tuple(m for m in POLARIZATION_MODES if m != "custom") + ("summed",)
    if pol not in allowed:
        ld.fail(f"detector.polarization must be one of {', '.join(allowed)}", "detector", "polarization")
    try:
        grid = ScanGrid(k0=k0, theta=theta, phi=phi, theta_max=theta_max)
    except ValueError as exc:
        ld.fail(f"detector: {exc}", "detector")

    out = raw.get("output", {})
    fmt = out.get("format", "csv")
    if fmt != "csv":
        ld.fail("output.format must be 'csv'", "output", "format")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        ld.fail("output.path must be a string", "output", "path")
    members = _bunch(ld, raw["bunch"], packet) if require_bunch else ()
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return RunConfig(params=params, packet=packet, grid=grid, polarization=pol, method=method, rtol=float(rtol),
                     output_path=path, output_format=fmt, members=members, digest=digest, source=source, raw=raw)


def load(path: str, require_bunch: bool = False) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return loads(text, source=path, require_bunch=require_bunch)
