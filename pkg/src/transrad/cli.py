"""Command line front end: ``transrad spectrum|nparticle -c run.toml`` and ``transrad verify``."""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

from . import __version__, config, verify
from .classical import n_particle_probability
from .errors import ConfigError, RegimeWarning, TransradError, AccuracyWarning
from .kinematics import PhotonKinematics, build_polarization
from .radiation import scan, worker_count

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_VERIFY = 4

SPECTRUM_COLUMNS = ("k0", "theta", "phi", "pol", "dP_d3k", "dP_dk0_dOmega", "term_e2", "term_e_mua",
                    "term_mua2", "quad_err", "flags")
NPARTICLE_COLUMNS = ("k0", "theta", "phi", "incoherent_quantum", "coherent_classical", "total")
UNITS = "k0 eV; theta rad; phi rad; dP_d3k eV^-3; dP_dk0_dOmega eV^-1; terms eV^-3"


def _fmt(x) -> str:
    return "%.12e" % x


def _header(cfg: config.RunConfig, command: str) -> list[str]:
    lines = [f"# transrad {__version__} {command}",
             f"# config {cfg.source} sha256:{cfg.digest}",
             f"# units: {UNITS}",
             f"# method {cfg.method} rtol {cfg.rtol:g} polarization {cfg.polarization}"]
    return lines


def _write(cfg: config.RunConfig, header: list[str], columns, rows, stdout) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(r)
    text = buf.getvalue()
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        (stdout or sys.stdout).write(text)


def cmd_spectrum(cfg: config.RunConfig, stdout=None) -> int:
    res = scan(cfg.packet, cfg.grid, cfg.polarization, cfg.params, method=cfg.method, rtol=cfg.rtol)
    rows = []
    failures = 0
    for pt in res.points:
        if pt.result is None:
            failures += 1
            nan = float("nan")
            rows.append([_fmt(pt.k0), _fmt(pt.theta), _fmt(pt.phi), cfg.polarization] + [_fmt(nan)] * 6
                        + [pt.error])
            continue
        r = pt.result
        rows.append([_fmt(pt.k0), _fmt(pt.theta), _fmt(pt.phi), cfg.polarization, _fmt(r.value),
                     _fmt(r.value * pt.k0 ** 2), _fmt(r.term_e2), _fmt(r.term_emu), _fmt(r.term_mu2),
                     _fmt(r.error), ";".join(r.flags)])
    header = _header(cfg, "spectrum")
    seen = []
    for rep in res.applicability:
        for note in rep.warnings():
            if note not in seen:
                seen.append(note)
    header += [f"# note: {n}" for n in seen]
    _write(cfg, header, SPECTRUM_COLUMNS, rows, stdout)
    if failures == len(res.points):
        print(f"error: all {failures} detector points failed; first: {res.points[0].error}", file=sys.stderr)
        return EXIT_PHYSICS
    return EXIT_OK


def cmd_nparticle(cfg: config.RunConfig, stdout=None) -> int:
    if cfg.polarization == "summed":
        raise ConfigError("nparticle needs a definite detector.polarization (amplitudes do not add "
                          "across polarizations)")
    pts = list(cfg.grid.points())

    def task(pt):
        k0, th, ph = pt
        photon = PhotonKinematics(k0, th, ph)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            return n_particle_probability(cfg.members, photon, build_polarization(photon, cfg.polarization),
                                          cfg.params, rtol=cfg.rtol)

    n = worker_count()
    if n <= 1:
        results = [task(pt) for pt in pts]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(task, pts))
    rows = [[_fmt(k0), _fmt(th), _fmt(ph), _fmt(r.incoherent_quantum), _fmt(r.coherent_classical),
             _fmt(r.total)] for (k0, th, ph), r in zip(pts, results)]
    header = _header(cfg, "nparticle")
    header.append(f"# packets {len(cfg.members)}; exchange term {results[0].exchange_term if results else ''}")
    _write(cfg, header, NPARTICLE_COLUMNS, rows, stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transrad", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("spectrum", help="probability on a detector grid")
    sp.add_argument("-c", "--config", required=True)
    sp.add_argument("-o", "--output", help="override output.path")
    np_ = sub.add_parser("nparticle", help="N-packet coherent decomposition on a detector grid")
    np_.add_argument("-c", "--config", required=True)
    np_.add_argument("-o", "--output", help="override output.path")
    vp = sub.add_parser("verify", help="run the self-verification suites")
    vp.add_argument("--level", choices=sorted(verify.LEVELS), default="quick")
    vp.add_argument("--inject", choices=verify.DEFECTS, help="deliberately break the build to test the suites")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            ok = verify.run(args.level, defect=args.inject)
            return EXIT_OK if ok else EXIT_VERIFY
        cfg = config.load(args.config, require_bunch=args.command == "nparticle")
        if args.output:
            cfg.output_path = args.output
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            if args.command == "spectrum":
                return cmd_spectrum(cfg)
            return cmd_nparticle(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransradError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
