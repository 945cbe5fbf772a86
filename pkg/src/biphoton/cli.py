"""Command-line front end: ``biphoton <command> [options]``.

Every CSV written gets a ``.meta.json`` sidecar holding the resolved
configuration, seed and code version; passing that sidecar back through
``--config`` reproduces the CSV byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from . import interferometry as hom
from .config import ScenarioConfig, load_config
from .errors import BiphotonError
from .jsa import purity_from_jsi, schmidt_decompose, side_lobe_suppression, write_jsi_csv
from .poling import dfg_scan, write_domain_table
from .scenarios import (hom_scans, make_model, make_poling, make_spectrometer,
                        marginal_report, reconstruct, run_table1, scenario_jsa, validate)
from .spectrometer import (RNG_NAME, ingest_time_tags, reconstruct_jsi, simulate_coincidences,
                           write_histogram_csv, write_time_tags)

log = logging.getLogger("biphoton")

FIGURES = ("dfg", "jsi-fiber", "jsi-dcm", "marginals", "hom")


class Output:
    """Writes artifacts into the output directory, each with a metadata sidecar."""

    def __init__(self, cfg: ScenarioConfig, command):
        self.cfg = cfg
        self.command = command
        self.dir = cfg.output.out_dir
        os.makedirs(self.dir, exist_ok=True)
        self.written = []

    def path(self, name):
        return os.path.join(self.dir, name)

    def sidecar(self, name, results=None):
        meta = {
            "command": self.command,
            "artifact": name,
            "version": __version__,
            "seed": self.cfg.montecarlo.seed,
            "rng": RNG_NAME,
            "config": self.cfg.to_dict(),
            "results": results or {},
        }
        with open(self.path(name) + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        self.written.append(name)

    def table(self, name, header, rows, results=None):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.sidecar(name, results)

    def matrix(self, name, row_axis, col_axis, m, corner="row\\col", results=None):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([corner] + [_fmt(x) for x in col_axis])
            for x, r in zip(row_axis, m):
                w.writerow([_fmt(x)] + [_fmt(v) for v in r])
        self.sidecar(name, results)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else str(float(v))
    return str(v)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _db(m):
    m = np.asarray(m, dtype=float)
    peak = m.max()
    with np.errstate(divide="ignore"):
        return 10 * np.log10(m / peak) if peak > 0 else np.full_like(m, -np.inf)


# -- commands -----------------------------------------------------------------

def cmd_design(cfg, out, args):
    poling = make_poling(cfg)
    name = f"poling_{poling.kind}.txt"
    write_domain_table(out.path(name), poling)
    starts, duty = poling.full_periods()
    out.sidecar(name, {"domains": len(poling.domains), "full_periods": int(duty.size)})
    out.table(f"duty_{poling.kind}.csv", ["z_um", "duty"], zip(starts * 1e6, duty))
    print(f"{poling.kind} poling: {len(poling.domains)} domains, {duty.size} full periods, "
          f"duty {duty.min():.3f}..{duty.max():.3f}")


def cmd_dfg(cfg, out, args):
    scan = dfg_scan(make_poling(cfg), make_model(cfg), 16.0, 1601,
                    cfg.grid.center_wavelength_nm)
    out.table("dfg.csv", ["probe_nm", "intensity", "intensity_db"],
              zip(scan.wavelength_nm, scan.intensity, scan.intensity_db),
              {"fwhm_nm": scan.fwhm_nm})
    print(f"DFG FWHM {scan.fwhm_nm:.4f} nm")


def cmd_jsa(cfg, out, args):
    jsa = scenario_jsa(cfg)
    rep = schmidt_decompose(jsa)
    m, ac = marginal_report(jsa)
    results = {"purity": rep.purity, "schmidt_number": rep.schmidt_number,
               "signal_fwhm_nm": m.signal_fwhm_nm, "idler_fwhm_nm": m.idler_fwhm_nm}
    write_jsi_csv(out.path("jsi.csv"), jsa.grid, jsa.jsi)
    out.sidecar("jsi.csv", results)
    for part, values in (("re", jsa.values.real), ("im", jsa.values.imag)):
        write_jsi_csv(out.path(f"jsa_{part}.csv"), jsa.grid, values)
        out.sidecar(f"jsa_{part}.csv", results)
    print(f"pump {cfg.pump.fwhm_nm} nm: purity {rep.purity:.4f}, K {rep.schmidt_number:.4f}, "
          f"marginals {m.signal_fwhm_nm:.3f}/{m.idler_fwhm_nm:.3f} nm")


def cmd_schmidt(cfg, out, args):
    jsa = scenario_jsa(cfg)
    rep = schmidt_decompose(jsa)
    n = min(50, rep.coefficients.size)
    out.table("schmidt.csv", ["mode", "coefficient"],
              zip(range(n), rep.coefficients[:n]),
              {"purity": rep.purity, "schmidt_number": rep.schmidt_number})
    print(f"purity {rep.purity:.6f}  K {rep.schmidt_number:.6f}")


def cmd_spectrometer(cfg, out, args):
    jsa = scenario_jsa(cfg)
    r = reconstruct(cfg, jsa)
    hist = r.histogram
    results = {"purity": r.schmidt.purity, "schmidt_number": r.schmidt.schmidt_number,
               "detected_pairs": hist.metadata["detected_pairs"],
               "dark_coincidences": hist.metadata["dark_coincidences"]}
    write_histogram_csv(out.path("histogram.csv"), hist)
    out.sidecar("histogram.csv", results)
    out.matrix("reconstructed_jsi.csv", r.jsi.signal_nm, r.jsi.idler_nm, r.jsi.counts,
               "signal_nm\\idler_nm", results)
    if args.tags:
        _, events = simulate_coincidences(jsa, r.spectrometer, cfg.montecarlo.pairs,
                                          cfg.montecarlo.seed, return_events=True)
        write_time_tags(out.path("tags.txt"), events,
                        f"seed={cfg.montecarlo.seed} rng={RNG_NAME}")
        out.sidecar("tags.txt", results)
    print(f"{r.spectrometer.name}: {hist.total} coincidences, inferred purity "
          f"{r.schmidt.purity:.4f} (upper bound)")


def cmd_hom(cfg, out, args):
    _, _, raw, filt = hom_scans(cfg, cfg.hom.pump_fwhm_nm)
    results = {}
    for label, scan in (("unfiltered", raw), ("filtered", filt)):
        v = hom.visibility(scan)
        results[label] = {"v_raw": v.v_raw, "v_fit": v.v_fit, "fwhm_ps": v.fwhm_ps}
    results["component_limited"] = hom.imperfect_visibility(
        None, cfg.hom.pbs_leakage, cfg.hom.split_ratio)
    rows = [raw.delays_ps, raw.values, filt.values]
    header = ["delay_ps", "p_unfiltered", "p_filtered"]
    if cfg.hom.pairs_per_delay > 0:
        f = hom.component_factor(cfg.hom.pbs_leakage, cfg.hom.split_ratio)
        for label, scan, k in (("unfiltered", raw, 0), ("filtered", filt, 1)):
            noisy = hom.measurement_scan(scan, cfg.hom.pairs_per_delay,
                                         cfg.montecarlo.seed + k, f)
            v = hom.visibility(noisy)
            results[label].update(counts_v_fit=v.v_fit, counts_v_ci=list(v.v_fit_ci),
                                  counts_v_raw=v.v_raw)
            rows.append(noisy.values)
            header.append(f"counts_{label}")
    out.table("hom.csv", header, zip(*rows), results)
    for label in ("unfiltered", "filtered"):
        r = results[label]
        print(f"{label}: V_raw {r['v_raw']:.4f}  V_fit {r['v_fit']:.4f}  FWHM {r['fwhm_ps']:.3f} ps")


def cmd_ingest(cfg, out, args):
    spec = make_spectrometer(cfg)
    hist = ingest_time_tags(args.tagfile, spec, strict=not args.lenient)
    factor = cfg.spectrometer.analysis_bin_ps // spec.bin_width_ps
    rec = reconstruct_jsi(hist, spec, rebin=max(factor, 1))
    rec = rec.window(cfg.grid.center_wavelength_nm, cfg.spectrometer.window_nm or spec.window_nm)
    rep = purity_from_jsi(rec.counts)
    results = {"purity": rep.purity, "schmidt_number": rep.schmidt_number,
               "upper_bound": True, "coincidences": hist.total,
               "skipped_lines": hist.metadata["skipped_lines"],
               "lines": hist.metadata["lines"]}
    out.matrix("ingested_jsi.csv", rec.signal_nm, rec.idler_nm, rec.counts,
               "signal_nm\\idler_nm", results)
    print(f"{hist.total} coincidences, purity {rep.purity:.4f} (upper bound), "
          f"{hist.metadata['skipped_lines']} skipped lines")


def cmd_table1(cfg, out, args):
    rows = run_table1(cfg)
    out.table("table1.csv",
              ["pump_fwhm_nm", "schmidt_number", "purity", "reconstructed_schmidt_number",
               "reconstructed_purity"],
              ([r.pump_fwhm_nm, r.schmidt_number, r.purity, r.reconstructed_schmidt_number,
                r.reconstructed_purity] for r in rows))
    print(f"{'pump nm':>8} {'K':>7} {'purity':>7} {'K rec':>7} {'p rec':>7}")
    for r in rows:
        print(f"{r.pump_fwhm_nm:8.2f} {r.schmidt_number:7.3f} {r.purity:7.3f} "
              f"{r.reconstructed_schmidt_number:7.3f} {r.reconstructed_purity:7.3f}")


def cmd_figure(cfg, out, args):
    fig = args.figure_id
    if fig == "dfg":
        return cmd_dfg(cfg, out, args)
    if fig in ("jsi-fiber", "jsi-dcm"):
        variant = fig.split("-")[1]
        span = 16.0 if variant == "fiber" else 6.6
        jsa = scenario_jsa(cfg, span_nm=span)
        r = reconstruct(cfg, scenario_jsa(cfg), variant=variant)
        results = {"purity_reconstructed": r.schmidt.purity,
                   "purity_model": schmidt_decompose(jsa).purity,
                   "side_lobe_db_model": side_lobe_suppression(jsa.jsi)}
        out.matrix(f"{fig}_measured_db.csv", r.jsi.signal_nm, r.jsi.idler_nm,
                   _db(r.jsi.counts), "signal_nm\\idler_nm", results)
        lam = jsa.grid.wavelengths_nm
        out.matrix(f"{fig}_model_db.csv", lam, lam, _db(jsa.jsi), "signal_nm\\idler_nm", results)
        print(f"{fig}: reconstructed purity {r.schmidt.purity:.4f}, model "
              f"{results['purity_model']:.4f}, side lobes {results['side_lobe_db_model']:.1f} dB")
        return
    if fig == "marginals":
        jsa = scenario_jsa(cfg)
        m, ac = marginal_report(jsa)
        results = {"signal_fwhm_nm": m.signal_fwhm_nm, "idler_fwhm_nm": m.idler_fwhm_nm,
                   "autocorrelation_duration_ps": ac.duration_ps,
                   "autocorrelation_bandwidth_nm": ac.bandwidth_nm}
        peak = max(m.signal.max(), m.idler.max())
        out.table("marginals.csv", ["wavelength_nm", "signal", "idler"],
                  zip(m.wavelength_nm, m.signal / peak, m.idler / peak), results)
        r = reconstruct(cfg, jsa, variant="dcm")
        ms, mi = r.jsi.marginals
        out.table("marginals_dcm.csv", ["signal_nm", "signal", "idler_nm", "idler"],
                  zip(r.jsi.signal_nm, ms / ms.max(), r.jsi.idler_nm, mi / mi.max()), results)
        print(f"marginals {m.signal_fwhm_nm:.3f}/{m.idler_fwhm_nm:.3f} nm, "
              f"autocorrelation {ac.duration_ps:.3f} ps")
        return
    if fig == "hom":
        return cmd_hom(cfg, out, args)


COMMANDS = {
    "design": (cmd_design, "write the poling domain table and duty profile"),
    "dfg": (cmd_dfg, "difference-frequency scan of the crystal"),
    "jsa": (cmd_jsa, "model joint spectral amplitude and intensity"),
    "schmidt": (cmd_schmidt, "Schmidt spectrum and purity of the model JSA"),
    "spectrometer": (cmd_spectrometer, "Monte Carlo spectrometer run and reconstruction"),
    "hom": (cmd_hom, "Hong-Ou-Mandel scans with and without the bandpass"),
    "ingest": (cmd_ingest, "time-tag file to JSI and purity"),
    "table1": (cmd_table1, "purity versus pump bandwidth"),
    "figure": (cmd_figure, "plot data for one figure"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI scenario file or a .meta.json sidecar")
    common.add_argument("--seed", type=int, help="Monte Carlo seed")
    common.add_argument("--out-dir", help="directory for CSV and metadata output")
    common.add_argument("--grid-points", type=int, help="grid points per axis")
    common.add_argument("--pump-fwhm-nm", type=float, help="pump bandwidth (nm)")
    common.add_argument("--lenient", action="store_true",
                        help="warn on unknown config keys and skip malformed tag lines")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "spectrometer":
            p.add_argument("--tags", action="store_true", help="also write a time-tag file")
        if name == "ingest":
            p.add_argument("tagfile")
        if name == "figure":
            p.add_argument("figure_id", choices=FIGURES)
    return parser


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config, strict=not args.lenient) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.override("montecarlo", seed=args.seed)
    if args.out_dir is not None:
        cfg = cfg.override("output", out_dir=args.out_dir)
    if args.grid_points is not None:
        cfg = cfg.override("grid", points=args.grid_points)
    if args.pump_fwhm_nm is not None:
        cfg = cfg.override("pump", fwhm_nm=args.pump_fwhm_nm)
        cfg = cfg.override("hom", pump_fwhm_nm=args.pump_fwhm_nm)
    return validate(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        handler = COMMANDS[args.command][0]
        handler(cfg, Output(cfg, args.command), args)
    except BiphotonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
