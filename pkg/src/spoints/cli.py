"""
Batch front-end.

    python -m spoints {convention,scan,radial,levinson,sweep,all} --config run.ini [flags]

Every command writes ``report.json`` (deterministic: no timestamps, floats
rounded to 12 significant digits) plus whitespace-separated ``*.csv`` data with
a ``#`` header into the output directory. Stage wall-clock times go to a
separate ``timings.json`` so that the report itself is reproducible byte for
byte.

Exit codes: 0 success, 1 convention violated, 2 input error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import jets, lse, radial, scattering
from .config import RunConfig, load_config, parse_alpha_range, parse_m_list
from .errors import ConventionViolatedError, MalformedInputError, NumericalFailure, SPointError
from .potentials import support_ball

__all__ = ["main", "run_command", "COMMANDS"]

log = logging.getLogger("spoints")

SCHEMA = "spoints.report/1"
EXIT_OK, EXIT_CONVENTION, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
PHI_REL_TOL = 0.01
RADIUS_CELLS = 2.0
PSI_TOL = 1e-6


def _clean(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}")
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _write_table(path, names, rows):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in rows:
            fh.write(" ".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row) + "\n")


class Run:
    """State shared by the stages of one invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stages = {}
        self.timings = {}
        self.error = None
        self._kernel = None
        self._conv = None

    def timed(self, name, fn):
        t = time.perf_counter()
        try:
            return fn()
        finally:
            self.timings[name] = round(time.perf_counter() - t, 3)

    @property
    def kernel(self):
        if self._kernel is None:
            p = self.cfg.potential
            grid = lse.build_grid(support_ball(p), self.cfg.n)
            self._kernel = lse.assemble_kernel(grid, p, self.cfg.self_term, self.cfg.tau_conv)
        return self._kernel

    def require_radial(self, what):
        if not self.cfg.potential.is_radial:
            raise MalformedInputError(f"'{what}' needs a radially symmetric potential")


# -- stages -------------------------------------------------------------------


def stage_convention(run: Run):
    cfg = run.cfg
    K = run.kernel
    cc = lse.check_convention(K, cfg.tau_conv)
    frag = {"sigma_min": {"value": cc.sigma_min, "tolerance": cfg.tau_conv, "ok": cc.ok,
                          "method": cc.method},
            "grid": {"n": cfg.n, "nodes": len(K.grid), "h": K.grid.h}}
    ok = cc.ok
    if cfg.potential.is_radial:
        A, B = radial.asymptotic_slope(cfg.potential)
        R = cfg.potential.support_radius
        resonant = abs(A) * R <= radial.RESONANCE_TOL * (abs(A) * R + abs(B))
        frag["radial_slope"] = {"A": A, "B": B, "tolerance": radial.RESONANCE_TOL,
                                "ok": not resonant}
        ok = ok and not resonant
    else:
        frag["radial_slope"] = "no oracle"
    frag["ok"] = ok
    run.stages["convention"] = frag
    if not ok:
        run.error = (f"convention violated: sigma_min = {cc.sigma_min:.3e} (tolerance {cfg.tau_conv:g})"
                     if not cc.ok else "convention violated: radial asymptotic slope vanishes")
        return EXIT_CONVENTION
    return EXIT_OK


def stage_scan(run: Run):
    cfg = run.cfg
    K = run.kernel
    p = cfg.potential
    frag = {}
    basis = None
    for m in cfg.m:
        L = 2 * m - 2
        if m > 1 and (basis is None or basis.degree != L):
            basis = jets.q_harmonic_basis(K, L)
        rep = jets.scan_spoints(K, m, box=cfg.scan_box, resolution=cfg.scan_resolution,
                                tau_rel=cfg.tau_rel, basis=basis if m > 1 else None)
        rep.to_csv(run.out / f"scan_m{m}.csv")
        d = rep.as_dict()
        entry = {k: d[k] for k in ("diagnostic", "resolution", "box", "tau_rel", "h_fd",
                                   "conditional", "radial_oracle", "n_candidates")}
        entry["cell"] = rep.cell
        if p.is_radial:
            spheres = rep.sphere_radii()
            oracle = list(radial.find_s_spheres(p, m).radii)
            box_hi = float(np.min(np.abs(np.asarray(rep.box))))
            visible = [r for r in oracle if r < box_hi]
            deltas = [min((abs(s - r) for s in spheres), default=None) for r in visible]
            entry["sphere_radii"] = spheres
            entry["radial_radii"] = oracle
            entry["cross_check"] = {
                "deltas": deltas,
                "tolerance": RADIUS_CELLS * rep.cell,
                "ok": all(dl is not None and dl <= RADIUS_CELLS * rep.cell for dl in deltas)
                and len(spheres) == len(visible),
            }
        else:
            entry["sphere_radii"] = None
            entry["cross_check"] = "no oracle"
            entry["candidates"] = d["candidates"][:200]
        frag[f"m{m}"] = entry
    run.stages["scan"] = frag
    return EXIT_OK


def stage_radial(run: Run):
    cfg = run.cfg
    run.require_radial("radial")
    p = cfg.potential
    counts = radial.channel_counts(p, cfg.l_max)
    table = []
    for l in range(cfg.l_max + 1):
        for m in range(l + 1):
            table.append(radial.verify_sum_rule(p, m, l).as_dict())
    spheres = {f"m{m}": radial.find_s_spheres(p, m).as_dict() for m in cfg.m}
    psi_res = radial.psi_residual(p)
    R = p.support_radius
    r = np.linspace(radial._solution(p, cfg.l_max).r0, 3 * R, 600)
    radial.write_radial_csv(run.out / "radial.csv", p, r, min(cfg.l_max, 4))
    A, B = radial.asymptotic_slope(p)
    run.stages["radial"] = {
        "N": list(counts.counts),
        "total_multiplicity": counts.total_multiplicity,
        "sum_rule": table,
        "sum_rule_ok": all(row["passed"] for row in table),
        "s_spheres": spheres,
        "psi": {"residual": psi_res, "tolerance": PSI_TOL, "ok": psi_res <= PSI_TOL,
                "form": "(-Laplacian + q) Psi = -6 Phi",
                "printed_form": "Phi = -(1/6)(Laplacian + q) Psi",
                "tail_linear_coefficient": 3 * B / A},
    }
    return EXIT_OK


def stage_levinson(run: Run):
    cfg = run.cfg
    run.require_radial("levinson")
    curves = []
    rep = scattering.levinson_check(cfg.potential, cfg.l_max, cfg.k_max, cfg.n_k, curves=curves)
    for c in curves:
        c.to_csv(run.out / f"levinson_l{c.l}.csv")
    d = rep.as_dict()
    tol = 0.02 * math.pi
    d["defects_ok"] = all(c["defect"] <= tol for c in rep.channels if c["N"] > 0)
    d["index_ok"] = rep.total_index == rep.phase_index
    run.stages["levinson"] = d
    return EXIT_OK


def stage_sweep(run: Run):
    cfg = run.cfg
    run.require_radial("sweep")
    p = cfg.potential
    alpha_c = radial.first_critical_coupling(p)
    values = cfg.alpha_range or parse_alpha_range("0.2:2.0:0.2")
    scale = alpha_c if cfg.alpha_units == "critical" else 1.0
    alphas = [v * scale for v in values]
    crosses = min(alphas) <= alpha_c * (1 + 1e-9) and max(alphas) >= alpha_c * (1 - 1e-9)
    if crosses and len(alphas) > 1 and not cfg.allow_critical:
        raise MalformedInputError(
            f"alpha range crosses the critical coupling {alpha_c:.6g}; pass --allow-critical")
    rows, count_rows, sphere_rows = [], [], []
    for a in alphas:
        q = p.with_coupling(a)
        row = {"alpha": a, "alpha_over_critical": a / alpha_c}
        try:
            counts = radial.channel_counts(q, cfg.l_max).counts
            s1 = radial.find_s_spheres(q, 1).radii
            s2 = radial.find_s_spheres(q, 2).radii if cfg.l_max >= 2 else ()
            bound, spheres = bool(sum(counts)), bool(s1 or s2)
            row.update({"N": list(counts), "m1_radii": list(s1), "m2_radii": list(s2),
                        "status": "ok" if (bound or spheres) else "no bound state, no s-sphere",
                        "probe_consistent": bound == spheres})
            count_rows.append([a, a / alpha_c] + list(counts))
            sphere_rows.append([a, a / alpha_c, len(s1), s1[-1] if s1 else float("nan"),
                                len(s2), s2[0] if s2 else float("nan")])
        except ConventionViolatedError as exc:
            row.update({"status": "convention violated", "detail": str(exc)})
        rows.append(row)
    _write_table(run.out / "sweep_counts.csv",
                 ["alpha", "alpha/alpha_c"] + [f"N{l}" for l in range(cfg.l_max + 1)], count_rows)
    _write_table(run.out / "sweep_spheres.csv",
                 ["alpha", "alpha/alpha_c", "n_m1", "r_m1_outer", "n_m2", "r_m2_inner"], sphere_rows)
    probed = [r["probe_consistent"] for r in rows if "probe_consistent" in r]
    run.stages["sweep"] = {
        "alpha_critical": alpha_c, "units": cfg.alpha_units, "rows": rows,
        "conjecture_probe": {"statement": "bound states exist <=> s-points exist (orders scanned)",
                             "kind": "conjecture probe, not a theorem check",
                             "consistent": all(probed)},
    }
    return EXIT_OK


def cross_radii(R, zeros, band, count=20):
    """``count`` radii spread over ``[0.05R, 0.95R]`` avoiding ``|r - zero| < band``.

    Relative errors are meaningless next to a zero of Φ, so the radii are
    equally spaced on the allowed set.
    """
    r = np.linspace(0.05 * R, 0.95 * R, 4001)
    ok = np.array([all(abs(x - z) >= band for z in zeros) for x in r])
    r = r[ok]
    if len(r) < count:
        raise NumericalFailure("no room for cross-check radii away from the zeros of Phi")
    return r[np.round(np.linspace(0, len(r) - 1, count)).astype(int)]


def stage_cross(run: Run):
    """Radial vs volume pipeline: Φ at sampled radii."""
    p = run.cfg.potential
    K = run.kernel
    phi3 = lse.solve_field(K, 1.0)
    phir = radial.radial_phi(p)
    R = p.support_radius
    zeros = phir.zeros()
    radii = cross_radii(R, zeros, K.grid.h)
    direction = np.array([0.6, 0.48, 0.64])
    v3 = phi3.interpolate(radii[:, None] * direction)
    vr = phir(radii)
    rel = np.abs(v3 - vr) / np.abs(vr)
    run.stages["cross_pipeline"] = {
        "phi_radii": radii, "phi_volume": v3, "phi_radial": vr, "relative_error": rel,
        "excluded_band": K.grid.h,
        "tolerance": PHI_REL_TOL,
        "ok": bool(np.all(rel <= PHI_REL_TOL)),
    }
    return EXIT_OK


COMMANDS = ("convention", "scan", "radial", "levinson", "sweep", "all")


def _pipeline(name, run):
    cfg = run.cfg
    if name == "convention":
        return run.timed("convention", lambda: stage_convention(run))
    if name in ("scan", "all"):
        code = run.timed("convention", lambda: stage_convention(run))
        if code != EXIT_OK:
            return code
        run.timed("scan", lambda: stage_scan(run))
        if name == "scan":
            return EXIT_OK
        if cfg.potential.is_radial:
            run.timed("radial", lambda: stage_radial(run))
            run.timed("levinson", lambda: stage_levinson(run))
            run.timed("cross_pipeline", lambda: stage_cross(run))
            if cfg.alpha_range:
                run.timed("sweep", lambda: stage_sweep(run))
        return EXIT_OK
    stage = {"radial": stage_radial, "levinson": stage_levinson, "sweep": stage_sweep}[name]
    return run.timed(name, lambda: stage(run))


def run_command(name: str, cfg: RunConfig) -> int:
    """Run one subcommand; writes the report and returns the exit code."""
    run = Run(cfg)
    code = EXIT_OK
    error = None
    try:
        code = _pipeline(name, run)
        error = run.error
    except ConventionViolatedError as exc:
        code, error = EXIT_CONVENTION, str(exc)
    except MalformedInputError as exc:
        code, error = EXIT_INPUT, str(exc)
    except NumericalFailure as exc:
        code, error = EXIT_NUMERICAL, str(exc)
    report = {"schema": SCHEMA, "version": __version__, "command": name,
              "config": cfg.as_dict(), "stages": run.stages, "exit_code": code}
    if error is not None:
        report["error"] = error
    with open(run.out / "report.json", "w") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(run.out / "timings.json", "w") as fh:
        json.dump(run.timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if error is not None:
        print(f"spoints {name}: {error}", file=sys.stderr)
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="spoints", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--n", type=int, help="grid resolution per axis")
    ap.add_argument("--m", help="comma-separated orders, e.g. 1,2")
    ap.add_argument("--alpha-range", help="A:B:STEP couplings for the sweep")
    ap.add_argument("--allow-critical", action="store_true", help="let sweeps cross alpha_c")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        over = {"out": args.out, "n": args.n}
        if args.m is not None:
            over["m"] = parse_m_list(args.m)
        if args.alpha_range is not None:
            over["alpha_range"] = parse_alpha_range(args.alpha_range)
        if args.allow_critical:
            over["allow_critical"] = True
        cfg = cfg.with_overrides(**over)
    except (MalformedInputError, SPointError, ValueError, TypeError) as exc:
        print(f"spoints: {exc}", file=sys.stderr)
        return EXIT_INPUT
    code = run_command(args.command, cfg)
    print(f"spoints {args.command}: exit {code}; report in {Path(cfg.out) / 'report.json'}")
    return code


if __name__ == "__main__":   # pragma: no cover
    sys.exit(main())
