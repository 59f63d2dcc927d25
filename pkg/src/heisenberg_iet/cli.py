"""Command line entry point: ``heisenberg-iet <command> --config FILE``.

Every command writes ``<command>-<hash>.json`` and/or ``<command>-<hash>.csv``
into the output directory, where ``<hash>`` is the first 16 hex digits of the
configuration hash.  Exit status: 0 success, 2 invalid input, 3 numerical
guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _accel
from .analysis import (
    atom_probe,
    best_invariant_defect,
    cohomological_residual_sweep,
    fit_decay_exponent,
    rokhlin_eigenfunction,
    spectral_density,
    square_summability_report,
)
from .bundle import admissible_b_space, build_skew_product, is_admissible, sample_offsets, weil_check, circ_dist
from .config import ExperimentConfig, parse_config
from .dynamics import ModeObservable, birkhoff_mode_averages, correlation_series, discrepancy_2d, skew_orbit
from .errors import HeightsNotInCone, HeisenbergIetError, ParseError, ValidationError
from .flow import commutator_shift, first_return_iterates, state_at
from .iet import genus, kernel_basis, monodromy, omega_matrix, sigma_permutation, translation_vector
from .suspension import boundary_report, build_zippered_rectangles, heights_cone_contains

COMMANDS = (
    "validate", "suspend", "admissible", "iterate", "birkhoff",
    "correlate", "spectrum", "rokhlin", "cohom", "commutator",
)
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
HASH_CHARS = 16


class GuardTripped(Exception):
    """Raised after artifacts are written when a numerical guard failed."""


def _plain(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [_plain(v.real), _plain(v.imag)]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return str(v)


@dataclass
class Artifacts:
    payload: dict
    header: list[str] | None = None
    rows: list[list] | None = None


# ------------------------------------------------------------------- context


class Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.spec = cfg.spec
        self._susp = None
        self._skew = None
        self._b = None

    @property
    def suspension(self):
        if self._susp is None:
            if self.cfg.tau is not None:
                tau = self.cfg.tau
            else:
                mem = heights_cone_contains(self.spec, self.cfg.h)
                if not mem:
                    raise HeightsNotInCone("suspension.h is not in the cone of heights")
                tau = mem.witness
            self._susp = build_zippered_rectangles(self.spec, tau)
        return self._susp

    @property
    def h(self):
        return self.suspension.h

    @property
    def b(self):
        if self._b is None:
            if self.cfg.b == "sample":
                self._b = sample_offsets(self.spec, self.h, self.cfg.seed)
            else:
                self._b = np.array([float(v) for v in self.cfg.b])
        return self._b

    @property
    def skew(self):
        if self._skew is None:
            self._skew = build_skew_product(self.suspension.iet, [float(v) for v in self.h], self.b)
        return self._skew


# ------------------------------------------------------------------ commands


def cmd_validate(ctx: Context) -> Artifacts:
    spec = ctx.spec
    sing = sigma_permutation(spec)
    s = ctx.suspension
    out = {
        "omega": omega_matrix(spec),
        "translation": list(translation_vector(spec)),
        "monodromy": list(monodromy(spec)),
        "sigma": list(sing.sigma),
        "sigma_orbits": [list(o) for o in sing.orbits],
        "kernel_basis": [v for v in kernel_basis(spec)],
        "genus": genus(spec),
        "singularities": sing.n_singularities,
        "h": list(s.h),
        "area": s.area,
        "weil": weil_check(spec.lengths, s.h),
    }
    ok = out["weil"]
    if ok:
        rep = is_admissible(spec, s.h, ctx.b)
        out["admissibility"] = rep.as_dict()
        ok = rep.ok
    out["valid"] = bool(ok)
    if not ok:
        return _fail(Artifacts(out), ValidationError("configuration does not define an admissible bundle"))
    return Artifacts(out)


def cmd_suspend(ctx: Context) -> Artifacts:
    s = ctx.suspension
    rep = boundary_report(s)
    out = s.to_json_dict()
    out["boundary_ok"] = rep["ok"]
    out["weil"] = weil_check(ctx.spec.lengths, s.h)
    out["singularities"] = s.n_singularities
    out["genus"] = genus(ctx.spec)
    rows = [[sym, _cell(s.h[i]), _cell(ctx.spec.lengths[i]), _cell(s.tau[i])] for i, sym in enumerate(ctx.spec.top)]
    return Artifacts(out, ["symbol", "h", "lambda", "tau"], rows)


def cmd_admissible(ctx: Context) -> Artifacts:
    space = admissible_b_space(ctx.spec, ctx.h)
    out = space.to_json_dict()
    out["b"] = list(ctx.b)
    out["b_source"] = "sample" if ctx.cfg.b == "sample" else "config"
    rep = is_admissible(ctx.spec, ctx.h, ctx.b)
    out["report"] = rep.as_dict()
    rows = [[i, " ".join(str(int(c)) for c in con.coeffs), _cell(con.rhs), _cell(con.residual(ctx.b))]
            for i, con in enumerate(space.constraints)]
    return Artifacts(out, ["constraint", "coeffs", "rhs", "residual"], rows)


def _starts(ctx: Context):
    r = ctx.cfg.run
    m = int(r["starts"])
    if m <= 1:
        return np.array([float(r["x0"])]), np.array([float(r["rho0"])])
    rng = np.random.default_rng(ctx.cfg.seed)
    return rng.uniform(0.0, float(ctx.skew.base.total), m), rng.uniform(0.0, 1.0, m)


def cmd_iterate(ctx: Context) -> Artifacts:
    skew = ctx.skew
    steps = int(ctx.cfg.run["steps"])
    x0, r0 = _starts(ctx)
    orb = skew_orbit(skew, x0, r0, steps)
    fx, fr, _ = first_return_iterates(skew, x0, r0, steps)
    dx = float(np.max(np.abs(fx - orb.x)))
    dr = float(np.max(np.abs(((fr - orb.rho) + 0.5) % 1.0 - 0.5)))
    rows = [[i, k, _cell(orb.x[i, k]), _cell(orb.rho[i, k])] for i in range(x0.shape[0]) for k in range(steps + 1)]
    out = {
        "starts": x0.shape[0],
        "steps": steps,
        "final": [[orb.x[i, -1], orb.rho[i, -1]] for i in range(min(x0.shape[0], 10))],
        "reliable": int(np.count_nonzero(orb.reliable)),
        "first_return_max_dx": dx,
        "first_return_max_drho": dr,
    }
    art = Artifacts(out, ["start", "k", "x", "rho"], rows)
    if not np.any(orb.reliable):
        return _fail(art, GuardTripped("every orbit came within the guard distance of a discontinuity"))
    return art


def cmd_birkhoff(ctx: Context) -> Artifacts:
    r = ctx.cfg.run
    N = int(r["N"])
    start = (float(r["x0"]), float(r["rho0"]))
    modes = [int(m) for m in r["modes"]]
    res = birkhoff_mode_averages(ctx.skew, [ModeObservable.constant_mode(m) for m in modes], start, N)
    orb = skew_orbit(ctx.skew, [start[0]], [start[1]], N - 1)
    disc = discrepancy_2d(orb.x[0], orb.rho[0], float(ctx.skew.base.total))
    out = {
        "N": N,
        "start": list(start),
        "discrepancy": disc,
        "averages": {str(m): {"value": rr.value, "abs": abs(rr.value), "trace": [[n, v] for n, v in rr.trace]}
                     for m, rr in zip(modes, res)},
        "reliable": all(rr.reliable for rr in res),
    }
    rows = [[m, _cell(rr.value.real), _cell(rr.value.imag), _cell(abs(rr.value))] for m, rr in zip(modes, res)]
    return Artifacts(out, ["mode", "re", "im", "abs"], rows)


def _series(ctx: Context, mode_f: int, mode_g: int):
    r = ctx.cfg.run
    f = ModeObservable.constant_mode(mode_f)
    g = ModeObservable.constant_mode(mode_g)
    return correlation_series(
        ctx.skew, f, g, int(r["n_max"]), str(r["method"]), samples=int(r["samples"]), seed=ctx.cfg.seed,
        spec_hash=ctx.cfg.spec_hash(),
    )


def _series_rows(ser):
    rows = []
    for i, (n, v) in enumerate(zip(ser.lags, ser.values)):
        row = [int(n), _cell(v.real), _cell(v.imag), _cell(abs(v))]
        if ser.stderr is not None:
            row.append(_cell(ser.stderr[i]))
        rows.append(row)
    return ["n", "re", "im", "abs"] + (["stderr"] if ser.stderr is not None else []), rows


def cmd_correlate(ctx: Context) -> Artifacts:
    r = ctx.cfg.run
    ser = _series(ctx, int(r["mode_f"]), int(r["mode_g"]))
    out = ser.metadata()
    out["modes"] = [int(r["mode_f"]), int(r["mode_g"])]
    if ser.values.shape[0] >= 64:
        fit = fit_decay_exponent(ser)
        out["decay_fit"] = {"alpha": fit.alpha, "K": fit.K, "r2": fit.r2, "all_zero": fit.all_zero}
    out["square_summability"] = square_summability_report(ser).as_dict()
    header, rows = _series_rows(ser)
    return Artifacts(out, header, rows)


def cmd_spectrum(ctx: Context) -> Artifacts:
    r = ctx.cfg.run
    m = int(r["mode"])
    ser = _series(ctx, m, m)
    L = int(r["window"]) or ser.values.shape[0]
    est = spectral_density(ser, L, str(r["taper"]))
    out = {
        "provenance": est.provenance(),
        "grid": est.raw.shape[0],
        "total_mass": est.total_mass,
        "c0": ser.values[0],
        "negative_lobe": est.negative_lobe,
        "negative_mass": est.negative_mass,
        "series": ser.metadata(),
    }
    if ser.values.shape[0] >= 64:
        probe = atom_probe(ser, int(r["lam_grid"]))
        out["atom_probe"] = {"checkpoints": list(probe.checkpoints), "maxima": list(probe.maxima), "argmax": list(probe.argmax)}
    rows = [[_cell(lam), _cell(d), _cell(raw)] for lam, d, raw in zip(est.frequencies, est.density, est.raw)]
    return Artifacts(out, ["lambda", "density", "raw"], rows)


def cmd_rokhlin(ctx: Context) -> Artifacts:
    r = ctx.cfg.run
    rows, recs = [], []
    for K in r["tower_heights"]:
        for lam in r["lam"]:
            res = rokhlin_eigenfunction(ctx.skew, float(lam), int(K), mode=int(r["mode"]))
            rows.append([int(K), _cell(float(lam)), _cell(res.defect), _cell(res.bound), str(res.within_bound).lower()])
            recs.append({"height": int(K), "lam": float(lam), "defect": res.defect, "bound": res.bound,
                         "base_width": res.base_width, "within_bound": res.within_bound})
    out = {"mode": int(r["mode"]), "towers": recs, "all_within_bound": all(x["within_bound"] for x in recs)}
    return Artifacts(out, ["height", "lam", "defect", "bound", "within_bound"], rows)


def cmd_cohom(ctx: Context) -> Artifacts:
    r = ctx.cfg.run
    n = int(r["mode"])
    Bs = [int(v) for v in r["basis_sizes"]]
    rep = cohomological_residual_sweep(ctx.skew, None, n, Bs, int(r["orbit_length"]))
    inv = {B: best_invariant_defect(ctx.skew, n, B).defect for B in Bs}
    out = rep.as_dict()
    out["best_invariant_defect"] = {str(B): v for B, v in inv.items()}
    rows = [[B, _cell(res), _cell(inv[B])] for B, res in rep.trend]
    return Artifacts(out, ["basis_size", "residual", "best_invariant_defect"], rows)


def cmd_commutator(ctx: Context) -> Artifacts:
    r = ctx.cfg.run
    skew = ctx.skew
    x = float(r["x0"])
    a = skew.base.interval_index(x)
    s = float(r["s"]) if float(r["s"]) >= 0 else 0.5 * float(skew.h[a])
    st = state_at(skew, x, s, float(r["rho0"]))
    rows, worst = [], 0.0
    for t in r["t_values"]:
        t = float(t)
        shift = commutator_shift(skew, st, t)
        diff = circ_dist(shift, t * t)
        worst = max(worst, diff)
        rows.append([_cell(t), _cell(shift), _cell(t * t), _cell(diff)])
    out = {"x": x, "s": s, "rho": st.rho, "max_diff": worst, "t_values": [float(t) for t in r["t_values"]]}
    return Artifacts(out, ["t", "shift", "t2", "diff"], rows)


HANDLERS = {
    "validate": cmd_validate,
    "suspend": cmd_suspend,
    "admissible": cmd_admissible,
    "iterate": cmd_iterate,
    "birkhoff": cmd_birkhoff,
    "correlate": cmd_correlate,
    "spectrum": cmd_spectrum,
    "rokhlin": cmd_rokhlin,
    "cohom": cmd_cohom,
    "commutator": cmd_commutator,
}


class _Deferred(Exception):
    def __init__(self, artifacts: Artifacts, exc: Exception):
        self.artifacts = artifacts
        self.exc = exc


def _fail(art: Artifacts, exc: Exception) -> Artifacts:
    raise _Deferred(art, exc)


# -------------------------------------------------------------------- output


def write_artifacts(name: str, cfg: ExperimentConfig, art: Artifacts, out_dir: Path, formats) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{name}-{cfg.spec_hash()[:HASH_CHARS]}"
    paths = []
    if "json" in formats or (art.header is None):
        doc = {"command": name, "spec_hash": cfg.spec_hash(), "config": cfg.echo(), "result": _plain(art.payload)}
        p = out_dir / f"{stem}.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        paths.append(p)
    if "csv" in formats and art.header is not None:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(art.header)
        wr.writerows(art.rows)
        p = out_dir / f"{stem}.csv"
        p.write_text(buf.getvalue())
        paths.append(p)
    return paths


def run_subcommand(name: str, cfg: ExperimentConfig, out_dir=None, formats=None) -> int:
    if name not in HANDLERS:
        raise ValueError(f"unknown command {name!r}")
    out_dir = Path(out_dir if out_dir is not None else cfg.output_dir)
    formats = tuple(formats or cfg.formats)
    ctx = Context(cfg)
    status = EXIT_OK
    try:
        art = HANDLERS[name](ctx)
    except _Deferred as dfr:
        art = dfr.artifacts
        status = EXIT_INVALID if isinstance(dfr.exc, ValidationError) else EXIT_NUMERIC
        print(f"{name}: {dfr.exc}", file=sys.stderr)
    for p in write_artifacts(name, cfg, art, out_dir, formats):
        print(p)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heisenberg-iet", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="experiment configuration (INI)")
    ap.add_argument("--seed", type=int, default=None, help="overrides bundle.seed")
    ap.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    ap.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    ap.add_argument("--format", choices=("json", "csv", "both"), default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ParseError("--seed must be an unsigned 64-bit integer", field="seed")
            cfg = cfg.with_seed(args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ParseError("--threads must be positive", field="threads")
            _accel.set_threads(args.threads)
        formats = None
        if args.format is not None:
            formats = ("json", "csv") if args.format == "both" else (args.format,)
        return run_subcommand(args.command, cfg, args.out, formats)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HeisenbergIetError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
