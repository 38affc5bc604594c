"""Command-line front door.

Subcommands: moments, coefficients, expand, estimate, gauss-bonnet, reduce,
dynamics, fixtures. A config file (--config file.json) pre-fills options;
explicit flags win. Outputs are written atomically (temp file + rename) and
deterministically (sorted keys, shortest round-trip float formatting); every
JSON document carries schema_version and the constants snapshot it used.

Exit codes: 0 success, 2 validation failure, 3 numerical failure (with a
diagnostic JSON on stderr).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ValidationFailure(Exception):
    pass


class NumericalFailure(Exception):
    pass


# --------------------------------------------------------------------------
# io helpers
# --------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit_json(path: str | None, doc: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if path:
        _atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _emit_csv(path: str | None, header: list, rows: list, comment: str) -> None:
    lines = [f"# {comment}", ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        _atomic_write(path, text)
    else:
        sys.stdout.write(text)


_REQUIRED = {
    "moments": ("n",), "coefficients": ("n",), "expand": ("geometry", "n"),
    "estimate": ("target", "n"), "gauss-bonnet": ("surface",),
    "reduce": ("field", "k"), "dynamics": ("mode",), "fixtures": ("action",),
}

_DEFAULTS = {
    "moments": {"R": 60.0, "format": "json"},
    "coefficients": {"R": 60.0},
    "expand": {"eps_levels": 6, "eps0": 1e-2, "R": 40.0, "functional": "escobar",
               "radius": 1.0, "value": 1.0, "H": 1.0},
    "estimate": {"geometry": "euclidean-ball", "eps": 1e-3, "sweep": 5, "R": 30.0,
                 "radius": 1.0, "value": 1.0, "H": 1.0, "p": 3.0},
    "gauss-bonnet": {"mode": "exact", "inner_radius": 0.5, "eps": 1e-2},
    "reduce": {"n": 6, "seeds": 64},
    "dynamics": {"n": 2, "m": 0.5, "E0": 1.0, "M0": 1.0, "C": None,
                 "horizon": 100.0, "ladder": "1e-2:1e-5", "rungs": 4},
    "fixtures": {"path": None},
}


def _merge_config(ns: argparse.Namespace) -> argparse.Namespace:
    """Config fills unset options; explicit flags win; defaults fill the rest."""
    raw = {}
    if getattr(ns, "config", None):
        try:
            raw = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationFailure(f"cannot read config: {exc}")
        if not isinstance(raw, dict):
            raise ValidationFailure("config must be a JSON object")
        known = set(vars(ns))
        unknown = [k for k in raw if k.replace("-", "_") not in known]
        if unknown:
            raise ValidationFailure(f"unknown config keys: {unknown}")
    for k, v in raw.items():
        attr = k.replace("-", "_")
        if getattr(ns, attr, None) is None:
            setattr(ns, attr, v)
    for attr, v in _DEFAULTS.get(ns.command, {}).items():
        if getattr(ns, attr, None) is None:
            setattr(ns, attr, v)
    missing = [a for a in _REQUIRED[ns.command] if getattr(ns, a, None) is None]
    if missing:
        raise ValidationFailure(f"missing required option(s): {missing}")
    return ns


def _geometry(ns):
    from .geometry import geometry_catalog
    kw = {}
    if ns.geometry == "euclidean-ball":
        kw["radius"] = ns.radius
    if ns.geometry in ("ricci-only", "boundary-scal-only"):
        kw["value"] = ns.value
    if ns.geometry == "h-only":
        kw["H"] = ns.H
    if ns.geometry == "umbilic-sphere-cap":
        kw["curvature"] = ns.value
    return geometry_catalog(ns.geometry, ns.n, **kw)


def _int_check(name, value):
    if value != int(value):
        raise ValidationFailure(f"{name} must be an integer, got {value}")
    return int(value)


# --------------------------------------------------------------------------
# subcommand implementations
# --------------------------------------------------------------------------

def cmd_moments(ns) -> str:
    from .profiles import escobar_halfspace_optimizer, MomentDivergentDimension
    from .moments import weighted_moments
    n = _int_check("--n", ns.n)
    try:
        U = escobar_halfspace_optimizer(n)
        tab = weighted_moments(U, ns.R)
    except MomentDivergentDimension as exc:
        raise ValidationFailure(str(exc))
    if ns.format == "csv":
        rows = [(k, tab.values[k], tab.errors[k]) for k in sorted(tab.values)]
        rows += [(f"{k}_limit", tab.limits[k], tab.limit_errors[k])
                 for k in sorted(tab.limits)]
        _emit_csv(ns.out, ["name", "value", "error_estimate"], rows,
                  f"truncated moments of chi_R U_+ at R={tab.R}, n={n}; "
                  "dimensionless after unit-Dirichlet normalization")
    else:
        _emit_json(ns.out, {"kind": "moment-table", "n": n, "R": tab.R,
                            "values": tab.values, "errors": tab.errors,
                            "limits": tab.limits, "limit_errors": tab.limit_errors})
    return f"moments n={n} R={tab.R}: Theta_limit={tab.limits['Theta']:.9g}"


def cmd_coefficients(ns) -> str:
    from .profiles import escobar_halfspace_optimizer
    from .moments import weighted_moments, escobar_constants
    n = _int_check("--n", ns.n)
    U = escobar_halfspace_optimizer(n)
    C = escobar_constants(n, weighted_moments(U, ns.R))
    _emit_json(ns.out, {"kind": "escobar-constants", "constants": C.snapshot()})
    return (f"coefficients n={n}: S*={C.S_star:.9g} rho={C.rho_conf:.9g} "
            f"kappa3={C.kappa3 if C.kappa3 is not None else 'n/a'}")


def cmd_expand(ns) -> str:
    from .profiles import escobar_halfspace_optimizer
    from .geometry import fermi_jet
    from .energy import deficit_series
    n = ns.n = _int_check("--n", ns.n)
    geo = _geometry(ns)
    U = escobar_halfspace_optimizer(n)
    eps = ns.eps0 * 0.5 ** np.arange(ns.eps_levels)
    jet = fermi_jet(geo.data, order=2, chart_radius=max(1.0, ns.eps0 * 2.1 * ns.R))
    sweep = deficit_series(jet, U, ns.R, eps, functional=ns.functional,
                           workers=ns.workers)
    rows = [(r.eps, r.numerator, r.denominator, r.quotient, r.deficit, r.err_estimate)
            for r in sweep.results]
    _emit_csv(ns.out, ["eps", "numerator", "denominator", "quotient", "deficit", "err_est"],
              rows, f"{ns.functional} sweep on {geo.name}, n={n}, R={ns.R}; "
              "deficit vs the flat value at the same cutoff")
    return (f"expand {geo.name} n={n}: deficit({eps[0]:.3g})={sweep.deficits[0]:.6g}, "
            f"series c1={sweep.series[0]:.6g}")


def cmd_estimate(ns) -> str:
    from .profiles import escobar_halfspace_optimizer
    from .moments import weighted_moments, escobar_constants, gn_coefficients
    from .estimators import (escobar_single_scale_sweep, escobar_three_scale_sweep,
                             ring_II_estimator, gn_interior_sweep, gn_boundary_sweep)
    from .geometry import InteriorPointData
    from .fixtures import cached_gn_profiles
    n = ns.n = _int_check("--n", ns.n)
    eps = ns.eps * 0.5 ** np.arange(ns.sweep)
    if ns.target in ("H", "mass", "theta", "ringII"):
        geo = _geometry(ns)
        U = escobar_halfspace_optimizer(n)
        if ns.target == "H":
            sw = escobar_single_scale_sweep(geo.data, U, ns.R, eps)
            reports = sw["reports"]
            order = sw["order"]
        else:
            sw = escobar_three_scale_sweep(geo.data, U, ns.R, eps)
            key = {"mass": "mass", "theta": "theta", "ringII": "mass"}[ns.target]
            reports = sw["reports"][key]
            order = sw["orders"][key]
        if ns.target == "ringII":
            from .energy import channel_fit_second_order
            C = escobar_constants(n, weighted_moments(U, ns.R))
            # fit the channel constants at the sweep's own cutoff so the
            # inversion and the deficits share one truncation
            fit = channel_fit_second_order(n, U, C, R=ns.R)
            C.kappa1, C.kappa2 = fit.kappa1, fit.kappa2
            C.kappa3 = fit.kappa3_fit
            reports = [ring_II_estimator(r.estimate, geo.data, C) for r in reports]
            errs = [r.error for r in reports]
            from .energy import empirical_slope
            order = empirical_slope(eps, errs)
        scales = sw["scales"]
        doc = {"kind": "estimator-report", "target": ns.target,
               "geometry": geo.name, "n": n, "empirical_order": order,
               "constants": {"S_star_R": scales.S_star, "rho_conf_R": scales.rho,
                             "R": ns.R},
               "rows": [{"eps": float(e), "estimate": r.estimate,
                         "truth": r.truth, "error": r.error}
                        for e, r in zip(eps, reports)]}
        _emit_json(ns.out, doc)
        return (f"estimate {ns.target} on {geo.name}: finest={reports[-1].estimate:.6g} "
                f"order={order:.3f}")
    if ns.target == "scal":
        Q, Qp = cached_gn_profiles(2 if n == 2 else n, ns.p)
        co = gn_coefficients(n, ns.p, Q, Qp, R=ns.R)
        data = InteriorPointData(n=n, scal=ns.value)
        sw = gn_interior_sweep(data, Q, co, ns.R, eps)
        doc = {"kind": "estimator-report", "target": "scal", "n": n,
               "empirical_order": sw["order"], "constants": co.snapshot(),
               "rows": [{"eps": float(e), "estimate": r.estimate, "truth": r.truth,
                         "error": r.error} for e, r in zip(eps, sw["reports"])]}
        _emit_json(ns.out, doc)
        return f"estimate scal: finest={sw['reports'][-1].estimate:.6g} order={sw['order']:.3f}"
    raise ValidationFailure(f"unknown target {ns.target}")


def cmd_gauss_bonnet(ns) -> str:
    from .estimators import (gauss_bonnet_recovery, disk_fields_exact,
                             annulus_fields_exact, disk_fields_estimated)
    if ns.mode == "exact":
        if ns.surface == "disk":
            interior, boundary = disk_fields_exact()
        else:
            interior, boundary = annulus_fields_exact(ns.inner_radius)
    else:
        if ns.surface != "disk":
            raise ValidationFailure("estimated mode implemented for the disk")
        from .moments import gn_coefficients
        from .fixtures import cached_gn_profiles
        Q, Qp = cached_gn_profiles(2, 3.0)
        co = gn_coefficients(2, 3.0, Q, Qp, R=20.0)
        interior, boundary = disk_fields_estimated(Q, Qp, co, eps=ns.eps)
    rep = gauss_bonnet_recovery(2, interior, boundary)
    _emit_json(ns.out, {"kind": "gauss-bonnet", "surface": ns.surface,
                        "mode": ns.mode, "chi_hat": rep.estimate,
                        **rep.extras})
    return f"gauss-bonnet {ns.surface} ({ns.mode}): chi_hat={rep.estimate:.9g}"


def cmd_reduce(ns) -> str:
    from .reduced import ExpressionField, GridField, critical_point_search, CircleDomain
    spec = ns.field
    if spec and Path(spec).exists():
        raw = json.loads(Path(spec).read_text())
        if "expression" in raw:
            fld = ExpressionField(raw["expression"])
        elif "samples" in raw:
            fld = GridField(raw["samples"])
        else:
            raise ValidationFailure("field spec needs 'expression' or 'samples'")
    else:
        fld = ExpressionField(spec)
    k = _int_check("--k", ns.k)
    pts = critical_point_search(fld, k, CircleDomain(), seeds=ns.seeds, seed=ns.seed)
    doc = {"kind": "critical-points", "k": k, "n": ns.n, "seeds": ns.seeds,
           "points": [{"centers": p.centers.ravel().tolist(), "value": p.value,
                       "grad_norm": p.grad_norm, "inertia": list(p.inertia),
                       "degenerate": p.degenerate} for p in pts]}
    _emit_json(ns.out, doc)
    return f"reduce: {len(pts)} critical configuration(s) of W_{k}"


def cmd_dynamics(ns) -> str:
    from .dynamics import (DecayParams, ode_decay_check, window_ladder,
                           decay_envelope)
    if ns.mode == "fde":
        par = DecayParams(n=_int_check("--n", ns.n), m=ns.m, E0=ns.E0, M0=ns.M0,
                          C=ns.C)
        chk = ode_decay_check(par, ns.horizon)
        rows = list(zip(chk["t"], chk["E"], chk["envelope"]))
        _emit_csv(ns.out, ["t", "E_ode", "envelope"], rows,
                  f"fde decay n={par.n} m={par.m} alpha={par.alpha} "
                  f"kappa={par.kappa} (E' = -kappa E^(1/alpha) equality run)")
        return (f"dynamics fde: alpha={par.alpha:.6g} sup_gap={chk['sup_gap']:.3g} "
                f"majorized={chk['majorized']}")
    if ns.mode == "window":
        lo, hi = ns.ladder.split(":")
        lo, hi = float(lo), float(hi)
        rungs = ns.rungs
        ds = np.geomspace(lo, hi, rungs)
        lad = window_ladder(_int_check("--n", ns.n), ds)
        rows = list(zip(lad["d"], lad["lambda1"], lad["scaled"]))
        _emit_csv(ns.out, ["d", "lambda1", "scaled"], rows,
                  "window eigenvalues; scaled = lambda1*|log d| (n=2) or lambda1/d^(n-2) (n=3)")
        return (f"dynamics window: tail variation {lad['tail_variation']:.3%} "
                f"across the last two rungs")
    raise ValidationFailure(f"unknown dynamics mode {ns.mode}")


def cmd_fixtures(ns) -> str:
    from . import fixtures
    if ns.action == "regenerate":
        info = fixtures.regenerate(ns.path)
        return f"fixtures regenerated: {info['n_entries']} entries at {info['path']}"
    if ns.action == "verify":
        rep = fixtures.verify(ns.path)
        if not rep["ok"]:
            raise NumericalFailure("fixture drift: "
                                   + json.dumps(rep["failures"], sort_keys=True))
        return f"fixtures verify: {rep['n_entries']} entries ok"
    raise ValidationFailure(f"unknown fixtures action {ns.action}")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bubblelab",
                                description="boundary-bubble energy laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (flags win)")
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--workers", type=int, default=1,
                        help="worker pool size for sweeps")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("moments", help="weighted moment table")
    common(sp)
    sp.add_argument("--n", type=float)
    sp.add_argument("--R", type=float)
    sp.add_argument("--format", choices=("json", "csv"))
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("coefficients", help="Escobar constants")
    common(sp)
    sp.add_argument("--n", type=float)
    sp.add_argument("--R", type=float)
    sp.set_defaults(func=cmd_coefficients)

    sp = sub.add_parser("expand", help="eps-sweep of an energy quotient")
    common(sp)
    sp.add_argument("--geometry")
    sp.add_argument("--n", type=float)
    sp.add_argument("--eps-levels", dest="eps_levels", type=int)
    sp.add_argument("--eps0", type=float)
    sp.add_argument("--R", type=float)
    sp.add_argument("--functional", choices=("escobar", "plain-trace"))
    sp.add_argument("--radius", type=float)
    sp.add_argument("--value", type=float)
    sp.add_argument("--H", type=float)
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("estimate", help="energy-only estimator sweeps")
    common(sp)
    sp.add_argument("--target", choices=("H", "mass", "theta", "ringII", "scal"))
    sp.add_argument("--geometry")
    sp.add_argument("--n", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--sweep", type=int)
    sp.add_argument("--R", type=float)
    sp.add_argument("--radius", type=float)
    sp.add_argument("--value", type=float)
    sp.add_argument("--H", type=float)
    sp.add_argument("--p", type=float)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("gauss-bonnet", help="Euler characteristic recovery")
    common(sp)
    sp.add_argument("--surface", choices=("disk", "annulus"))
    sp.add_argument("--mode", choices=("exact", "estimated"))
    sp.add_argument("--inner-radius", dest="inner_radius", type=float)
    sp.add_argument("--eps", type=float)
    sp.set_defaults(func=cmd_gauss_bonnet)

    sp = sub.add_parser("reduce", help="critical points of the center potential")
    common(sp)
    sp.add_argument("--field", help="expression in theta, or JSON field spec path")
    sp.add_argument("--k", type=float)
    sp.add_argument("--n", type=float)
    sp.add_argument("--seeds", type=int)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("dynamics", help="decay envelopes and window eigenvalues")
    common(sp)
    sp.add_argument("mode", choices=("fde", "window"))
    sp.add_argument("--n", type=float)
    sp.add_argument("--m", type=float)
    sp.add_argument("--E0", type=float)
    sp.add_argument("--M0", type=float)
    sp.add_argument("--C", type=float)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--ladder")
    sp.add_argument("--rungs", type=int)
    sp.set_defaults(func=cmd_dynamics)

    sp = sub.add_parser("fixtures", help="derived-value fixture management")
    common(sp)
    sp.add_argument("action", choices=("regenerate", "verify"))
    sp.add_argument("--path")
    sp.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        ns = _merge_config(ns)
        summary = ns.func(ns)
        print(summary)
        return 0
    except ValidationFailure as exc:
        print(json.dumps({"error": "validation", "detail": str(exc)}), file=sys.stderr)
        return 2
    except (NumericalFailure, RuntimeError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": "numerical", "detail": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
