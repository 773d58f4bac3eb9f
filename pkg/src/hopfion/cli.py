"""Command-line interface: ``hopfion <command> ...``.

Every command prints one JSON object on stdout.  Exit codes: 0 success,
2 usage or I/O error, 3 topological precondition failed or discontinuous
relaxation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from importlib import metadata

import numpy as np

from . import ansatz1d, field as fld, topology
from .energy import IllConditionedPlaquette, energy_e4
from .fieldfile import FORMAT_VERSION, FieldFileError, read_field, write_field
from .geometry import Kind, ManifoldError, ManifoldSpec, bound_value, build_geometry
from .optimize import RelaxConfig, relax

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_TOPOLOGY, EXIT_NUMERIC = 0, 2, 3, 4

MANIFOLDS = {"s3": Kind.S3, "t3": Kind.T3, "s2s1": Kind.S2xS1, "s2": Kind.S2, "t2": Kind.T2}
# regular values used when the charge is estimated by preimage linking
LINK_VALUES = (np.array([0.48, 0.36, 0.8]), np.array([-0.64, 0.6, -0.48]))

log = logging.getLogger("hopfion")


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x)}")


def _version() -> str:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return f"hopfion {pkg} (field format {FORMAT_VERSION}, report schema {SCHEMA_VERSION})"


# ---------------------------------------------------------------- init


def _dims(args, kind: Kind) -> tuple[int, ...]:
    if args.dims:
        return tuple(int(x) for x in args.dims.split(","))
    return (args.size,) * kind.ndim


def cmd_init(args) -> int:
    kind = MANIFOLDS[args.manifold]
    if kind is Kind.S2xS1 and args.L is None:
        raise UsageError("--L is required for s2s1")
    periods = tuple(float(x) for x in args.periods.split(",")) if args.periods else None
    spec = ManifoldSpec(kind, _dims(args, kind), L=args.L, periods=periods)
    a = args.ansatz
    allowed = {
        "amn": Kind.S3,
        "vav": Kind.S2xS1,
        "t3vav": Kind.T3,
        "baby-s2": Kind.S2,
        "baby-t2": Kind.T2,
        "lump-t2": Kind.T2,
    }
    if allowed[a] is not kind:
        raise UsageError(f"ansatz {a} needs manifold {allowed[a].value}, got {kind.value}")
    if a == "amn":
        prof = ansatz1d.amn_profile_minimize(args.m, args.n) if args.profile == "optimal" else None
        f, charge = fld.init_amn(spec, args.m, args.n, prof), args.m * args.n
    elif a == "vav":
        prof = ansatz1d.vav_minimize(L=args.L) if args.profile == "optimal" else fld.linear_vav_profile()
        f, charge = fld.init_vav_s2s1(spec, prof), 2
    elif a == "t3vav":
        f, charge = fld.init_t3_vav(spec, args.pairs), 2 * args.pairs
    elif a == "baby-s2":
        f, charge = fld.init_baby_s2(spec, args.Q), args.Q
    elif a == "baby-t2":
        f, charge = fld.init_baby_t2(spec), 2
    else:
        f, charge = fld.init_lump_t2(spec, args.Q), args.Q
    if args.perturb:
        f = fld.perturb(f, args.perturb, args.seed)
    write_field(args.output, f, charge=charge)
    _emit({"output": args.output, "manifold": kind.value, "dims": list(spec.dims), "charge": charge})
    return EXIT_OK


# ---------------------------------------------------------------- measurements


def _charge(f, header, geom) -> dict:
    """Charge by the best available estimator for the manifold."""
    kind = f.spec.kind
    out = {"Q": header.get("charge"), "Q_numeric": None, "residual": None, "net_fluxes": None, "method": None}
    if kind.ndim == 2:
        rep = topology.degree_2d(f, geom)
        out.update(Q=rep.Q, Q_numeric=rep.Q_numeric, residual=rep.residual, method="degree")
    elif kind is Kind.T3:
        fluxes = [topology.net_flux(f, a, geom) for a in range(3)]
        out["net_fluxes"] = fluxes
        rep = topology.hopf_charge_t3(f, geom)
        out.update(Q=rep.Q, Q_numeric=rep.Q_numeric, residual=rep.residual, method="spectral")
    else:
        axes = (0,) if kind is Kind.S3 else (0, 2)
        out["net_fluxes"] = [topology.net_flux(f, a, geom) for a in axes]
        c1 = topology.preimage(f, LINK_VALUES[0], "stereo3", geom)
        c2 = topology.preimage(f, LINK_VALUES[1], "stereo3", geom)
        q = topology.gauss_linking(c1, c2)
        out.update(Q_numeric=q, residual=abs(q - round(q)), method="preimage-linking")
        if out["Q"] is None:
            out["Q"] = int(round(q))
    return out


def cmd_charge(args) -> int:
    f, header = read_field(args.input)
    _emit(_charge(f, header, build_geometry(f.spec)))
    return EXIT_OK


def _energy_dict(f, geom) -> dict:
    rep = energy_e4(f, geom)
    out = {
        "E4": rep.E4,
        "E2": rep.E2,
        "kappa": rep.kappa,
        "density_min": rep.density_min,
        "density_max": rep.density_max,
    }
    if f.spec.ndim == 3:
        out.update(E_x=rep.directional[0], E_y=rep.directional[1], E_z=rep.directional[2])
    return out


def cmd_energy(args) -> int:
    f, header = read_field(args.input)
    out = _energy_dict(f, build_geometry(f.spec))
    if header.get("charge"):
        out["E_over_bound"] = out["E4"] / bound_value(f.spec, header["charge"])
    _emit(out)
    return EXIT_OK


def cmd_preimage(args) -> int:
    f, _ = read_field(args.input)
    try:
        p = np.array([float(x) for x in args.value.split(",")])
    except ValueError:
        raise UsageError("--value must be three comma-separated numbers") from None
    if p.shape != (3,) or np.linalg.norm(p) == 0:
        raise UsageError("--value must be a nonzero 3-vector")
    p = p / np.linalg.norm(p)
    proj = "stereo3" if args.project == "stereo" else "none"
    curve = topology.preimage(f, p, proj)
    if args.output:
        curve.to_csv(args.output)
    _emit({"value": p, "components": len(curve), "points": [len(c) - 1 for c in curve.components], "output": args.output})
    return EXIT_OK


def cmd_profile(args) -> int:
    if args.family == "vav":
        L = "auto" if args.L == "auto" else float(args.L)
        sol = ansatz1d.vav_minimize(n_theta=args.n_theta, L=L)
        out = {"L": sol.L, "E": sol.energy, "E_over_Q": sol.energy / 2.0}
    else:
        sol = ansatz1d.amn_profile_minimize(args.m, args.n, n_r=args.n_r)
        formula = ansatz1d.amn_energy_formula(args.m, args.n)
        out = {"m": args.m, "n": args.n, "E": sol.energy, "formula": formula, "E_over_Q": sol.energy / (args.m * args.n)}
    out["monotone"] = sol.is_monotone()
    if args.output:
        sol.to_csv(args.output)
        out["output"] = args.output
    _emit(out)
    return EXIT_OK


def cmd_bound(args) -> int:
    kind = MANIFOLDS[args.manifold]
    dims = (4,) * kind.ndim
    spec = ManifoldSpec(kind, dims, L=1.0 if kind is Kind.S2xS1 else None)
    _emit({"manifold": kind.value, "Q": args.Q, "bound": bound_value(spec, args.Q)})
    return EXIT_OK


# ---------------------------------------------------------------- relax


def run_report(result, header, geom, wall: float) -> dict:
    """The machine-readable summary of one relaxation."""
    f = result.field
    out = {
        "manifold": f.spec.kind.value,
        "dims": list(f.spec.dims),
        "beta_final": 0.0,
        "converged": bool(result.converged),
        "discontinuous": bool(result.discontinuous),
        "iterations": int(result.iterations),
        "wall_seconds": wall,
        "kappa": geom.kappa,
        "E_x": None,
        "E_y": None,
        "E_z": None,
    }
    rep = result.report
    out["E4"] = rep.E4 if rep else None
    out["E2"] = rep.E2 if rep else None
    if rep and f.spec.ndim == 3:
        out.update(E_x=rep.directional[0], E_y=rep.directional[1], E_z=rep.directional[2])
    charge = {"Q": header.get("charge"), "Q_numeric": None, "residual": None}
    if not result.discontinuous:
        try:
            c = _charge(f, header, geom)
            charge = {k: c[k] for k in ("Q", "Q_numeric", "residual")}
        except (topology.TopologyError, IllConditionedPlaquette, ValueError) as exc:
            log.warning("charge not measured: %s", exc)
    out.update(charge)
    q = out["Q"]
    out["E_over_bound"] = out["E4"] / bound_value(f.spec, q) if q and out["E4"] is not None else None
    return out


def cmd_relax(args) -> int:
    f, header = read_field(args.input)
    geom = build_geometry(f.spec)
    cfg = RelaxConfig(
        beta0=args.beta0,
        beta_decay=args.beta_decay,
        beta_stages=args.beta_stages,
        grad_tol=args.tol,
        max_iters=args.max_iters,
        final_max_iters=args.final_max_iters,
    )
    t0 = time.perf_counter()
    result = relax(f, geom, cfg)
    wall = time.perf_counter() - t0
    if args.output:
        write_field(args.output, result.field, charge=header.get("charge"))
    if args.trace:
        result.write_trace(args.trace)
    report = run_report(result, header, geom, wall)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
    _emit(report)
    if result.discontinuous:
        return EXIT_TOPOLOGY
    return EXIT_OK if result.converged else EXIT_NUMERIC


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hopfion", description="Strong-coupling Hopf and baby-Skyrme solitons.")
    p.add_argument("--version", action="version", version=_version())
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="write an initial field")
    s.add_argument("--manifold", choices=sorted(MANIFOLDS), required=True)
    s.add_argument("--size", type=int, default=32)
    s.add_argument("--dims", help="comma-separated lattice sizes (overrides --size)")
    s.add_argument("--ansatz", choices=["amn", "vav", "t3vav", "baby-s2", "baby-t2", "lump-t2"], required=True)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--pairs", type=int, default=1)
    s.add_argument("--Q", type=int, default=1)
    s.add_argument("--L", type=float)
    s.add_argument("--periods", help="comma-separated period factors of a torus")
    s.add_argument("--profile", choices=["linear", "optimal"], default="linear")
    s.add_argument("--perturb", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("relax", help="minimize the energy with the beta phase-out")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--beta0", type=float, default=RelaxConfig.beta0)
    s.add_argument("--beta-decay", type=float, default=RelaxConfig.beta_decay)
    s.add_argument("--beta-stages", type=int, default=RelaxConfig.beta_stages)
    s.add_argument("--max-iters", type=int, default=RelaxConfig.max_iters)
    s.add_argument("--final-max-iters", type=int, default=RelaxConfig.final_max_iters)
    s.add_argument("--tol", type=float, default=RelaxConfig.grad_tol)
    s.add_argument("--report")
    s.add_argument("--trace")
    s.set_defaults(func=cmd_relax)

    for name, fn, text in (("charge", cmd_charge, "topological charge"), ("energy", cmd_energy, "energy report")):
        s = sub.add_parser(name, help=text)
        s.add_argument("-i", "--input", required=True)
        s.set_defaults(func=fn)

    s = sub.add_parser("preimage", help="extract the preimage curve of a regular value")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--value", required=True, help="target point x,y,z (normalized)")
    s.add_argument("--project", choices=["none", "stereo"], default="none")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_preimage)

    s = sub.add_parser("profile", help="solve a one-dimensional reduced problem")
    fam = s.add_subparsers(dest="family", required=True)
    v = fam.add_parser("vav")
    v.add_argument("--L", default="auto")
    v.add_argument("--n-theta", type=int, default=1024)
    v.add_argument("-o", "--output")
    a = fam.add_parser("amn")
    a.add_argument("--m", type=int, required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--n-r", type=int, default=2000)
    a.add_argument("-o", "--output")
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("bound", help="topological energy bound")
    s.add_argument("--manifold", choices=sorted(MANIFOLDS), required=True)
    s.add_argument("--Q", type=int, required=True)
    s.set_defaults(func=cmd_bound)
    return p


def _cap_threads(n: int) -> None:
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads:
        _cap_threads(args.threads)
    try:
        return args.func(args)
    except (UsageError, ManifoldError) as exc:
        print(f"hopfion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FieldFileError, OSError) as exc:
        print(f"hopfion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except topology.TopologyError as exc:
        print(f"hopfion: topology: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (IllConditionedPlaquette, ansatz1d.ConvergenceError, FloatingPointError) as exc:
        print(f"hopfion: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"hopfion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
