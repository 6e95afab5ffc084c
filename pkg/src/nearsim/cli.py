"""Command-line entry point.

Subcommands wrap the library into reproducible batch workflows: decision
reports, boundary evaluation and tables, NRP curves, power points, the
varying-g constructions, and power envelopes.  Bounded-time commands
(test, gval, exact, nrp) route through the same handlers the HTTP service
exposes and accept ``--server URL`` to run against a remote instance; the
long-running constructions always run locally.

Every ``--out`` artifact gets a RunManifest JSON sibling recording command,
parameters, seeds, tolerances, and version.  Outputs contain no timestamps
and render floats with ``repr``, so identical manifests yield byte-identical
files.  Exit codes: 0 ok, 2 usage, 3 domain error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .boundary import (
    exact_similar_boundary,
    load_boundary,
    published_optimal_boundary,
    save_boundary,
)
from .envelope import EnvelopeProblem, point_optimal_cr, power_envelope
from .errors import DomainError, NumericError
from .mediation import MediationData, ols_mediation
from .optimize import OptimizeConfig, basic_varying_g, evaluate_q, optimal_varying_g
from .rp import RPGrid, rejection_prob, rejection_prob_3d, wald_rp
from .runtime import set_worker_count
from .schemas import (
    BoundaryValueRequest,
    ExactRequest,
    NrpRequest,
    TestRequest,
)
from .service import post_boundary_value, post_exact, post_nrp, post_test

log = logging.getLogger("nearsim.cli")


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written next to every --out artifact."""

    command: str
    parameters: dict
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    outputs: tuple = ()
    version: str = __version__

    def to_json(self):
        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "seeds": self.seeds,
            "tolerances": self.tolerances,
            "outputs": list(self.outputs),
            "version": self.version,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def _emit(args, text, manifest):
    """Write the artifact and its manifest sibling."""
    _write(args.out, text)
    _write(args.out + ".manifest.json", manifest.to_json())


def _json_text(payload):
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def parse_grid(spec):
    """start:step:stop, endpoint included when it lands on the lattice."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise DomainError("grid must be start:step:stop")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise DomainError("grid entries must be numbers") from None
    if not (np.isfinite(start) and np.isfinite(step) and np.isfinite(stop)):
        raise DomainError("grid entries must be finite")
    if step <= 0.0 or stop < start:
        raise DomainError("grid needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [start + k * step for k in range(n + 1)]


def _parse_point(spec, dims=2):
    parts = spec.split(",")
    if len(parts) != dims:
        raise DomainError("expected %d comma-separated coordinates, got %r" % (dims, spec))
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise DomainError("point coordinates must be numbers: %r" % (spec,)) from None


def _via_server(server, path, payload):
    import httpx

    url = server.rstrip("/") + path
    try:
        resp = httpx.post(url, json=payload, timeout=300.0)
    except httpx.HTTPError as exc:
        raise NumericError("server request failed: %s" % (exc,)) from exc
    if resp.status_code >= 400:
        try:
            body = resp.json()
            message = "%s: %s" % (body.get("error", "error"), body.get("message", body.get("detail", "")))
        except ValueError:
            message = resp.text
        if resp.status_code in (400, 422):
            raise DomainError(message)
        raise NumericError(message)
    return resp.json()


def _call(args, path, request, handler):
    if getattr(args, "server", None):
        return _via_server(args.server, path, request.model_dump())
    return handler(request).model_dump()


# --- subcommand handlers ---------------------------------------------------


def cmd_test(args):
    estimates = None
    if args.data is not None:
        if args.t1 is not None or args.t2 is not None or args.t3 is not None:
            raise DomainError("give either --data or --t1/--t2, not both")
        if not (args.y and args.m and args.x):
            raise DomainError("--data requires --y, --m, --x column names")
        estimates = _estimate_from_csv(args)
        t1, t2, t3 = estimates.t1, estimates.t2, None
    else:
        if args.t1 is None or args.t2 is None:
            raise DomainError("need --t1 and --t2 (or --data with column names)")
        t1, t2, t3 = args.t1, args.t2, args.t3

    req = TestRequest(t1=t1, t2=t2, t3=t3, alpha=args.alpha)
    result = _call(args, "/test", req, post_test)

    if estimates is not None:
        print("estimates: theta1=%.6g (t1=%.4f)  theta2=%.6g (t2=%.4f)  tau*=%.6g" % (
            estimates.theta1, estimates.t1, estimates.theta2, estimates.t2, estimates.tau_star))
    for rep in result["reports"]:
        print("%-10s statistic=%-10.5f boundary=%-10.5f %s" % (
            rep["name"], rep["statistic"], rep["boundary_value"], rep["decision"]))
    if args.out:
        payload = dict(result)
        if estimates is not None:
            payload["estimates"] = {
                "tau": estimates.tau, "theta1": estimates.theta1, "theta2": estimates.theta2,
                "tau_star": estimates.tau_star, "t1": estimates.t1, "t2": estimates.t2,
                "sigma11": estimates.sigma11, "sigma22": estimates.sigma22,
            }
        params = {"t1": t1, "t2": t2, "t3": t3, "alpha": args.alpha}
        if args.data is not None:
            params.update({"data": args.data, "data_sha256": _file_sha(args.data),
                           "y": args.y, "m": args.m, "x": args.x, "controls": args.controls,
                           "ml_variance": bool(args.ml_variance)})
        _emit(args, _json_text(payload), RunManifest(
            command="test", parameters=params, outputs=(args.out,)))


def _estimate_from_csv(args):
    try:
        with open(args.data, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise DomainError("cannot read %s: %s" % (args.data, exc)) from exc
    if not rows:
        raise DomainError("no data rows in %s" % args.data)
    control_names = [c for c in (args.controls.split(",") if args.controls else []) if c]

    def column(name):
        try:
            return tuple(float(r[name]) for r in rows)
        except KeyError:
            raise DomainError("column %r not in %s" % (name, args.data)) from None
        except (TypeError, ValueError):
            raise DomainError("column %r has non-numeric entries" % (name,)) from None

    control_cols = [column(c) for c in control_names]
    data = MediationData(
        y=column(args.y),
        m=column(args.m),
        x=column(args.x),
        controls=tuple(zip(*control_cols)) if control_cols else None,
    )
    return ols_mediation(data, ml_variance=bool(args.ml_variance))


def _file_sha(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def cmd_gval(args):
    req = BoundaryValueRequest(t=args.t, boundary=args.boundary, alpha=args.alpha)
    result = _call(args, "/boundary/value", req, post_boundary_value)
    for t, g in zip(args.t, result["values"]):
        print("g(%s) = %.5f" % (t, g))
    if args.out:
        payload = {"t": args.t, "values": result["values"], "boundary_id": result["boundary_id"]}
        _emit(args, _json_text(payload), RunManifest(
            command="gval",
            parameters={"t": args.t, "boundary": args.boundary, "alpha": args.alpha},
            outputs=(args.out,)))


def cmd_table(args):
    bound = published_optimal_boundary()
    lines = ["t     " + " ".join("+%.2f  " % (c / 100.0) for c in range(10))]
    for row in range(22):
        base = row / 10.0
        vals = bound.eval(np.array([base + c / 100.0 for c in range(10)]))
        lines.append("%.1f   " % base + " ".join("%.5f" % v for v in vals))
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        _emit(args, text, RunManifest(command="table", parameters={}, outputs=(args.out,)))


def cmd_exact(args):
    req = ExactRequest(alpha=args.alpha)
    result = _call(args, "/exact", req, post_exact)
    steps = result["steps"]
    print("exact similar boundary at alpha=%g: %d steps" % (result["level"], len(steps)))
    for j, c in enumerate(steps, start=1):
        print("  c_%d = %.10f" % (j, c))
    if args.out:
        bound = exact_similar_boundary(result["level"])
        save_boundary(bound, args.out)
        _write(args.out + ".manifest.json", RunManifest(
            command="exact", parameters={"alpha": args.alpha}, outputs=(args.out,)).to_json())


def cmd_nrp(args):
    grid = parse_grid(args.grid)
    req = NrpRequest(boundary=args.boundary, grid=grid, alpha=args.alpha, tol=args.tol)
    result = _call(args, "/nrp", req, post_nrp)
    for point, value, err in zip(result["points"], result["values"], result["errors"]):
        print("mu0=%-8g nrp=%.10f  err<=%.2e" % (point[1], value, err))
    if args.out:
        _emit(args, _json_text(result), RunManifest(
            command="nrp",
            parameters={"boundary": args.boundary, "grid": args.grid, "alpha": args.alpha},
            tolerances={"tol": args.tol},
            outputs=(args.out,)))


def cmd_power(args):
    if not args.mu:
        raise DomainError("need at least one --mu point")
    dims = 3 if args.rule == "g3d" else 2
    points = [_parse_point(spec, dims) for spec in args.mu]
    if args.rule == "g":
        if args.boundary_file:
            bound = load_boundary(args.boundary_file)
        else:
            bound = published_optimal_boundary()
        values = [rejection_prob(bound, p, tol=args.tol) for p in points]
    elif args.rule == "lr":
        from .boundary import lr_boundary

        values = [rejection_prob(lr_boundary(args.alpha), p, tol=args.tol) for p in points]
    elif args.rule == "wald":
        values = [wald_rp(p, alpha=args.alpha, tol=args.tol) for p in points]
    else:
        values = [rejection_prob_3d(p, tol=args.tol) for p in points]
    for p, v in zip(points, values):
        print("mu=%-20s power=%.10f" % (",".join("%g" % c for c in p), v))
    if args.out:
        payload = {"points": [list(p) for p in points], "values": values, "rule": args.rule}
        _emit(args, _json_text(payload), RunManifest(
            command="power",
            parameters={"mu": args.mu, "rule": args.rule, "alpha": args.alpha,
                        "boundary_file": args.boundary_file},
            tolerances={"tol": args.tol},
            outputs=(args.out,)))


def cmd_optimize(args):
    if args.out:
        handler = logging.FileHandler(args.out + ".log", mode="w")
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s %(message)s"))
        handler.setLevel(logging.INFO)
        opt_log = logging.getLogger("nearsim.optimize")
        opt_log.addHandler(handler)
        opt_log.setLevel(logging.INFO)
    knobs = dict(
        n_knots=args.knots,
        epsilon=args.epsilon,
        alpha=args.alpha,
        tol=args.tol,
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
    )
    if args.optimal:
        if not args.envelope_file:
            raise DomainError("--optimal requires --envelope-file from the envelope command")
        env = _load_envelope_grid(args.envelope_file)
        config = OptimizeConfig(alt_grid=env.points, **knobs)
        bound = optimal_varying_g(config, env)
        achieved = None
    else:
        config = OptimizeConfig(**knobs)
        bound, achieved = basic_varying_g(config)
    q, eps, max_nrp = evaluate_q(bound, config)
    if achieved is None:
        print("optimal varying-g: J=%d  Q=%.6e  eps=%.6e  max NRP=%.10f" % (
            len(bound.knots) - 2, q, eps, max_nrp))
    else:
        print("basic varying-g: J=%d  Q=%.6e  achieved eps=%.6e  max NRP=%.10f" % (
            len(bound.knots) - 2, q, achieved, max_nrp))
    if args.out:
        save_boundary(bound, args.out)
        _write(args.out + ".manifest.json", RunManifest(
            command="optimize",
            parameters={"knots": args.knots, "epsilon": args.epsilon, "alpha": args.alpha,
                        "max_iterations": args.max_iterations, "optimal": bool(args.optimal),
                        "envelope_file": args.envelope_file},
            seeds={"seed": args.seed, "restarts": args.restarts},
            tolerances={"tol": args.tol},
            outputs=(args.out, args.out + ".log")).to_json())


def _load_envelope_grid(path):
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise DomainError("cannot read %s: %s" % (path, exc)) from exc
    try:
        points = tuple((float(r["mu1"]), float(r["mu2"])) for r in rows)
        values = tuple(float(r["value"]) for r in rows)
        errors = tuple(float(r["gap"]) for r in rows)
    except (KeyError, TypeError, ValueError):
        raise DomainError("%s is not an envelope surface file" % (path,)) from None
    return RPGrid(points=points, values=values, errors=errors, boundary_id="envelope-file")


def cmd_envelope(args):
    if not args.alt:
        raise DomainError("need at least one --alt point")
    alts = [_parse_point(spec) for spec in args.alt]
    nulls = tuple(parse_grid(args.nulls))
    problem = EnvelopeProblem(
        t_max=args.t_max,
        cell_size=args.cell,
        null_points=nulls,
        epsilon=args.epsilon,
        alpha=args.alpha,
        nonsimilar=args.nonsimilar,
    )
    grid = power_envelope(alts, problem)
    for p, v, e in zip(grid.points, grid.values, grid.errors):
        print("mu=(%g, %g)  pi_bar=%.6f  rounding gap=%.2e" % (p[0], p[1], v, e))
    lines = ["mu1,mu2,value,gap"]
    lines += ["%s,%s,%s,%s" % (repr(p[0]), repr(p[1]), repr(v), repr(e))
              for p, v, e in zip(grid.points, grid.values, grid.errors)]
    text = "\n".join(lines) + "\n"
    if args.bitmap:
        sub_problem = EnvelopeProblem(
            t_max=args.t_max, cell_size=args.cell, null_points=nulls,
            alt_point=alts[0], epsilon=args.epsilon, alpha=args.alpha,
            nonsimilar=args.nonsimilar,
        )
        selection, power = point_optimal_cr(sub_problem)
        bitmap = "\n".join("".join(str(int(v)) for v in row) for row in selection) + "\n"
        _write(args.bitmap, bitmap)
        print("selection bitmap for mu=(%g, %g) (power %.6f) -> %s" % (
            alts[0][0], alts[0][1], power, args.bitmap))
    if args.out:
        outputs = (args.out,) + ((args.bitmap,) if args.bitmap else ())
        _emit(args, text, RunManifest(
            command="envelope",
            parameters={"t_max": args.t_max, "cell": args.cell, "nulls": args.nulls,
                        "alt": args.alt, "epsilon": args.epsilon, "alpha": args.alpha,
                        "nonsimilar": bool(args.nonsimilar), "bitmap": args.bitmap},
            outputs=outputs))


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")


# --- parser ----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nearsim",
        description="Near-similar tests of the no-mediation hypothesis.",
    )
    parser.add_argument("--version", action="version", version="nearsim %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, server=False):
        p.add_argument("--alpha", type=float, default=0.05, help="test level (default 0.05)")
        p.add_argument("--out", help="write a structured artifact plus RunManifest sibling")
        p.add_argument("--threads", type=int, help="cap worker threads (NEARSIM_THREADS otherwise)")
        if server:
            p.add_argument("--server", help="route through a running service at this URL")

    p = sub.add_parser("test", help="decision reports for one observation")
    p.add_argument("--t1", type=float)
    p.add_argument("--t2", type=float)
    p.add_argument("--t3", type=float)
    p.add_argument("--data", help="CSV file with named columns")
    p.add_argument("--y", help="outcome column")
    p.add_argument("--m", help="mediator column")
    p.add_argument("--x", help="treatment column")
    p.add_argument("--controls", help="comma-separated control columns")
    p.add_argument("--ml-variance", action="store_true", help="divide variances by n, not df")
    common(p, server=True)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("gval", help="evaluate the boundary function")
    p.add_argument("t", type=float, nargs="+")
    p.add_argument("--boundary", choices=["published", "lr", "exact"], default="published")
    common(p, server=True)
    p.set_defaults(func=cmd_gval)

    p = sub.add_parser("table", help="print the published boundary value table")
    common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("exact", help="construct the exact similar step boundary")
    common(p, server=True)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("nrp", help="null rejection probability curve")
    p.add_argument("--boundary", choices=["published", "lr", "exact", "wald"], default="published")
    p.add_argument("--grid", required=True, help="mu0 grid as start:step:stop")
    p.add_argument("--tol", type=float, default=1e-8)
    common(p, server=True)
    p.set_defaults(func=cmd_nrp)

    p = sub.add_parser("power", help="rejection probability at alternative points")
    p.add_argument("--mu", action="append", default=[],
                   help="alternative point m1,m2 (m1,m2,m3 with --rule g3d); repeatable")
    p.add_argument("--rule", choices=["g", "lr", "wald", "g3d"], default="g")
    p.add_argument("--boundary-file", help="boundary file for --rule g (default published)")
    p.add_argument("--tol", type=float, default=1e-8)
    common(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("optimize", help="construct a near-similar boundary")
    p.add_argument("--knots", type=int, default=16, help="interior knot cap J")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--optimal", action="store_true",
                   help="envelope-matching construction (needs --envelope-file)")
    p.add_argument("--envelope-file", help="surface written by the envelope command")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("envelope", help="discretized power envelope surface")
    p.add_argument("--t-max", type=float, default=6.0)
    p.add_argument("--cell", type=float, default=0.05)
    p.add_argument("--nulls", default="0:0.2:4", help="null grid start:step:stop")
    p.add_argument("--alt", action="append", default=[], help="alternative point m1,m2; repeatable")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--nonsimilar", action="store_true", help="drop the lower similarity bounds")
    p.add_argument("--bitmap", help="write the first alt point's 0/1 selection here")
    common(p)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        set_worker_count(args.threads)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s %(message)s")
    try:
        args.func(args)
    except DomainError as exc:
        print("error[%s]: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 3
    except NumericError as exc:
        print("error[%s]: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 4
    except ValueError as exc:
        # pydantic validation on locally built requests
        print("error[ValidationError]: %s" % (exc,), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
