"""wulff-lab command line.

Subcommands: enumerate | sample | tension | wulff | shape-compare |
analyze | run | report.  Exit codes: 0 success, 1 usage error, 2 check
failure.  The default output root comes from $WULFF_LAB_OUT (else ./runs).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import contours as ct
from . import exact
from . import geometry as geo
from . import labels as lb
from . import samplers
from . import tension as tn
from .experiments import (
    PRESETS,
    default_output_root,
    export_report,
    parse_config_text,
    run_preset,
)
from .lattice import (
    BoundaryCondition,
    CouplingSpec,
    build_lattice,
    read_snapshot,
    write_snapshot,
)
from .rng import RngStream


def _bc_from_flag(name: str, eta: float = 0.0) -> BoundaryCondition:
    if name in ("plus", "minus", "free", "periodic"):
        return BoundaryCondition(name)
    if name.startswith("mixed:"):
        parts = [float(x) for x in name.split(":", 1)[1].split(",")]
        return BoundaryCondition.mixed_pm(parts)
    if name == "wall":
        return BoundaryCondition.wall_field(eta)
    raise ValueError(f"unknown bc {name!r}")


def _build_geom(args):
    return build_lattice(
        args.shape,
        args.N,
        d=getattr(args, "d", 2),
        M=getattr(args, "M", None),
        dims=None,
        polygon=_load_polygon(args.polygon) if getattr(args, "polygon", None) else None,
    )


def _load_polygon(path):
    rows = Path(path).read_text().strip().splitlines()
    out = []
    for line in rows[1:] if rows and rows[0].lower().startswith("x") else rows:
        x, y = line.split(",")
        out.append((float(x), float(y)))
    return out


def cmd_enumerate(args) -> int:
    geom = _build_geom(args)
    bc = _bc_from_flag(args.bc, args.eta)
    table = exact.enumerate_gibbs(geom, bc, CouplingSpec.nn(args.beta), h=args.h)
    out = {
        "geometry": geom.describe(),
        "bc": bc.label(),
        "beta": args.beta,
        "h": args.h,
        "log_z": table.log_z,
        "probabilities": {str(k): float(table.probs[k]) for k in range(table.probs.size)},
    }
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_sample(args) -> int:
    geom = _build_geom(args)
    rng = RngStream(args.seed, f"cli/{args.model}")
    outdir = Path(args.out) if args.out else default_output_root() / "samples"
    outdir.mkdir(parents=True, exist_ok=True)
    bc = _bc_from_flag(args.bc, args.eta)
    meta = {
        "beta": args.beta,
        "h": args.h,
        "eta": args.eta,
        "seed": args.seed,
        "model": args.model,
    }
    paths = []
    n_out = 0
    if args.model == "glauber":
        gen = samplers.glauber_sample(
            geom, bc, args.beta, sweeps=args.sweeps, rng=rng, h=args.h,
            eta=args.eta, thin=args.thin, burnin=args.burnin,
        )
    elif args.model == "kawasaki":
        if args.constraint is None:
            print("kawasaki needs --constraint M", file=sys.stderr)
            return 1
        gen = samplers.kawasaki_sample(
            geom, bc, args.beta, args.constraint, sweeps=args.sweeps, rng=rng,
            thin=args.thin, burnin=args.burnin,
        )
    elif args.model == "restricted":
        if args.cutoff is None:
            print("restricted needs --cutoff s", file=sys.stderr)
            return 1
        gen = samplers.restricted_sample(
            geom, args.beta, args.cutoff, sweeps=args.sweeps, rng=rng,
            thin=args.thin, burnin=args.burnin,
        )
    elif args.model == "fk":
        p = 1.0 - math.exp(-2.0 * args.beta)
        gen = samplers.fk_sample(
            geom, args.wiring, p, sweeps=args.sweeps, rng=rng,
            thin=args.thin, burnin=args.burnin,
        )
    elif args.model == "bernoulli":
        gen = (samplers.bernoulli_sample(geom, args.p, rng.child(str(i))) for i in range(args.sweeps))
    else:
        print(f"unknown model {args.model}", file=sys.stderr)
        return 1
    for cfg in gen:
        path = outdir / f"snap_{n_out:05d}.bin"
        write_snapshot(path, cfg, meta)
        paths.append(path.name)
        n_out += 1
    (outdir / "snapshots.json").write_text(
        json.dumps({"files": paths, **meta}, indent=2, sort_keys=True) + "\n"
    )
    print(f"wrote {n_out} snapshots to {outdir}")
    return 0


def cmd_tension(args) -> int:
    rng = RngStream(args.seed, "cli/tension")
    if args.method == "stub":
        tab = tn.DirectionalTension.constant(args.stub_value, k=args.directions, beta=args.beta)
    else:
        tab = tn.tension_table(args.beta, k=args.directions, rng=rng, method=args.method)
    if args.convexify:
        tab = tab.convexify()
    text = tab.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_wulff(args) -> int:
    tab = tn.DirectionalTension.from_json(Path(args.tension).read_text())
    if not tab.convexified:
        tab = tab.convexify()
    shape = geo.wulff_shape(tab)
    k1 = geo.normalize_unit_volume(shape)
    kv = geo.dilate(k1, args.volume)
    out = Path(args.out) if args.out else Path("wulff_shape.csv")
    lines = ["x,y"] + [f"{p[0]!r},{p[1]!r}" for p in kv.vertices]
    out.write_text("\n".join(lines) + "\n")
    report = {
        "volume": args.volume,
        "area": kv.area,
        "perimeter": kv.perimeter,
        "energy": geo.surface_energy(kv, tab),
        "vertices": int(kv.n),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_shape_compare(args) -> int:
    a = geo.ConvexPolygon.from_vertices(_load_polygon(args.a))
    b = geo.ConvexPolygon.from_vertices(_load_polygon(args.b))
    report = {
        "hausdorff": geo.hausdorff_distance(a, b),
        "symmdiff_area": geo.symmetric_difference_area(a, b),
        "area_a": a.area,
        "area_b": b.area,
    }
    if args.best_translate:
        shift, resid = geo.best_translate_fit(a, b, metric=args.metric)
        report["best_translate"] = [float(shift[0]), float(shift[1])]
        report["best_residual"] = resid
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _iter_snapshots(directory):
    d = Path(directory)
    listing = json.loads((d / "snapshots.json").read_text())
    for name in listing["files"]:
        yield read_snapshot(d / name)


def cmd_analyze(args) -> int:
    if args.what == "contours":
        tab = tn.DirectionalTension.from_json(Path(args.tension_file).read_text())
        if not tab.convexified:
            tab = tab.convexify()
        k1 = geo.normalize_unit_volume(geo.wulff_shape(tab))
        samples = (cfg for cfg, _ in _iter_snapshots(args.input))
        report = ct.droplet_statistics(
            samples, args.cutoff, tab, args.wulff_target, k1
        )
        rows = [
            (
                i,
                r["n_large"],
                r.get("area", ""),
                r.get("area_ratio", ""),
                r.get("d_hausdorff", ""),
                r.get("symmdiff_area", ""),
            )
            for i, r in enumerate(report["rows"])
        ]
        outdir = Path(args.out) if args.out else Path(args.input)
        lines = ["sample,n_large,area,area_ratio,d_hausdorff,symmdiff"]
        lines += [",".join(str(x) for x in row) for row in rows]
        (outdir / "contours.csv").write_text("\n".join(lines) + "\n")
        agg = {k: v for k, v in report.items() if k != "rows"}
        (outdir / "contours_report.json").write_text(
            json.dumps(agg, indent=2, sort_keys=True, default=float) + "\n"
        )
        print(json.dumps(agg, indent=2, sort_keys=True, default=float))
        return 0
    if args.what == "labels":
        fields = {}
        rle_lines = ["sample,k,rle"]
        idx = 0
        pending = {}
        for cfg, header in _iter_snapshots(args.input):
            if header["kind"] == "bonds":
                pending["bond"] = cfg
            else:
                pending["spin"] = cfg
            if "spin" not in pending:
                continue
            for k in args.k:
                if args.scheme == "averaged":
                    f = lb.labels_averaged(pending["spin"], k, args.zeta, args.theta_ref)
                elif args.scheme == "fk":
                    if "bond" not in pending:
                        continue
                    f = lb.labels_fk(
                        pending["bond"], pending["spin"], k,
                        args.ell if args.ell is not None else max(0, k - 3),
                        args.zeta, args.theta_ref,
                    )
                else:
                    print(f"unknown scheme {args.scheme}", file=sys.stderr)
                    return 1
                fields.setdefault(k, []).append(f)
                from .experiments import _rle

                rle_lines.append(f"{idx},{k},{_rle(f.labels)}")
            pending = {}
            idx += 1
        stats = lb.tightness_stats(fields, args.delta, args.a_perimeter)
        outdir = Path(args.out) if args.out else Path(args.input)
        (outdir / "labels_rle.csv").write_text("\n".join(rle_lines) + "\n")
        (outdir / "tightness_report.json").write_text(
            json.dumps(stats, indent=2, sort_keys=True, default=float) + "\n"
        )
        print(json.dumps({k: v for k, v in stats.items() if k != "scales"},
                         indent=2, sort_keys=True, default=float))
        return 0
    print(f"unknown analyze target {args.what}", file=sys.stderr)
    return 1


def cmd_run(args) -> int:
    params = {}
    if args.config:
        params = parse_config_text(Path(args.config).read_text())
    seed = args.seed if args.seed is not None else int(params.pop("seed", 1))
    params.pop("preset", None)
    outdir = Path(args.out) if args.out else default_output_root() / args.preset
    manifest = run_preset(args.preset, params, seed, outdir)
    print(export_report(outdir / "manifest.json"))
    return 0 if manifest.passed else 2


def cmd_report(args) -> int:
    print(export_report(args.manifest), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wulff-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("enumerate", help="exact Gibbs table for a tiny region")
    pe.add_argument("--shape", default="box")
    pe.add_argument("--N", type=int, required=True)
    pe.add_argument("--M", type=int)
    pe.add_argument("--beta", type=float, required=True)
    pe.add_argument("--bc", default="free")
    pe.add_argument("--h", type=float, default=0.0)
    pe.add_argument("--eta", type=float, default=0.0)
    pe.add_argument("--out")
    pe.set_defaults(fn=cmd_enumerate)

    ps = sub.add_parser("sample", help="run a sampler and write snapshots")
    ps.add_argument("--model", required=True,
                    choices=["glauber", "kawasaki", "fk", "bernoulli", "restricted"])
    ps.add_argument("--shape", default="torus")
    ps.add_argument("--N", type=int, required=True)
    ps.add_argument("--M", type=int)
    ps.add_argument("--polygon", help="vertex CSV for wulff_box")
    ps.add_argument("--beta", type=float, default=0.0)
    ps.add_argument("--p", type=float, default=0.5)
    ps.add_argument("--h", type=float, default=0.0)
    ps.add_argument("--eta", type=float, default=0.0)
    ps.add_argument("--bc", default="periodic")
    ps.add_argument("--wiring", default="auto")
    ps.add_argument("--constraint", type=int, help="fixed total magnetization M")
    ps.add_argument("--cutoff", type=int, help="restricted-phase contour cutoff s")
    ps.add_argument("--sweeps", type=int, default=1000)
    ps.add_argument("--thin", type=int, default=10)
    ps.add_argument("--burnin", type=int, default=100)
    ps.add_argument("--seed", type=int, default=1)
    ps.add_argument("--out")
    ps.set_defaults(fn=cmd_sample)

    pt = sub.add_parser("tension", help="estimate the surface-tension table")
    pt.add_argument("--beta", type=float, required=True)
    pt.add_argument("--directions", type=int, default=16)
    pt.add_argument("--method", default="decay", choices=["decay", "stub"])
    pt.add_argument("--stub-value", type=float, default=1.0, dest="stub_value")
    pt.add_argument("--convexify", action="store_true")
    pt.add_argument("--seed", type=int, default=1)
    pt.add_argument("--out")
    pt.set_defaults(fn=cmd_tension)

    pw = sub.add_parser("wulff", help="Wulff shape from a tension JSON")
    pw.add_argument("--tension", required=True)
    pw.add_argument("--volume", type=float, default=1.0)
    pw.add_argument("--out")
    pw.set_defaults(fn=cmd_wulff)

    pc = sub.add_parser("shape-compare", help="metrics between two shape CSVs")
    pc.add_argument("--a", required=True)
    pc.add_argument("--b", required=True)
    pc.add_argument("--metric", default="hausdorff", choices=["hausdorff", "symmdiff"])
    pc.add_argument("--best-translate", action="store_true", dest="best_translate")
    pc.set_defaults(fn=cmd_shape_compare)

    pa = sub.add_parser("analyze", help="contour or label analysis of snapshots")
    pa.add_argument("what", choices=["contours", "labels"])
    pa.add_argument("--input", required=True, help="snapshot directory")
    pa.add_argument("--out")
    pa.add_argument("--cutoff", type=float, default=8.0)
    pa.add_argument("--tension-file", dest="tension_file")
    pa.add_argument("--wulff-target", type=float, dest="wulff_target", default=1.0)
    pa.add_argument("--scheme", default="averaged")
    pa.add_argument("--k", type=int, nargs="+", default=[3])
    pa.add_argument("--zeta", type=float, default=0.2)
    pa.add_argument("--ell", type=int)
    pa.add_argument("--theta-ref", type=float, dest="theta_ref", default=0.95)
    pa.add_argument("--delta", type=float, default=0.1)
    pa.add_argument("--a-perimeter", type=float, dest="a_perimeter", default=6.0)
    pa.set_defaults(fn=cmd_analyze)

    pr = sub.add_parser("run", help="run an experiment preset")
    pr.add_argument("--preset", required=True, choices=sorted(PRESETS))
    pr.add_argument("--config", help="flat key=value config file")
    pr.add_argument("--seed", type=int)
    pr.add_argument("--out")
    pr.set_defaults(fn=cmd_run)

    pp = sub.add_parser("report", help="summarize a run manifest")
    pp.add_argument("manifest")
    pp.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; remap to 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
