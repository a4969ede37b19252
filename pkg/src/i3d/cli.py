"""Command-line front end.

Every run writes its resolved configuration (with the package version) to
``<out>/config.json`` next to its results. Module errors end the run with exit status 2
and a JSON error object on stderr and in ``<out>/error.json``.
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from i3d import __version__
from i3d import baselines, generators, sequences, validation
from i3d.census import census, read_points, write_points
from i3d.errors import ArgumentError, I3DError
from i3d.estimators import estimate, inner_radius, scan

EXIT_ERROR = 2
FASTA_SUFFIXES = (".fa", ".fasta", ".fna", ".ffn")


def parse_range(text):
    """Parse "A:B:STEP" (B inclusive) or a comma list into sorted unique integers.

    Examples:
        >>> parse_range("2:10:4")
        [2, 6, 10]
        >>> parse_range("3,1,2")
        [1, 2, 3]
    """
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step < 1 or stop < start:
                raise ValueError
            values = list(range(start, stop + 1, step))
        else:
            values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ArgumentError(f"bad range {text!r}; use A:B:STEP or a comma list") from None
    if not values:
        raise ArgumentError(f"empty range {text!r}")
    return sorted(set(values))


def resolve_seed(seed):
    """The --seed value, else IDD_SEED, else fresh entropy (recorded in the config)."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("IDD_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ArgumentError(f"IDD_SEED must be an integer, got {env!r}") from None
    return int(np.random.SeedSequence().entropy % (2**63))


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _finite(obj):
    """Replace nan and inf by None so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def dumps(obj, **kwargs):
    return json.dumps(_finite(obj), default=_json_default, allow_nan=False, **kwargs)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj, indent=2, sort_keys=True))
        fh.write("\n")


def _is_fasta(path):
    if str(path).lower().endswith(FASTA_SUFFIXES):
        return True
    if path == "-":
        return False
    with open(path) as fh:
        for line in fh:
            if line.strip():
                return line.lstrip().startswith(">")
    return False


def load_points(args):
    """Points from a coordinate file or, for FASTA input, the encoded sequences."""
    if args.input is None:
        raise ArgumentError("--input is required")
    if _is_fasta(args.input):
        seqs = sequences.read_fasta(args.input)
        points = sequences.encode(seqs, args.encoding)
    else:
        points = read_points(args.input, metric=args.metric, box_side=args.box_side)
    if getattr(args, "dedup", False):
        points, _ = sequences.dedup(points)
    return points


def _radii(args):
    if args.t2 is None:
        raise ArgumentError("--t2 is required")
    t2 = int(args.t2)
    t1 = int(args.t1) if args.t1 is not None else inner_radius(t2, args.ratio)
    return t1, t2


def _t2_list(args):
    if args.t2_range is not None:
        return parse_range(args.t2_range)
    if args.t2 is not None:
        return parse_range(args.t2)
    raise ArgumentError("give --t2-range A:B:STEP or --t2")


def cmd_estimate(args, out):
    points = load_points(args)
    t1, t2 = _radii(args)
    cen = census(points, t1, t2, workers=args.workers)
    est, post = estimate(cen, args.method, grid_size=args.grid_size)
    cdf = validation.ks_validate(cen, est.d)
    est.ks = cdf.ks
    if args.bootstrap:
        est.p_value = validation.multiplier_pvalue(points, cen, est.d, n_boot=args.bootstrap,
                                                   seed=args.seed, observed=cdf.ks)
    record = est.to_dict()
    write_json(out / "estimate.json", record)
    (out / "cdf.txt").write_text(cdf.to_table())
    if post is not None:
        (out / "posterior.txt").write_text(post.to_table())
    return record


def cmd_scan(args, out):
    points = load_points(args)
    result = scan(points, _t2_list(args), r=args.ratio, method=args.method,
                  bootstrap=args.bootstrap, seed=args.seed, workers=args.workers,
                  grid_size=args.grid_size)
    records = result.to_records()
    write_json(out / "scan.json", {"method": result.method, "ratio": result.ratio,
                                   "rows": records})
    (out / "scan.txt").write_text(result.to_table())
    return records


def cmd_generate(args, out):
    meta = {"family": args.family, "seed": args.seed}
    fam = args.family
    if fam == "uniform":
        points = generators.gen_uniform_lattice(args.dim, args.side, args.n, not args.open_box,
                                                seed=args.seed)
        meta.update(dim=args.dim, side=args.side, n=args.n, periodic=not args.open_box)
    elif fam == "gaussian":
        points, cov = generators.gen_gaussian_lattice(args.dim, args.sigma, args.offdiag,
                                                      args.n, seed=args.seed)
        meta.update(dim=args.dim, sigma=args.sigma, offdiag=args.offdiag, n=args.n,
                    covariance=cov, sigma_eff=generators.sigma_eff(args.dim, args.sigma))
    elif fam == "spin":
        spec = generators.SpinEnsembleSpec(args.id, args.D, args.n, phi0=args.phi0,
                                           eps_variance=args.eps_variance, seed=args.seed,
                                           binary=args.binary)
        points, alphas = generators.gen_spin(spec)
        meta.update(spec=spec.to_dict(), alphas=alphas)
    elif fam == "sierpinski":
        points = generators.gen_sierpinski(args.level, args.cell)
        meta.update(level=args.level, cell=args.cell)
    else:
        points = generators.gen_koch(args.level)
        meta.update(level=args.level)
    meta.update(n_points=points.n_points, **points.metric_descriptor())
    write_points(points, out / "points.txt")
    write_json(out / "points.meta.json", meta)
    return {"n_points": points.n_points, "points": str(out / "points.txt")}


def cmd_baseline(args, out):
    points = load_points(args)
    if args.scales is None:
        raise ArgumentError("--scales is required")
    scales = parse_range(args.scales)
    result = {}
    if args.kind in ("bc", "both"):
        bc = baselines.box_counting(points, scales)
        (out / "box_counting.txt").write_text(bc.to_table())
        result["box_counting"] = {"slope": bc.slope, "slope_err": bc.slope_err,
                                  "rows": bc.to_records()}
    if args.kind in ("fd", "both"):
        fd = baselines.fractal_dimension(points, scales, workers=args.workers)
        (out / "fractal_dimension.txt").write_text(fd.to_table())
        result["fractal_dimension"] = {"slope": fd.slope, "slope_err": fd.slope_err,
                                       "rows": fd.to_records()}
    write_json(out / "baseline.json", result)
    return result


def cmd_pipeline(args, out):
    if args.input is None:
        raise ArgumentError("--input FASTA is required")
    seqs = sequences.read_fasta(args.input, crop=args.crop, drop_invalid=args.drop_invalid)
    points = sequences.encode(seqs, args.encoding)
    summary = {"n_read": len(seqs), "length": seqs.length, "encoding": args.encoding}
    if args.dedup:
        points, _ = sequences.dedup(points)
    summary["n_unique"] = points.n_points
    points, report = sequences.filter_isolated(points, args.filter_radius,
                                               args.filter_min_neighbors, workers=args.workers)
    summary["n_filtered"] = points.n_points
    k = args.k_clusters if args.k_clusters is not None else sequences.default_k(points.n_points)
    labels = sequences.cluster(points, k, seed=args.seed)
    summary["k_clusters"] = k
    ids = points.labels or [str(i) for i in range(points.n_points)]
    (out / "labels.txt").write_text("".join(f"{i} {lab}\n" for i, lab in zip(ids, labels)))
    write_points(points, out / "encoded.txt")
    agg = sequences.per_cluster_scan(points, labels, _t2_list(args), args.ratio, args.method,
                                     workers=args.workers)
    (out / "cluster_scan.txt").write_text(agg.to_table())
    per_cluster = {str(lab): res.to_records() for lab, res in agg.scans.items()}
    write_json(out / "cluster_scan.json", {"aggregate": agg.to_records(),
                                            "clusters": per_cluster,
                                            "skipped": {str(k): v for k, v in agg.skipped.items()}})
    if args.pca_t2 is not None:
        pcas = []
        for lab in np.unique(labels):
            members = np.flatnonzero(labels == lab)
            center = members[0]
            try:
                res = sequences.local_pca(points, int(center), args.pca_t2, args.pca_m)
                pcas.append({"cluster": int(lab), **res.to_dict()})
            except I3DError as exc:
                pcas.append({"cluster": int(lab), **exc.to_dict()})
        write_json(out / "pca.json", pcas)
    write_json(out / "pipeline.json", summary)
    return summary


def cmd_pool(args, out):
    if args.t2 is None:
        raise ArgumentError("--t2 is required")
    t1, t2 = _radii(args)
    dim, side, n, periodic = args.dim, args.side, args.n, not args.open_box

    def make(rng):
        return generators.gen_uniform_lattice(dim, side, n, periodic, seed=rng)

    report = validation.pool_experiment(make, args.realizations, args.seed, t1, t2,
                                        float(dim), grid_size=args.grid_size)
    record = report.to_dict()
    record.update(t1=t1, t2=t2, n_points=n, side=side, periodic=periodic)
    write_json(out / "pool.json", record)
    return {k: record[k] for k in ("std_corr", "std_ind", "n_corr", "n_ind")}


COMMANDS = {"estimate": cmd_estimate, "scan": cmd_scan, "generate": cmd_generate,
            "baseline": cmd_baseline, "pipeline": cmd_pipeline, "pool": cmd_pool}


def _add_common(p):
    p.add_argument("--input", help="coordinate file (one point per row) or FASTA; - for stdin")
    p.add_argument("--metric", choices=["l1", "l1-periodic", "hamming"], default="l1")
    p.add_argument("--box-side", type=int, help="box side for the periodic metric")
    p.add_argument("--encoding", choices=["binary-spin", "plain"], default="binary-spin",
                   help="encoding for FASTA input")
    p.add_argument("--seed", type=int, help="RNG seed (falls back to IDD_SEED)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="threads for distance work (default: all cores)")
    p.add_argument("--out", default="i3d-out", help="output directory")


def _add_estimator(p):
    p.add_argument("--t1", type=int)
    p.add_argument("--t2")
    p.add_argument("--t2-range", help="A:B:STEP with B inclusive")
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--method", choices=["mle", "bayes", "continuum"], default="mle")
    p.add_argument("--grid-size", type=int, default=1000)
    p.add_argument("--bootstrap", type=int, default=0,
                   help="multiplier-bootstrap draws for the KS p-value (0 skips)")


def _add_dedup(p, default):
    p.add_argument("--dedup", dest="dedup", action="store_true", default=default)
    p.add_argument("--no-dedup", dest="dedup", action="store_false")


def build_parser():
    parser = argparse.ArgumentParser(prog="i3d", description="Intrinsic dimension of discrete data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="ID at one pair of radii")
    _add_common(p)
    _add_estimator(p)
    _add_dedup(p, False)

    p = sub.add_parser("scan", help="ID over a range of outer radii")
    _add_common(p)
    _add_estimator(p)
    _add_dedup(p, False)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    _add_common(p)
    p.add_argument("--family", choices=["uniform", "gaussian", "spin", "sierpinski", "koch"],
                   required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--side", type=int, default=50)
    p.add_argument("--n", type=int, default=2500)
    p.add_argument("--open-box", action="store_true", help="uniform: no periodic boundaries")
    p.add_argument("--sigma", type=float, default=5.0, help="gaussian: per-axis std")
    p.add_argument("--offdiag", choices=["none", "uniform"], default="none")
    p.add_argument("--id", type=int, default=2, help="spin: intrinsic dimension")
    p.add_argument("--D", type=int, default=50, help="spin: number of spins")
    p.add_argument("--phi0", type=float, default=-0.5)
    p.add_argument("--eps-variance", type=float, default=10.0)
    p.add_argument("--binary", action="store_true", help="spin: 0/1 instead of -1/+1")
    p.add_argument("--level", type=int, default=6)
    p.add_argument("--cell", type=int, default=0, help="sierpinski: filled cells of side 2^cell")

    p = sub.add_parser("baseline", help="box-counting and fractal-dimension baselines")
    _add_common(p)
    _add_dedup(p, False)
    p.add_argument("--kind", choices=["bc", "fd", "both"], default="both")
    p.add_argument("--scales", help="box sides / radii, A:B:STEP or comma list")

    p = sub.add_parser("pipeline", help="FASTA to per-cluster ID scans")
    _add_common(p)
    _add_estimator(p)
    _add_dedup(p, True)
    p.add_argument("--k-clusters", type=int)
    p.add_argument("--filter-radius", type=int, default=10)
    p.add_argument("--filter-min-neighbors", type=int, default=10)
    p.add_argument("--crop", action="store_true", help="crop all reads to the shortest")
    p.add_argument("--drop-invalid", action="store_true", help="skip reads with non-ACGT letters")
    p.add_argument("--pca-t2", type=int, help="radius of the local PCA around one point per cluster")
    p.add_argument("--pca-m", type=int, default=2)

    p = sub.add_parser("pool", help="error-bar calibration over independent uniform lattices")
    _add_common(p)
    _add_estimator(p)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--side", type=int, default=10)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--open-box", action="store_true")
    p.add_argument("--realizations", type=int, default=200)
    return parser


def _config(args):
    conf = {k: v for k, v in vars(args).items()}
    conf["version"] = __version__
    return conf


def config_namespace(conf):
    """Rebuild run arguments from a saved ``config.json`` mapping."""
    conf = dict(conf)
    conf.pop("version", None)
    if conf.get("command") not in COMMANDS:
        raise ArgumentError(f"config has no valid command: {conf.get('command')!r}")
    defaults = vars(build_parser().parse_args(_minimal_argv(conf["command"])))
    unknown = set(conf) - set(defaults)
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    defaults.update(conf)
    return argparse.Namespace(**defaults)


def _minimal_argv(command):
    return [command, "--family", "uniform"] if command == "generate" else [command]


def run(args):
    """Execute parsed arguments; returns the exit status."""
    out = Path(args.out)
    try:
        args.seed = resolve_seed(args.seed)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.json", _config(args))
        result = COMMANDS[args.command](args, out)
    except (I3DError, OSError) as exc:
        err = exc.to_dict() if isinstance(exc, I3DError) else {"error": "io_error",
                                                                "message": str(exc)}
        err["command"] = args.command
        print(dumps(err), file=sys.stderr)
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", err)
        except OSError:
            pass
        return EXIT_ERROR
    print(dumps(result))
    return 0


def main(argv=None):
    """Entry point; ``i3d --config run/config.json`` replays a saved run."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["--config"]:
        if len(argv) < 2:
            print(dumps({"error": "invalid_argument", "message": "--config needs a path"}),
                  file=sys.stderr)
            return EXIT_ERROR
        try:
            with open(argv[1]) as fh:
                args = config_namespace(json.load(fh))
        except (I3DError, OSError, ValueError) as exc:
            print(dumps({"error": getattr(exc, "code", "invalid_config"), "message": str(exc)}),
                  file=sys.stderr)
            return EXIT_ERROR
        if len(argv) > 3 and argv[2] == "--out":
            args.out = argv[3]
        return run(args)
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
