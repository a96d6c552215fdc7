"""Command line interface: ``rtdetmcd {fit,score,simulate,bench}``.

Exit codes: 0 success, 2 input error (unreadable or malformed files, bad
options, width mismatch), 3 estimation failure. Diagnostics go to stderr;
data go to stdout when no output path is given.
"""

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io as fio
from .errors import FitFileError, InvalidValue, MCDError, WidthMismatch
from .estimator import EstimatorConfig, flag
from .parallel import ParallelConfig, fit_parallel
from .simulation import Scenario, _replication, _timed_fit, parse_variant, run_scenario

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION = 0, 2, 3

SIM_COLUMNS = (
    "n", "p", "sigma_type", "sigma_generator", "contamination", "eps", "gamma",
    "variant", "omega", "replications", "seed", "mean_kl", "mean_runtime",
    "detection_recall", "false_positive_rate", "failures", "baseline", "speedup",
)


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class Phases:
    """Wall-clock timer for named phases of a run."""

    def __init__(self):
        self.times = {}

    @contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        yield
        self.times[name] = time.perf_counter() - t0


def manifest(args, config=None, digest=None, phases=None, **extra):
    m = {
        "command": args.command,
        "argv": args.argv,
        "config": fio.config_to_dict(config) if config is not None else None,
        "seed": getattr(args, "seed", None),
        "input_sha256": digest,
        "version": tool_version(),
        "phase_seconds": phases.times if phases else {},
    }
    m.update(extra)
    return m


def write_json(path, obj):
    text = json.dumps(obj, indent=1, default=_json_default) + "\n"
    if path is None:
        sys.stderr.write(text)
    else:
        Path(path).write_text(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


@contextmanager
def output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def set_threads(n):
    if n:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def parallel_config(args):
    """Translate estimator flags into a :class:`ParallelConfig`.

    Serial variants (I, ID, IDC) use one block unless ``--blocks`` says
    otherwise; ``IDCP`` uses the block-count rule and ``IDCPq`` fixes q.
    """
    name, q = parse_variant(args.variant)
    if name != "IDCP":
        q = args.blocks or 1
    else:
        q = args.blocks or q
    return ParallelConfig(
        alpha=args.alpha,
        flag_quantile=args.quantile,
        kappa_max=args.kappa_max,
        variant="IDC" if name == "IDCP" else name,
        omega=args.omega,
        q_override=q,
        max_threads=args.threads,
        seed=args.seed,
    )


def cmd_fit(args):
    phases = Phases()
    config = parallel_config(args)
    with phases("read"):
        X, header = fio.read_matrix(args.input)
    warm = fio.read_fit(args.warm_start) if args.warm_start else None
    with phases("fit"):
        fit, report = fit_parallel(X, config, warm)
    prefix = args.out or str(Path(args.input).with_suffix(""))
    with phases("write"):
        fio.write_fit(prefix + ".fit.json", fit, header)
        with output(prefix + ".report.csv") as fh:
            fio.write_report(fh, report)
    write_json(prefix + ".manifest.json", manifest(
        args, config, fio.file_digest(args.input), phases,
        n=len(X), p=X.shape[1], n_outliers=report.n_outliers,
        chosen_start=fit.chosen_start,
        blocks=sum(k.startswith("block") for k in fit.candidates) or 1,
        rows_per_second=len(X) / max(phases.times["fit"], 1e-12),
    ))
    print(f"{report.n_outliers} of {len(X)} rows flagged; fit written to "
          f"{prefix}.fit.json", file=sys.stderr)
    return EXIT_OK


def cmd_score(args):
    phases = Phases()
    with phases("read"):
        fit = fio.read_fit(args.fit)
        X, _ = fio.read_matrix(args.input)
    config = fit.config or EstimatorConfig()
    if args.quantile is not None:
        config = replace(config, flag_quantile=args.quantile)
    with phases("score"):
        report = flag(X, fit, config)
    with phases("write"), output(args.out) as fh:
        fio.write_report(fh, report)
    m = manifest(
        args, config, fio.file_digest(args.input), phases,
        fit_sha256=fio.file_digest(args.fit), n=len(X),
        n_outliers=report.n_outliers,
        rows_per_second=len(X) / max(phases.times["score"], 1e-12),
    )
    write_json(args.manifest or (args.out + ".manifest.json" if args.out else None), m)
    return EXIT_OK


def _scenarios(args):
    if args.scenario_file:
        with open(args.scenario_file) as fh:
            specs = json.load(fh)
        if isinstance(specs, dict):
            specs = [specs]
    else:
        specs = [{
            "n": args.n, "p": args.p, "sigma_type": args.sigma,
            "contamination": args.contamination, "eps": args.eps,
            "gamma": args.gamma, "omega": args.omega,
            "replications": args.replications, "seed": args.seed,
            "alpha": args.alpha, "sigma_method": args.sigma_method,
        }]
    out = []
    for spec in specs:
        variants = spec.pop("variants", None) or args.variants.split(",")
        for v in variants:
            out.append(Scenario(**{**spec, "variant": v}))
    return out


def cmd_simulate(args):
    phases = Phases()
    scenarios = _scenarios(args)
    baseline = None if args.baseline.lower() == "none" else args.baseline
    rows = []
    with phases("simulate"):
        for s in scenarios:
            r = run_scenario(s, baseline=baseline, max_threads=args.threads)
            row = {k: getattr(s, k) for k in SIM_COLUMNS if hasattr(s, k)}
            row.update(
                mean_kl=r.mean_kl, mean_runtime=r.mean_runtime,
                detection_recall=r.detection_recall,
                false_positive_rate=r.false_positive_rate,
                failures=r.failures, baseline=r.baseline or "", speedup=r.speedup,
                sigma_generator=s.sigma_method if s.sigma_type == "ALYZ" else "",
            )
            rows.append(row)
            print(f"{s.variant} n={s.n} p={s.p}: KL={r.mean_kl:.5g}", file=sys.stderr)
    with output(args.out) as fh:
        _write_table(fh, SIM_COLUMNS, rows)
    write_json(args.manifest or (args.out + ".manifest.json" if args.out else None),
               manifest(args, phases=phases, scenarios=[vars(s) for s in scenarios]))
    return EXIT_OK


def cmd_bench(args):
    phases = Phases()
    variants = args.variants.split(",")
    for v in variants:
        parse_variant(v)
    rows = []
    with phases("bench"):
        for n in _int_list(args.n):
            for p in _int_list(args.p):
                s = Scenario(n=n, p=p, contamination=args.contamination, eps=args.eps,
                             gamma=args.gamma, omega=args.omega, seed=args.seed)
                times = {v: [] for v in variants}
                children = np.random.SeedSequence(args.seed).spawn(args.repeats)
                for child in children:
                    rng = np.random.Generator(np.random.PCG64(child))
                    _, X, _, part_seed = _replication(s, rng, args.threads)
                    for v in variants:
                        times[v].append(_timed_fit(X, v, s, part_seed, args.threads)[2])
                med = {v: float(np.median(t)) for v, t in times.items()}
                base = med.get(args.baseline)
                for v in variants:
                    rows.append({
                        "n": n, "p": p, "variant": v, "repeats": args.repeats,
                        "median_seconds": med[v],
                        "speedup": base / med[v] if base else "",
                    })
    cols = ("n", "p", "variant", "repeats", "median_seconds", "speedup")
    with output(args.out) as fh:
        _write_table(fh, cols, rows)
    write_json(args.manifest or (args.out + ".manifest.json" if args.out else None),
               manifest(args, phases=phases, baseline=args.baseline,
                        cpu_count=os.cpu_count()))
    return EXIT_OK


def _int_list(text):
    return [int(eval_pow(t)) for t in str(text).split(",")]


def eval_pow(token):
    """Parse ``65536`` or ``2^16``."""
    token = token.strip()
    if "^" in token:
        base, exp = token.split("^")
        return int(base) ** int(exp)
    return int(token)


def _write_table(fh, cols, rows):
    fh.write(",".join(cols) + "\n")
    for row in rows:
        cells = []
        for c in cols:
            v = row.get(c)
            v = "" if v is None else v
            cells.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
        fh.write(",".join(cells) + "\n")


def _add_estimator_flags(ap):
    ap.add_argument("--alpha", type=float, default=0.5, help="coverage fraction h/n (default 0.5)")
    ap.add_argument("--quantile", type=float, default=0.975, help="chi-squared flagging quantile")
    ap.add_argument("--kappa-max", type=float, default=1000.0, help="condition-number bound")
    ap.add_argument("--variant", default="IDCP",
                    help="I, ID, IDC (serial) or IDCP / IDCPq (block parallel, default IDCP)")
    ap.add_argument("--omega", type=int, default=4096, help="observations per dimension per block")
    ap.add_argument("--blocks", type=int, default=None, help="fix the number of blocks q")


def build_parser():
    ap = argparse.ArgumentParser(prog="rtdetmcd", description="Real-time deterministic MCD.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="maximum worker threads")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--out", default=None, help="output path (prefix for fit)")
    common.add_argument("--manifest", default=None, help="manifest path")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit and flag a CSV file")
    p.add_argument("input")
    _add_estimator_flags(p)
    p.add_argument("--warm-start", default=None, help="previous fit file used as start")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", parents=[common], help="flag rows under a stored fit")
    p.add_argument("input")
    p.add_argument("fit")
    p.add_argument("--quantile", type=float, default=None, help="override the fit's quantile")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", parents=[common], help="run simulation scenarios")
    p.add_argument("--scenario-file", default=None, help="JSON scenario or list of scenarios")
    p.add_argument("--n", type=eval_pow, default=2**16)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--sigma", choices=("A09", "ALYZ"), default="A09")
    p.add_argument("--sigma-method", choices=("alyz", "fallback"), default="alyz")
    p.add_argument("--contamination", choices=("none", "point", "shift", "cluster"),
                   default="point")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=50.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--omega", type=int, default=4096)
    p.add_argument("--replications", type=int, default=50)
    p.add_argument("--variants", default="IDC", help="comma separated variant list")
    p.add_argument("--baseline", default="I", help="baseline variant for speedups, or none")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="time variants across sizes")
    p.add_argument("--n", default="2^16", help="comma separated sizes, e.g. 2^16,2^19")
    p.add_argument("--p", default="8")
    p.add_argument("--variants", default="I,ID,IDC,IDCP")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--baseline", default="I")
    p.add_argument("--contamination", default="point")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=50.0)
    p.add_argument("--omega", type=int, default=4096)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.argv = list(sys.argv[1:] if argv is None else argv)
    set_threads(args.threads)
    try:
        return args.func(args)
    except (fio.InputError, FitFileError, WidthMismatch, InvalidValue, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MCDError as exc:
        print(f"estimation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
