"""``gridflow`` command line: solve, gen-data, train, ppf, risk, emit-case.

Exit codes: 0 ok, 1 input error, 2 divergence, 3 data-generation failure,
4 training failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import acpf, linmodels, resnet
from .case_io import format_case, load_case
from .config import RunConfig, load_config
from .errors import (
    Diverged,
    GridflowError,
    NonFiniteLoss,
    SingularJacobian,
    TooManyDivergences,
)
from .ppf import dataset as ds_mod
from .ppf.mcs import run_mcs
from .ppf.report import build_report, dumps, write_report
from .ppf.scenarios import sample_injections

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3, 4

log = logging.getLogger("gridflow")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _config(args) -> RunConfig:
    overrides = {"case": args.case, "seed": args.seed, "threads": args.threads, "out": args.out}
    if args.config is None:
        if args.case is None:
            raise FileNotFoundError("either --config or --case is required")
        return RunConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    return load_config(args.config, overrides)


def _threads(args, cfg: RunConfig | None = None) -> int:
    return args.threads or (cfg.threads if cfg else None) or ds_mod.default_threads()


def _out(args, cfg: RunConfig | None, default: str) -> Path:
    out = Path(args.out or (cfg.out if cfg else default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    net = load_case(args.case, bprime_mode=args.bprime)
    x = acpf.base_injection(net)
    s, iters = acpf.newton_raphson(net, x, tol=args.tol, max_iter=args.max_iter)
    P, Q = acpf.power_injections(net, s)
    mis = float(np.max(np.abs(acpf.mismatch(net, s, x)), initial=0.0))
    out = _out(args, None, ".")
    _write_rows(out / "solution.csv", ["bus", "Vm", "Va_rad", "P", "Q"],
                zip(net.bus_ids.tolist(), s.vm, s.theta, P, Q))
    fl = acpf.branch_flows(net, s)
    _write_rows(out / "flows.csv",
                ["branch", "P_from", "Q_from", "P_to", "Q_to", "S_from_MVA", "S_to_MVA"],
                zip(acpf.branch_labels(net), fl.p_from, fl.q_from, fl.p_to, fl.q_to,
                    fl.s_from, fl.s_to))
    print(f"converged in {iters} iterations, max mismatch {mis:.3e} p.u., "
          f"losses {fl.losses_p.sum() * net.base_mva:.4f} MW", file=sys.stderr)
    return EXIT_OK


def cmd_emit_case(args) -> int:
    text = format_case(load_case(args.case, bprime_mode=args.bprime))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    net = load_case(cfg.case_path(), bprime_mode=cfg.bprime)
    splits = cfg.splits
    if args.n is not None:
        total = sum(splits)
        splits = tuple(int(round(args.n * s / total)) for s in splits[:2])
        splits = (*splits, args.n - sum(splits))
    t0 = time.perf_counter()
    data = ds_mod.generate_dataset(net, cfg.scenario_spec(sum(splits)), splits, tol=cfg.tol,
                                   threads=_threads(args, cfg))
    out = _out(args, cfg, "data")
    ds_mod.save_dataset(data, out)
    print(f"{len(data.X)} samples written to {out}; dropped {data.meta['dropped']} "
          f"of {data.meta['requested']} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    net = load_case(cfg.case_path(), bprime_mode=cfg.bprime)
    data = ds_mod.load_dataset(args.data)
    scheme = args.scheme or cfg.scheme
    tcfg = cfg.train_config()
    if args.epochs is not None:
        tcfg.max_epochs = args.epochs
    spec = resnet.NetSpec.for_dim(net.dim, cfg.hidden, cfg.shortcut)
    model = resnet.init_net(spec, scheme, net=net, data=data.train, seed=cfg.seed,
                            ridge_lambda=cfg.ridge_lambda, zero_last=cfg.zero_last)
    best, trace = resnet.train(model, data.train, data.val, tcfg)
    out = _out(args, cfg, "model")
    resnet.save_checkpoint(best, out / "model.ckpt",
                           extra={"case": net.name, "scheme": scheme,
                                  "dataset_spec_hash": data.meta.get("spec_hash")})
    _write_rows(out / "trace.csv", ["epoch", "train_mse", "val_mse", "seconds"],
                zip(range(1, trace.epochs + 1), trace.train_mse, trace.val_mse,
                    trace.seconds))
    print(f"{scheme}: {trace.epochs} epochs, best epoch {trace.best_epoch}, "
          f"val MSE {min(trace.val_mse):.3e}", file=sys.stderr)
    return EXIT_OK


def _solver(args, net):
    if args.model:
        path = Path(args.model)
        if not path.exists():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        return resnet.load_checkpoint(path)
    if args.affine == "lpf":
        return linmodels.init_linearized_pf(net)
    if args.affine == "jac":
        return linmodels.init_jacobian(net)
    if args.affine == "data":
        if not args.data:
            raise FileNotFoundError("--affine data needs --data for the ridge fit")
        return linmodels.ridge_fit(*ds_mod.load_dataset(args.data).train)
    return "nr"


def _samples(args, cfg: RunConfig, net):
    if args.data:
        return ds_mod.load_dataset(args.data).test[0]
    return sample_injections(net, cfg.ppf_spec())


def _run_ppf(args):
    cfg = _config(args)
    net = load_case(cfg.case_path(), bprime_mode=cfg.bprime)
    solver = _solver(args, net)
    X = _samples(args, cfg, net)
    threads = _threads(args, cfg)
    res = run_mcs(net, X, solver, tol=cfg.tol, threads=threads)
    ref = None
    if args.compare == "nr" and not isinstance(solver, str):
        ref = run_mcs(net, X, "nr", tol=cfg.tol, threads=threads)
    report, curves = build_report(net, res, ref, cfg.report_options())
    timing = {"solver": res.solver, "seconds": res.seconds, "n": res.n, "threads": threads}
    if ref is not None:
        timing.update(reference_seconds=ref.seconds, acceleration_ratio=ref.seconds / res.seconds)
    return cfg, report, curves, timing


def cmd_ppf(args) -> int:
    cfg, report, curves, timing = _run_ppf(args)
    out = write_report(_out(args, cfg, "ppf"), report, curves, timing)
    msg = f"report written to {out}"
    if "acceleration_ratio" in timing:
        msg += f"; acceleration ratio {timing['acceleration_ratio']:.0f}"
    print(msg, file=sys.stderr)
    return EXIT_OK


def cmd_risk(args) -> int:
    cfg, report, _, _ = _run_ppf(args)
    out = _out(args, cfg, "risk")
    d = report.to_dict()
    (out / "risk.json").write_text(dumps({k: d[k] for k in
                                          ("case", "solver", "n", "reference", "risk",
                                           "reference_risk", "risk_deltas")}))
    rows = [(r["quantity"], r["kind"], r["limit"], r["probability"], r["ci"][0], r["ci"][1],
             r["mean_depth"], r["variance_coefficient"], r["converged"]) for r in d["risk"]]
    _write_rows(out / "risk.csv", ["quantity", "kind", "limit", "probability", "ci_low",
                                   "ci_high", "mean_depth", "variance_coefficient",
                                   "converged"], rows)
    hits = sum(1 for r in d["risk"] if r["estimable"])
    print(f"{hits} of {len(rows)} limits violated at least once", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--case", help="case file or bundled case name (case30, case118)")
        if config:
            sp.add_argument("--config", help="YAML run config (path or bundled name)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        return sp

    s = common(sub.add_parser("solve", help="Newton-Raphson base case"), config=False)
    s.add_argument("--bprime", default="series", choices=["series", "reactance"])
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=20)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("emit-case", help="re-emit a parsed case file")
    e.add_argument("--case", required=True)
    e.add_argument("--out")
    e.add_argument("--bprime", default="series", choices=["series", "reactance"])
    e.set_defaults(func=cmd_emit_case)

    g = common(sub.add_parser("gen-data", help="sample scenarios and solve them"))
    g.add_argument("--n", type=int, help="total sample count (splits keep their proportions)")
    g.set_defaults(func=cmd_gen_data)

    t = common(sub.add_parser("train", help="train a residual surrogate"))
    t.add_argument("--data", required=True, help="dataset directory from gen-data")
    t.add_argument("--scheme", choices=sorted(resnet.SCHEMES))
    t.add_argument("--epochs", type=int, help="override max_epochs")
    t.set_defaults(func=cmd_train)

    for name, func, hlp in (("ppf", cmd_ppf, "probabilistic power flow report"),
                            ("risk", cmd_risk, "limit-violation risk only")):
        r = common(sub.add_parser(name, help=hlp))
        src = r.add_mutually_exclusive_group()
        src.add_argument("--model", help="surrogate checkpoint")
        src.add_argument("--affine", choices=["lpf", "jac", "data"],
                         help="standalone affine model instead of a checkpoint")
        r.add_argument("--data", help="use this dataset's test split as the sample set")
        r.add_argument("--compare", choices=["nr"], help="paired NR baseline")
        r.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; 2 means divergence here
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (Diverged, SingularJacobian) as exc:
        code, exc_ = EXIT_DIVERGED, exc
    except TooManyDivergences as exc:
        code, exc_ = EXIT_DATA, exc
    except NonFiniteLoss as exc:
        code, exc_ = EXIT_TRAIN, exc
    except (GridflowError, OSError, ValueError, json.JSONDecodeError) as exc:
        code, exc_ = EXIT_INPUT, exc
    print(f"gridflow: error: {type(exc_).__name__}: {exc_}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
