"""Test-set accuracy of trained surrogates and standalone linear models.

Trains one surrogate per scheme with the config's recipe, evaluates the affine
baselines (DLPF, Jacobian, ridge) on the same test split, and writes
``accuracy.csv`` plus a markdown table on stdout.
"""

import csv
import time

import numpy as np

from gridflow import linmodels, resnet
from gridflow.ppf.stats import armse, awd, mape

from _common import dataset, log, parser, setup


def metrics(net, P, Y):
    na = net.n_pv + net.n_pq
    cols = {"angle": slice(0, na), "vm": slice(na, None)}
    out = {}
    for k, s in cols.items():
        out[f"armse_{k}"] = armse(P[:, s], Y[:, s])
        out[f"awd_{k}"] = awd(P[:, s], Y[:, s])
        out[f"mape_{k}"] = float(np.nanmean(mape(P[:, s], Y[:, s])[0]))
    return out


def main():
    p = parser(__doc__)
    p.add_argument("--schemes", nargs="+", default=["random", "data", "lpf", "jac"])
    args = p.parse_args()
    cfg, net, out = setup(args, "accuracy")
    data = dataset(cfg, net, out / "data")
    Xt, Yt = data.test
    spec = resnet.NetSpec.for_dim(net.dim, cfg.hidden, cfg.shortcut)
    rows = {}
    for scheme in args.schemes:
        t0 = time.perf_counter()
        model = resnet.init_net(spec, scheme, net=net, data=data.train, seed=cfg.seed,
                                ridge_lambda=cfg.ridge_lambda, zero_last=cfg.zero_last)
        best, tr = resnet.train(model, data.train, data.val, cfg.train_config())
        rows[f"resnet:{scheme}"] = metrics(net, best.predict(Xt), Yt)
        log(f"{scheme}: {tr.epochs} epochs in {time.perf_counter() - t0:.0f} s")
    for name, model in (("dlpf", linmodels.init_linearized_pf(net)),
                        ("jacobian", linmodels.init_jacobian(net)),
                        ("ridge", linmodels.ridge_fit(*data.train, cfg.ridge_lambda))):
        rows[name] = metrics(net, linmodels.predict(model, Xt), Yt)

    keys = list(next(iter(rows.values())))
    with open(out / "accuracy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *keys])
        w.writerows([name, *(r[k] for k in keys)] for name, r in rows.items())
    print("| model | " + " | ".join(keys) + " |")
    print("|---" * (len(keys) + 1) + "|")
    for name, r in rows.items():
        print(f"| {name} | " + " | ".join(f"{r[k]:.3e}" for k in keys) + " |")


if __name__ == "__main__":
    main()
