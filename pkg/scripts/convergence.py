"""Training-loss curves of the four initialization schemes at a small learning rate.

Writes ``convergence.csv`` (scheme, seed, epoch, train_mse, val_mse) and prints
the epoch-1 MSE of each physics scheme relative to random initialization.

    python3 scripts/convergence.py --epochs 500 --seeds 0 1 2
"""

import csv

import numpy as np

from gridflow import resnet

from _common import dataset, log, parser, setup

SCHEMES = ("random", "data", "lpf", "jac")


def main():
    p = parser(__doc__)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = p.parse_args()
    cfg, net, out = setup(args, "convergence")
    data = dataset(cfg, net, out / "data")
    spec = resnet.NetSpec.for_dim(net.dim, cfg.hidden, cfg.shortcut)
    rows, first = [], {}
    for seed in args.seeds:
        for scheme in SCHEMES:
            model = resnet.init_net(spec, scheme, net=net, data=data.train, seed=seed,
                                    ridge_lambda=cfg.ridge_lambda)
            tcfg = resnet.TrainConfig(learning_rate=args.lr, max_epochs=args.epochs,
                                      patience=args.epochs, seed=seed)
            _, tr = resnet.train(model, data.train, data.val, tcfg)
            rows += [(scheme, seed, e + 1, a, b)
                     for e, (a, b) in enumerate(zip(tr.train_mse, tr.val_mse))]
            first[scheme, seed] = tr.train_mse[0]
            log(f"seed {seed} {scheme:6s} epoch-1 {tr.train_mse[0]:.3e} "
                f"last {tr.train_mse[-1]:.3e}")
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "seed", "epoch", "train_mse", "val_mse"])
        w.writerows(rows)
    for scheme in SCHEMES[1:]:
        r = [first[scheme, s] / first["random", s] for s in args.seeds]
        print(f"{scheme:6s} epoch-1 MSE / random: max {np.max(r):.2e}")


if __name__ == "__main__":
    main()
