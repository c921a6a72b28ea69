"""Wall-clock cost of NR versus a surrogate over growing sample counts.

Both run on the same samples with the same worker count; one warm-up call is
excluded. Uses a checkpoint if given, otherwise the standalone DLPF model
(same inference cost as any affine shortcut). Writes ``timing.csv``.
"""

import csv

from gridflow import linmodels, resnet
from gridflow.ppf.mcs import run_mcs
from gridflow.ppf.scenarios import sample_injections

from _common import log, parser, setup


def main():
    p = parser(__doc__)
    p.add_argument("--model", help="surrogate checkpoint")
    p.add_argument("--counts", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    cfg, net, out = setup(args, "timing")
    solver = resnet.load_checkpoint(args.model) if args.model \
        else linmodels.init_linearized_pf(net)
    X = sample_injections(net, cfg.scenario_spec(max(args.counts), seed_offset=1))
    rows = []
    for n in args.counts:
        nr = run_mcs(net, X[:n], "nr", tol=cfg.tol, threads=args.threads)
        sur = run_mcs(net, X[:n], solver)
        rows.append((n, nr.seconds, sur.seconds, nr.seconds / sur.seconds))
        log(f"n={n}: NR {nr.seconds:.3f} s, {sur.solver} {sur.seconds * 1e3:.2f} ms, "
            f"ratio {rows[-1][3]:.0f}")
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "nr_seconds", "surrogate_seconds", "acceleration_ratio"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
