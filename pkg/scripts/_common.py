"""Shared setup for the experiment scripts: config, network, cached dataset."""

import argparse
import sys
from pathlib import Path

from gridflow.case_io import load_case
from gridflow.config import load_config
from gridflow.ppf import dataset as ds_mod


def parser(doc: str, default_config: str = "ieee30_gauss") -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc.splitlines()[0])
    p.add_argument("--config", default=default_config)
    p.add_argument("--out", default=None, help="output directory (default runs/<script>)")
    p.add_argument("--seed", type=int, default=None)
    return p


def setup(args, name: str):
    cfg = load_config(args.config, {"seed": args.seed})
    net = load_case(cfg.case_path(), bprime_mode=cfg.bprime)
    out = Path(args.out or f"runs/{name}")
    out.mkdir(parents=True, exist_ok=True)
    return cfg, net, out


def dataset(cfg, net, cache: Path):
    """Generate the config's dataset once and reuse it from ``cache`` afterwards."""
    if (cache / "meta.json").exists():
        d = ds_mod.load_dataset(cache)
        if d.meta.get("spec_hash") == cfg.scenario_spec().digest():
            return d
    log(f"generating {sum(cfg.splits)} samples for {net.name}")
    d = ds_mod.generate_dataset(net, cfg.scenario_spec(), cfg.splits, tol=cfg.tol,
                                threads=cfg.threads or ds_mod.default_threads())
    ds_mod.save_dataset(d, cache)
    return d


def log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)
