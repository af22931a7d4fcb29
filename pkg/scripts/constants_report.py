"""Distribution of the empirical constants over seeded corpora.

For each corpus kind prints min/median/max of the boxing constant, the
coefficient ratio sum|lambda| / |Du|, the Sobolev ratio and the per-atom
heat margin, as one JSON document.
"""
import argparse
import json
from dataclasses import dataclass

import numpy as np

from bvatoms.corpus import KINDS, gen_corpus
from bvatoms.diagnostics import constants_report
from bvatoms.grid import GridFunction


@dataclass(frozen=True)
class ReportConfig:
    kinds: tuple = KINDS
    seed: int = 0
    count: int = 20
    size: int = 64
    dim: int = 2
    heat: bool = True


def report(cfg: ReportConfig) -> dict:
    out = {"config": {**cfg.__dict__, "kinds": list(cfg.kinds)}}
    for kind in cfg.kinds:
        corpus = gen_corpus(kind, cfg.seed, cfg.count, cfg.size, cfg.dim)
        if kind == "smooth-bumps":
            # quantize so exact mode stays small
            corpus = [GridFunction(u.spec, np.round(8.0 * u.values)) for u in corpus]
        out[kind] = constants_report([u for u in corpus if not u.is_zero()], heat=cfg.heat)
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kinds", nargs="+", choices=KINDS, default=list(KINDS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--dim", type=int, choices=[2, 3], default=2)
    p.add_argument("--no-heat", action="store_true")
    a = p.parse_args(argv)
    cfg = ReportConfig(tuple(a.kinds), a.seed, a.count, a.size, a.dim, not a.no_heat)
    print(json.dumps(report(cfg), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
