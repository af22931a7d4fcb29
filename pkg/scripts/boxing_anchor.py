"""Exhaustive boxing constant and Sobolev ratio over all subsets of a 4x4 grid.

Prints the maxima, their maximizers, and a CSV histogram of boxing constants.
"""
import argparse
import csv
import sys

import numpy as np

from bvatoms.boxing import box_set
from bvatoms.diagnostics import gn_ratio
from bvatoms.grid import CellSet


def exhaustive(n: int = 4):
    bits = np.arange(n * n)
    rows = []
    for m in range(1, 1 << (n * n)):
        mask = ((m >> bits) & 1).astype(bool).reshape(n, n)
        U = CellSet.from_array(mask)
        rows.append((m, box_set(U).constant, gn_ratio(U.indicator())))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--hist", help="CSV path for the boxing-constant histogram")
    a = p.parse_args(argv)
    rows = exhaustive(4)
    consts = np.array([r[1] for r in rows])
    gns = np.array([r[2] for r in rows])
    c4 = consts.max()
    print(f"C4 = {c4!r} attained by {int((consts == c4).sum())} subsets, e.g. mask {rows[int(consts.argmax())][0]:#06x}")
    print(f"max gn ratio = {gns.max()!r} attained by {int((gns == gns.max()).sum())} subsets")
    if a.hist:
        values, counts = np.unique(consts, return_counts=True)
        with open(a.hist, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["constant", "count"])
            w.writerows(zip(values.tolist(), counts.tolist()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
