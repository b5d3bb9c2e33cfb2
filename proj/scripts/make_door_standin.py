#!/usr/bin/env python3
"""Generate a DoOR-shaped stand-in response matrix.

The real DoOR 2.0.1 consensus matrix (door_response_matrix.csv, exported from
the DoOR.data R package) cannot be redistributed with this repository. This
script writes a file with the same layout so the whole pipeline can run
offline:

  * 692 odorant rows keyed by InChIKey-style identifiers, plus an "SFR" row
  * 78 response-unit columns: 52 single-Or units and 26 units that are
    sensillum codes, ionotropic/gustatory receptors or multi-receptor units
  * about 14 % of the odorant x unit cells measured, the rest "NA"
  * responses normalized to [0, 1]; SFR values below 0.1

Odorants are drawn from chemical classes that share a receptor tuning
prototype, so odorants of one functional group respond alike. Aromatic
alcohols partially share the alcohol prototype.

To use the real data instead, point `paths.response_matrix` in the run
config at the DoOR export.

Usage: python3 scripts/make_door_standin.py [--seed 20250101] [--out data/]
"""

import argparse
import json
import os
import string

import numpy as np

SINGLE_OR_UNITS = [
    "Or1a", "Or2a", "Or7a", "Or9a", "Or10a", "Or13a", "Or19a", "Or19b",
    "Or22a", "Or22b", "Or23a", "Or24a", "Or30a", "Or33a", "Or33b", "Or35a",
    "Or42a", "Or42b", "Or43a", "Or43b", "Or45a", "Or45b", "Or46a", "Or47a",
    "Or47b", "Or49a", "Or49b", "Or56a", "Or59a", "Or59b", "Or63a", "Or65a",
    "Or67a", "Or67b", "Or67c", "Or67d", "Or69a", "Or71a", "Or74a", "Or82a",
    "Or83c", "Or85a", "Or85b", "Or85c", "Or85d", "Or85e", "Or85f", "Or88a",
    "Or92a", "Or94a", "Or94b", "Or98a",
]

OTHER_UNITS = [
    "ab1A", "ab1B", "ab2B", "ab3B", "ab4B", "ab5A", "ac1", "ac2", "ac3A",
    "ac3B", "ac4", "pb1A", "pb2A", "pb3B", "Gr21a.Gr63a", "Ir31a", "Ir41a",
    "Ir64a.DC4", "Ir64a.DP1m", "Ir75a", "Ir75b", "Ir76a", "Ir84a", "Ir92a",
    "Or33b.Or47a", "Or33b.Or85a",
]

# (class name, odorant count, prototype receptors, borrows-from)
CLASSES = [
    ("alcohol", 90, 9, None),
    ("aromatic_alcohol", 30, 7, "alcohol"),
    ("ester", 120, 10, None),
    ("lactone", 25, 7, None),
    ("aldehyde", 70, 8, None),
    ("ketone", 70, 8, None),
    ("acid", 60, 7, None),
    ("terpene", 90, 9, None),
    ("amine", 35, 6, None),
    ("other", 102, 10, None),
]


def inchikey_like(rng, used):
    letters = np.array(list(string.ascii_uppercase))
    while True:
        a = "".join(rng.choice(letters, 14))
        b = "".join(rng.choice(letters, 8))
        key = f"{a}-{b}SA-N"
        if key not in used:
            used.add(key)
            return key


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20250101)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    units = list(SINGLE_OR_UNITS) + list(OTHER_UNITS)
    order = rng.permutation(len(units))
    units = [units[i] for i in sorted(order, key=lambda i: units[i].lower())]
    n_units = len(units)
    assert n_units == 78 and sum(c[1] for c in CLASSES) == 692

    prototypes = {}
    for name, _, n_active, borrow in CLASSES:
        proto = np.zeros(n_units)
        active = rng.choice(n_units, n_active, replace=False)
        proto[active] = rng.uniform(0.35, 1.0, n_active)
        if borrow is not None:
            proto = 0.5 * prototypes[borrow] + 0.8 * proto
        prototypes[name] = proto

    used = set()
    rows, labels, coverage = [], [], []
    for name, count, _, _ in CLASSES:
        for k in range(count):
            gain = rng.uniform(0.8, 1.1)
            individual = np.zeros(n_units)
            idx = rng.choice(n_units, 3, replace=False)
            individual[idx] = rng.uniform(0.0, 0.4, 3)
            resp = gain * prototypes[name] * rng.uniform(0.6, 1.4, n_units)
            resp += individual + rng.normal(0.0, 0.03, n_units)
            rows.append(np.clip(resp, 0.0, None))
            labels.append(name)
            # a few well-studied odorants per class, many sparsely measured
            coverage.append(rng.uniform(0.7, 0.95) if k < 6 else rng.beta(1.0, 11.0))
    values = np.array(rows)
    values /= values.max()

    measured = rng.uniform(size=values.shape) < np.array(coverage)[:, None]
    ids = [inchikey_like(rng, used) for _ in rows]
    sfr = rng.uniform(0.0, 0.1, n_units)

    path = os.path.join(args.out, "door_response_matrix_standin.csv")
    with open(path, "w") as f:
        f.write('"",' + ",".join(f'"{u}"' for u in units) + "\n")
        f.write('"SFR",' + ",".join(f"{v:.6f}" for v in sfr) + "\n")
        for key, row, mask in zip(ids, values, measured):
            cells = [f"{v:.6f}" if m else "NA" for v, m in zip(row, mask)]
            f.write(f'"{key}",' + ",".join(cells) + "\n")

    def best(cls, skip=0, n=1):
        cand = [i for i, l in enumerate(labels) if l == cls]
        cand.sort(key=lambda i: -measured[i].sum())
        return [ids[i] for i in cand[skip:skip + n]]

    common = best("alcohol")[0]
    sets = {
        "blue": [common] + best("ester") + best("lactone"),
        "orange": [common] + best("alcohol", 1) + best("aromatic_alcohol"),
        "green": [common] + best("alcohol", 2, 2),
    }
    with open(os.path.join(args.out, "odor_sets_standin.json"), "w") as f:
        json.dump(sets, f, indent=2)
        f.write("\n")
    print(f"wrote {path}: {len(ids)} odorants x {n_units} units, "
          f"{measured.mean():.1%} measured")


if __name__ == "__main__":
    main()
