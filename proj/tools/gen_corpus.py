#!/usr/bin/env python3
"""Generates the bundled desk-scale corpora.

data/corpus.smi         drug-like molecules assembled from ring systems,
                        linkers and substituents
data/finetune_cls.csv   binary task; label 1 iff the molecule contains an
                        aromatic N-heterocycle (with 8% label noise)
"""
import argparse
import csv
import random
from pathlib import Path

# Ring systems with '{}' substituent slots (each filled as a branch). Ring closure digits 1/2 for the
# first system; the second system is renumbered to 3/4.
CARBO = [
    "c1cc{}ccc1{}",
    "c1ccc{}c{}c1",
    "c1cc{}cc{}c1",
    "C1CC{}CCC1{}",
    "C1CCC{}C1{}",
    "c1ccc2cc{}ccc2c1{}",
    "C1CC1{}{}",
    "C1CCC{}CC1{}",
    "c1ccc2c(c1)CCC2{}{}",
    "C1CC{}C1{}",
]
NHET = [
    "c1cc{}ncc1{}",
    "c1cnc{}nc1{}",
    "c1ccc2[nH]c{}cc2c1{}",
    "c1nc{}c{}[nH]1",
    "c1cc{}nnc1{}",
    "c1cnc2ccc{}cc2c1{}",
    "Cn1cc{}cc1{}",
    "c1c{}c{}n[nH]1",
    "c1nc{}sc1{}",
    "c1ccnc{}c1{}",
]
OTHER_HET = [
    "C1CCN{}CC1{}",
    "C1COC{}CN1{}",
    "C1CC{}OC1{}",
    "c1cc{}oc1{}",
    "c1cc{}sc1{}",
    "C1CCN{}C1{}",
    "C1CN{}CCN1{}",
    "C1CC{}C(=O)N1{}",
]
LINKERS = ["", "C", "CC", "O", "N", "C(=O)N", "NC(=O)", "S(=O)(=O)", "OC", "CN", "C(=O)", "NC(=O)N"]
SUBS = [
    "", "", "", "C", "CC", "O", "N", "F", "Cl", "Br", "OC", "C(F)(F)F", "C#N", "C(=O)O",
    "C(=O)N", "N(C)C", "NC(=O)C", "S(=O)(=O)N", "[N+](=O)[O-]", "CO", "C(C)C", "OCC",
    "C(=O)OC", "S", "CCN", "C=O", "NC(N)=N", "OCO", "C(C)(C)C", "CCC(=O)O",
]


def fill(template, rng, digits=None, first=None):
    s = template
    if digits:
        s = s.replace("1", "\x01").replace("2", "\x02")
        s = s.replace("\x01", digits[0]).replace("\x02", digits[1])
    parts = []
    slot_values = []
    for i in range(s.count("{}")):
        if i == 0 and first is not None:
            slot_values.append(first)
        else:
            slot_values.append(rng.choice(SUBS))
    s = s.format(*[f"({v})" if v else "" for v in slot_values])
    return s.replace("()", "")


def molecule(rng, pool_a, pool_b):
    a = rng.choice(pool_a)
    if rng.random() < 0.25:
        return fill(a, rng)
    b = rng.choice(pool_b)
    link = rng.choice(LINKERS)
    second = fill(b, rng, digits="34")
    # The second system hangs off the first slot of the first ring system.
    return fill(a, rng, first=link + second)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n-corpus", type=int, default=500)
    ap.add_argument("--n-task", type=int, default=200)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = random.Random(args.seed)
    everything = CARBO + NHET + OTHER_HET
    seen = set()
    corpus = []
    while len(corpus) < args.n_corpus:
        s = molecule(rng, everything, everything)
        if s not in seen:
            seen.add(s)
            corpus.append(s)
    (out / "corpus.smi").write_text("\n".join(corpus) + "\n")

    rng = random.Random(args.seed + 1)
    non_n = CARBO + OTHER_HET
    rows = []
    seen = set()
    while len(rows) < args.n_task:
        positive = rng.random() < 0.5
        if positive:
            s = molecule(rng, NHET, non_n + NHET)
        else:
            s = molecule(rng, non_n, non_n)
        if s in seen:
            continue
        seen.add(s)
        label = int(positive)
        if rng.random() < 0.08:
            label = 1 - label
        rows.append((s, label))
    with open(out / "finetune_cls.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["smiles", "active"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
