"""Regenerates criteo_golden.tsv and its expected tensors.

The FNV-1a hash and id mapping are written out here independently of the
C++ implementation.
"""
import json
import math
import random

CARDINALITY = 1000


def fnv1a64(token):
    h = 0xCBF29CE484222325
    for b in token.encode():
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def main():
    random.seed(2024)
    rows = []
    for r in range(10):
        dense = []
        for _ in range(13):
            c = random.random()
            if c < 0.15:
                dense.append("")
            elif c < 0.25:
                dense.append(str(-random.randint(1, 5)))
            else:
                dense.append(str(random.randint(0, 5000)))
        cats = ["" if random.random() < 0.12 else "%08x" % random.getrandbits(32) for _ in range(26)]
        rows.append([str(r % 2)] + dense + cats)
    rows[0][1] = "-5"
    rows[0][14] = ""
    with open("criteo_golden.tsv", "w") as f:
        for r in rows:
            f.write("\t".join(r) + "\n")

    expected = {"cardinality": CARDINALITY, "labels": [], "dense": [], "ids": []}
    for r in rows:
        expected["labels"].append(int(r[0]))
        expected["dense"].append([math.log1p(max(int(v), 0)) if v else 0.0 for v in r[1:14]])
        expected["ids"].append([0 if t == "" else 1 + fnv1a64(t) % (CARDINALITY - 1) for t in r[14:]])
    with open("criteo_golden_expected.json", "w") as f:
        json.dump(expected, f, indent=1)


if __name__ == "__main__":
    main()
