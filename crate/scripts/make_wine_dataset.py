"""Build data/wine.csv from the UCI Wine copy bundled with scikit-learn.

Classes 2 and 3 are kept whole (normal); class 1 is downsampled to 10 rows
(anomalous), giving 129 rows and 13 features.
"""
import csv
import os
import sys

import numpy as np
from sklearn.datasets import load_wine

N_ANOMALOUS = 10
SEED = 20190401

def main(out_path):
    wine = load_wine()
    x, y = wine.data, wine.target + 1
    rng = np.random.RandomState(SEED)
    class1 = np.flatnonzero(y == 1)
    keep = np.sort(rng.choice(class1, size=N_ANOMALOUS, replace=False))
    rows = [i for i in range(len(y)) if y[i] != 1 or i in set(keep)]
    names = [n.replace("/", "_") for n in wine.feature_names]
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names + ["class"])
        for i in rows:
            w.writerow([repr(float(v)) for v in x[i]] + [int(y[i])])
    print(f"wrote {len(rows)} rows to {out_path}")

if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/wine.csv")
