"""Regenerate the bundled synthetic dataset and the golden selection table.

    python scripts/make_golden.py

Writes src/mixgm/resources/synthetic.{csv,yaml} and, by running the CLI the
same way the golden test does, tests/golden/select_gamma1.csv. Only rerun
this when a change to the estimator is intended; the test compares bytes.
"""

import shutil
import sys
import tempfile
from pathlib import Path

from mixgm.cli import run
from mixgm.data import write_dataset
from mixgm.simulate import gibbs_sample, random_sparse_theta

ROOT = Path(__file__).resolve().parents[1]
RES = ROOT / "src" / "mixgm" / "resources"
GOLDEN = ROOT / "tests" / "golden" / "select_gamma1.csv"

SEED = 7
N = 400


def main() -> int:
    gt = random_sparse_theta(5, 3, [2, 2, 3], density=0.3, effect_scale=0.6, seed=SEED)
    ds = gibbs_sample(gt, N, burn_in=200, thinning=1, seed=SEED, n_chains=N)
    RES.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, RES / "synthetic.csv")
    ds.schema.dump(RES / "synthetic.yaml")
    gt.save(RES / "synthetic_truth.json")
    with tempfile.TemporaryDirectory() as tmp:
        rc = run(["select", "--data", str(RES / "synthetic.csv"), "--schema", str(RES / "synthetic.yaml"),
                  "--out", tmp, "--gamma", "1", "--threads", "1"])
        if rc:
            return rc
        GOLDEN.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(Path(tmp) / "selection.csv", GOLDEN)
    print(f"wrote {GOLDEN.relative_to(ROOT)} ({len(gt.graph.edges)} true edges)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
