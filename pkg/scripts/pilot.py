"""Run the long campaigns once and print their headline numbers."""

import json
import sys
import time

from lemlab import experiment as ex
from lemlab.ensembles import SQRT_E, EnsembleSpec

SEED = 20261018


def main(which):
    t = time.time()
    if which == "circle":
        res = ex.run_experiment(ex.ExperimentConfig("circle", 1.0, (100, 200, 400, 800), 200, SEED))
        ex.persist(res, "/tmp/pilot_circle.json")
        fit = ex.scaling_fit(res, "linear_ratio")
        print(which, fit.ratios, fit.ratio_stderrs, ex.ratio_trend_ok(fit), [r.degenerate_rate for r in res.rows])
    elif which == "disk":
        res = ex.run_experiment(ex.ExperimentConfig("disk", 1.0, (64, 128, 256, 512, 1024), 200, SEED))
        ex.persist(res, "/tmp/pilot_disk.json")
        fit = ex.scaling_fit(res, "power_law")
        print(which, [r.mean_count for r in res.rows], fit.estimate, fit.confidence_interval)
    elif which == "phase":
        for fam, r in (("circle", 0.9), ("circle", 1.1), ("disk", 0.95), ("disk", 1.5 * SQRT_E), ("disk", 0.85 * SQRT_E)):
            row = ex.phase_sweep(fam, [r], 500, 50, SEED)[0]
            print(which, fam, r, row.mean_count, row.ratio, row.frac_one, row.passed, flush=True)
    elif which == "pairing":
        tab = ex.pairing_campaign(EnsembleSpec("disk", 1.0, 1), (250, 500, 1000), 100, SEED)
        print(which, tab)
    print(which, "seconds", time.time() - t, flush=True)


if __name__ == "__main__":
    for w in sys.argv[1:]:
        main(w)
