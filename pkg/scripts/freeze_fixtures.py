"""Regenerate the frozen test fixtures (golden sampler draws, log-moment bracket).

Run once; the outputs are committed and the tests assert against them.
"""

import json
import pathlib

import numpy as np

from lemlab import potential
from lemlab.ensembles import EnsembleSpec, SeedPolicy, sample_polynomial

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def golden():
    doc = {"version": 1, "master_seed": 1, "trial_index": 0}
    for fam in ("disk", "circle"):
        x = sample_polynomial(EnsembleSpec(fam, 1.0, 8), SeedPolicy(1, 0)).roots
        doc[fam] = [[float(z.real).hex(), float(z.imag).hex()] for z in x]
    return doc


def log_moment_bracket(margin=0.01):
    # F_p for the unit disk is radial, so a radial scan gives its range
    t = np.linspace(0.0, 1.0, 101)
    out = {}
    for p in (1, 2, 3):
        v = np.array([potential.moment_F_p(s, p, "disk") for s in t])
        out[str(p)] = [round(float(v.min()) - margin, 3), round(float(v.max()) + margin, 3)]
    return out


if __name__ == "__main__":
    (OUT / "golden_draws.json").write_text(json.dumps(golden(), indent=1) + "\n")
    th = json.loads((OUT / "pilot_thresholds.json").read_text())
    th["disk_log_moment_bracket"] = log_moment_bracket()
    (OUT / "pilot_thresholds.json").write_text(json.dumps(th, indent=1) + "\n")
