"""Monte Carlo campaigns over the random ensembles.

Every trial is addressed by ``(master_seed, n, trial_index)`` and draws from its
own counter-based stream, so results do not depend on how trials are spread
over worker processes. Aggregation collects trials by index and reduces with
exactly rounded sums.
"""

import csv
import enum
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .critical import pairing_statistics, solve_critical_points
from .ensembles import SQRT_E, EnsembleSpec, Family, SeedPolicy, predicted_phase, sample_polynomial
from .errors import InsufficientDataError, LemlabError, SchemaError, ValidationError
from .topology import count_components_exact, count_components_grid, count_isolated, good_root_mask

SCHEMA = "lemlab-result/1"
FAILURE_LIMIT = 0.01
CSV_COLUMNS = ("family", "r", "n", "trials", "mean_count", "stderr", "mean_isolated", "ratio",
               "pairing_fraction", "degenerate_rate", "seconds")


class CountMethod(str, enum.Enum):
    EXACT = "exact"
    GRID = "grid"
    BOTH = "both"


class SchemaVersionError(SchemaError):
    def __init__(self, found):
        self.found = found
        super().__init__(f"unsupported result schema {found!r}; this version reads {SCHEMA!r}")


def _degree_seed(master_seed: int, n: int) -> int:
    # one independent stream family per degree
    return int(np.random.SeedSequence([int(master_seed), int(n)]).generate_state(2, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    family: Family
    r: float
    degrees: Tuple[int, ...]
    trials_per_degree: int
    master_seed: int = 0
    count_method: CountMethod = CountMethod.EXACT
    outputs: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "count_method", CountMethod(str(getattr(self.count_method, "value", self.count_method)).lower()))
        degrees = tuple(int(d) for d in self.degrees)
        if not degrees or any(b <= a for a, b in zip(degrees, degrees[1:])):
            raise ValidationError("degrees must be non-empty and strictly increasing")
        if degrees[0] < 1:
            raise ValidationError("degrees must be positive")
        object.__setattr__(self, "degrees", degrees)
        if int(self.trials_per_degree) < 1:
            raise ValidationError("trials_per_degree must be >= 1")
        object.__setattr__(self, "trials_per_degree", int(self.trials_per_degree))
        EnsembleSpec(self.family, self.r, 1)
        object.__setattr__(self, "r", float(self.r))
        SeedPolicy(int(self.master_seed))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "r": self.r,
            "degrees": list(self.degrees),
            "trials_per_degree": self.trials_per_degree,
            "master_seed": self.master_seed,
            "count_method": self.count_method.value,
            "outputs": dict(self.outputs),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise SchemaError("config must be a JSON object")
        missing = {"family", "degrees", "trials_per_degree"} - set(doc)
        if missing:
            raise SchemaError(f"config is missing {sorted(missing)}")
        try:
            return cls(doc["family"], float(doc.get("r", 1.0)), tuple(doc["degrees"]), int(doc["trials_per_degree"]),
                       int(doc.get("master_seed", 0)), doc.get("count_method", "exact"), dict(doc.get("outputs", {})))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise SchemaError(f"malformed config: {exc}") from None


@dataclass(frozen=True)
class TrialOutcome:
    index: int
    count: int = 0
    degenerate: bool = False
    isolated: int = 0
    good: int = 0
    pairing: float = math.nan
    grid_count: int = -1
    grid_flagged: bool = False
    failed: str = ""
    seconds: float = 0.0


def run_trial(family, r, n, master_seed, trial_index, count_method="exact") -> TrialOutcome:
    """Sample, solve, count and certify one polynomial."""
    t0 = time.perf_counter()
    method = CountMethod(count_method)
    spec = EnsembleSpec(family, r, n)
    poly = sample_polynomial(spec, SeedPolicy(_degree_seed(master_seed, n), trial_index))
    try:
        if n == 1:
            return TrialOutcome(trial_index, 1, False, count_isolated(poly), 0, math.nan,
                                1 if method is not CountMethod.EXACT else -1, False, "",
                                time.perf_counter() - t0)
        cps = solve_critical_points(poly)
        exact = count_components_exact(poly, cps)
        count, degenerate = exact.count, exact.degenerate
        grid_count, grid_flag = -1, False
        if method is not CountMethod.EXACT:
            g = count_components_grid(poly)
            grid_count, grid_flag = g.count, g.degenerate or g.unstable
            if method is CountMethod.GRID:
                count, degenerate = g.count, grid_flag
        isolated = count_isolated(poly)
        good = int(np.sum(good_root_mask(poly, cps)))
        pairing = pairing_statistics(poly, cps).annulus_fraction
    except LemlabError as exc:
        return TrialOutcome(trial_index, failed=f"{type(exc).__name__}: {exc}", seconds=time.perf_counter() - t0)
    return TrialOutcome(trial_index, count, degenerate, isolated, good, pairing, grid_count, grid_flag, "",
                        time.perf_counter() - t0)


def _trial_job(args):
    return run_trial(*args)


def _same(a, b) -> bool:
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass(frozen=True, eq=False)
class DegreeRow:
    """Aggregate over the trials at one degree; ``counts`` keeps the raw data for resampling."""

    n: int
    trials: int
    mean_count: float
    stderr: float
    mean_isolated: float
    mean_good: float
    ratio: float
    pairing_fraction: float
    pairing_stderr: float
    degenerate_rate: float
    failures: int
    counts: Tuple[int, ...]
    pairing: Tuple[float, ...] = ()
    grid_disagreements: int = 0
    frac_one: float = math.nan
    seconds: float = 0.0

    def __eq__(self, other):
        # NaN-aware; wall time is not part of the result's identity
        if not isinstance(other, DegreeRow):
            return NotImplemented
        a, b = asdict(self), asdict(other)
        a.pop("seconds"), b.pop("seconds")
        return all(_same(a[k], b[k]) for k in a)

    __hash__ = None


def _mean_se(values) -> Tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    m = math.fsum(v) / v.size
    if v.size < 2:
        return m, 0.0
    s = math.sqrt(math.fsum((v - m) ** 2) / (v.size - 1))
    return m, s / math.sqrt(v.size)


def aggregate(n: int, outcomes: Sequence[TrialOutcome]) -> DegreeRow:
    outcomes = sorted(outcomes, key=lambda o: o.index)
    ok = [o for o in outcomes if not o.failed]
    counts = tuple(o.count for o in ok)
    m, se = _mean_se(counts)
    pair = tuple(o.pairing for o in ok)
    finite = [p for p in pair if not math.isnan(p)]
    pm, pse = _mean_se(finite)
    return DegreeRow(
        n=n,
        trials=len(ok),
        mean_count=m,
        stderr=se,
        mean_isolated=_mean_se([o.isolated for o in ok])[0],
        mean_good=_mean_se([o.good for o in ok])[0],
        ratio=m / n,
        pairing_fraction=pm,
        pairing_stderr=pse,
        degenerate_rate=(sum(o.degenerate for o in ok) / len(ok)) if ok else math.nan,
        failures=len(outcomes) - len(ok),
        counts=counts,
        pairing=pair,
        grid_disagreements=sum(1 for o in ok if o.grid_count >= 0 and o.grid_count != o.count),
        frac_one=(sum(c == 1 for c in counts) / len(counts)) if counts else math.nan,
        seconds=math.fsum(o.seconds for o in outcomes),
    )


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: Tuple[DegreeRow, ...]

    @property
    def total_trials(self) -> int:
        return self.config.trials_per_degree * len(self.config.degrees)

    @property
    def failures(self) -> int:
        return sum(r.failures for r in self.rows)

    @property
    def valid(self) -> bool:
        return self.failures < FAILURE_LIMIT * self.total_trials

    def row(self, n: int) -> DegreeRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)


def run_experiment(config: ExperimentConfig, workers: int = 1, chunksize: int = 4) -> ExperimentResult:
    """Run every (degree, trial) of ``config``; deterministic for any ``workers``."""
    jobs = [(config.family.value, config.r, n, config.master_seed, t, config.count_method.value)
            for n in config.degrees for t in range(config.trials_per_degree)]
    if workers <= 1:
        outcomes = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_trial_job, jobs, chunksize=chunksize))
    rows = []
    T = config.trials_per_degree
    for k, n in enumerate(config.degrees):
        rows.append(aggregate(n, outcomes[k * T:(k + 1) * T]))
    return ExperimentResult(config, tuple(rows))


# --- scaling fits -------------------------------------------------------------


class FitModel(str, enum.Enum):
    POWER_LAW = "power_law"
    LINEAR_RATIO = "linear_ratio"


@dataclass(frozen=True)
class ScalingFit:
    model: FitModel
    estimate: float
    confidence_interval: Tuple[float, float]
    residuals: Tuple[float, ...]
    ratios: Tuple[float, ...] = ()
    ratio_stderrs: Tuple[float, ...] = ()
    degrees: Tuple[int, ...] = ()


def _rows_of(results):
    rows = results.rows if isinstance(results, ExperimentResult) else tuple(results)
    return sorted(rows, key=lambda r: r.n)


def scaling_fit(results, model="power_law", n_boot: int = 1000, seed: int = 0, level: float = 0.95) -> ScalingFit:
    """Fit growth of the mean count across degrees.

    ``power_law`` regresses ``log mean_count`` on ``log n`` and bootstraps the
    slope by resampling trials within each degree. ``linear_ratio`` reports
    ``mean_count / n`` at the largest degree with a normal interval.
    """
    model = FitModel(getattr(model, "value", model))
    rows = _rows_of(results)
    if len(rows) < 4:
        raise InsufficientDataError(f"scaling fit needs at least 4 degree points, got {len(rows)}")
    ns = np.array([r.n for r in rows], dtype=float)
    means = np.array([r.mean_count for r in rows])
    ratios = tuple(float(r.ratio) for r in rows)
    rse = tuple(float(r.stderr / r.n) for r in rows)
    degrees = tuple(int(r.n) for r in rows)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    if model is FitModel.LINEAR_RATIO:
        est = ratios[-1]
        ci = (est - z * rse[-1], est + z * rse[-1])
        resid = tuple(float(x - est) for x in ratios)
        return ScalingFit(model, est, ci, resid, ratios, rse, degrees)
    x = np.log(ns)
    slope, icept = np.polyfit(x, np.log(means), 1)
    resid = tuple(float(v) for v in np.log(means) - (slope * x + icept))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5CA1E])))
    boots = np.empty(n_boot)
    data = [np.asarray(r.counts, dtype=float) for r in rows]
    for b in range(n_boot):
        bm = np.array([d[rng.integers(0, d.size, d.size)].mean() for d in data])
        boots[b] = np.polyfit(x, np.log(bm), 1)[0]
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(boots, [a, 1.0 - a])
    ci = (min(float(lo), float(slope)), max(float(hi), float(slope)))
    return ScalingFit(model, float(slope), ci, resid, ratios, rse, degrees)


def monotone_within(values, stderrs, k: float = 2.0, increasing: bool = True) -> bool:
    """True unless some consecutive step goes the wrong way by more than ``k`` combined stderrs."""
    v = list(values)
    s = list(stderrs)
    for a in range(len(v) - 1):
        step = v[a + 1] - v[a]
        tol = k * math.hypot(s[a], s[a + 1])
        if (increasing and step < -tol) or (not increasing and step > tol):
            return False
    return True


def ratio_trend_ok(fit: ScalingFit, target: float = 0.5, k: float = 2.0) -> bool:
    """``|ratio - target|`` non-increasing in n within ``k`` stderr."""
    dev = [abs(x - target) for x in fit.ratios]
    return monotone_within(dev, fit.ratio_stderrs, k, increasing=False)


# --- phase sweep --------------------------------------------------------------


@dataclass(frozen=True)
class PhaseRow:
    family: str
    r: float
    n: int
    trials: int
    phase: str
    mean_count: float
    stderr: float
    ratio: float
    frac_one: float
    degenerate_rate: float
    passed: Optional[bool]
    rule: str


def phase_rule(family, r, n, row: DegreeRow) -> Tuple[Optional[bool], str]:
    family = Family.parse(family)
    if r < 1:
        return row.frac_one >= 0.99, "count == 1 in >= 99% of trials"
    if (family is Family.CIRCLE and r > 1) or (family is Family.DISK and r > SQRT_E):
        return row.mean_count >= 0.99 * n, "mean >= 0.99 n"
    if family is Family.DISK and 1 < r <= SQRT_E:
        return 0.02 < row.ratio < 0.98, "0.02 < mean/n < 0.98"
    return None, "no fixed-threshold rule"


def phase_sweep(family, r_values, n: int, trials: int, master_seed: int = 0, workers: int = 1) -> List[PhaseRow]:
    """Mean component count per scale, tagged with the predicted regime and a pass/fail verdict."""
    out = []
    for r in r_values:
        cfg = ExperimentConfig(family, r, (n,), trials, master_seed)
        row = run_experiment(cfg, workers).rows[0]
        passed, rule = phase_rule(family, r, n, row)
        out.append(PhaseRow(cfg.family.value, float(r), n, row.trials, predicted_phase(family, r), row.mean_count,
                            row.stderr, row.ratio, row.frac_one, row.degenerate_rate, passed, rule))
    return out


# --- pairing ------------------------------------------------------------------


@dataclass(frozen=True)
class PairingRow:
    n: int
    fraction: float
    stderr: float
    empty_annulus: bool
    trials_used: int


@dataclass(frozen=True)
class PairingTable:
    rows: Tuple[PairingRow, ...]
    trend_ok: bool


def pairing_campaign(spec, degrees, trials: int, master_seed: int = 0, workers: int = 1) -> PairingTable:
    """Unique-critical-point fraction among annulus roots, per degree, for the unit disk."""
    family = spec.family if isinstance(spec, EnsembleSpec) else Family.parse(spec)
    r = spec.r if isinstance(spec, EnsembleSpec) else 1.0
    if family is not Family.DISK or r != 1.0:
        raise ValidationError("pairing campaigns are defined for the unit disk")
    res = run_experiment(ExperimentConfig(family, r, tuple(degrees), trials, master_seed), workers)
    rows = []
    for row in res.rows:
        used = sum(1 for p in row.pairing if not math.isnan(p))
        rows.append(PairingRow(row.n, row.pairing_fraction, row.pairing_stderr, used == 0, used))
    live = [p for p in rows if not p.empty_annulus]
    trend = monotone_within([p.fraction for p in live], [p.stderr for p in live], 2.0, increasing=True)
    return PairingTable(tuple(rows), trend)


# --- persistence --------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _unjson(x):
    if x is None:
        return math.nan
    if x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    return float(x)


def result_to_dict(result: ExperimentResult) -> dict:
    rows = []
    for r in result.rows:
        d = asdict(r)
        d["counts"] = list(r.counts)
        d["pairing"] = [_jsonable(p) for p in r.pairing]
        rows.append({k: (_jsonable(v) if isinstance(v, float) else v) for k, v in d.items()})
    return {"schema": SCHEMA, "config": result.config.to_dict(), "rows": rows,
            "failures": result.failures, "valid": result.valid}


_FLOAT_FIELDS = ("mean_count", "stderr", "mean_isolated", "mean_good", "ratio", "pairing_fraction",
                 "pairing_stderr", "degenerate_rate", "frac_one", "seconds")


def result_from_dict(doc: dict) -> ExperimentResult:
    if not isinstance(doc, dict) or "schema" not in doc:
        raise SchemaError("result document has no schema tag")
    if doc["schema"] != SCHEMA:
        raise SchemaVersionError(doc["schema"])
    try:
        cfg = ExperimentConfig.from_dict(doc["config"])
        rows = []
        for d in doc["rows"]:
            d = dict(d)
            for k in _FLOAT_FIELDS:
                d[k] = _unjson(d[k])
            d["counts"] = tuple(int(c) for c in d["counts"])
            d["pairing"] = tuple(_unjson(p) for p in d["pairing"])
            rows.append(DegreeRow(**d))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed result document: {exc}") from None
    return ExperimentResult(cfg, tuple(rows))


def persist(result: ExperimentResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_to_dict(result), fh, indent=1)
        fh.write("\n")


def load(path) -> ExperimentResult:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    return result_from_dict(doc)


def export_csv(result: ExperimentResult, path) -> int:
    """Write one row per degree; returns the number of data rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in result.rows:
            w.writerow([result.config.family.value, repr(result.config.r), r.n, r.trials, repr(r.mean_count),
                        repr(r.stderr), repr(r.mean_isolated), repr(r.ratio), repr(r.pairing_fraction),
                        repr(r.degenerate_rate), f"{r.seconds:.3f}"])
    return len(result.rows)
