"""Experiment protocol: MC ground truth, estimator comparison and sensitivity sweeps."""

from __future__ import annotations

import contextlib
import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..baselines import (
    GaussianRbf,
    IdwDistance,
    IdwInterpolator,
    KrigingDistance,
    KrigingInterpolator,
    VariogramKind,
)
from ..baselines.distance import max_age
from ..mc_engine import McResult, read_results_csv, value_portfolio, write_results_csv
from ..metamodel import FeatureConfig, Metamodel, TrainConfig, TrainState, train
from ..mortality import MortalityTable, gompertz_makeham_table
from ..portfolio import (
    VaContract,
    generate_input_portfolio,
    sample_from_grid,
    sample_validation,
)
from .config import ExperimentConfig, MethodSpec
from .seeds import derive_seed

__all__ = [
    "StageError",
    "stage",
    "Vary",
    "SIZE_SWEEP",
    "PreparedData",
    "MethodOutcome",
    "ComparisonRow",
    "ComparisonReport",
    "SensitivityRow",
    "SensitivityReport",
    "load_mortality",
    "mc_config",
    "input_portfolio",
    "input_valuation",
    "training_set",
    "validation_set",
    "representative_set",
    "feature_config",
    "train_config",
    "prepare",
    "build_baseline",
    "run_method",
    "run_comparison",
    "run_sensitivity",
    "summarize",
]

log = logging.getLogger(__name__)

# id blocks keep per-contract MC seeds distinct across portfolios
TRAINING_ID_BASE = 10_000_000
REPRESENTATIVE_ID_BASE = 20_000_000
REPLICATION_ID_STRIDE = 100_000


class StageError(RuntimeError):
    def __init__(self, stage_name: str, message: str):
        super().__init__(f"[{stage_name}] {message}")
        self.stage = stage_name


@contextlib.contextmanager
def stage(name: str):
    """Re-raise any failure tagged with the pipeline stage it came from."""
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


class Vary(enum.Enum):
    REPRESENTATIVES = "representatives"
    TRAINING = "training"
    VALIDATION = "validation"
    SIZES = "sizes"


# (representatives, training, validation) at full scale and the portfolio
# whose realisations vary for that row
SIZE_SWEEP: tuple[tuple[tuple[int, int, int], Vary], ...] = (
    ((300, 200, 250), Vary.REPRESENTATIVES),
    ((250, 200, 250), Vary.REPRESENTATIVES),
    ((200, 200, 250), Vary.REPRESENTATIVES),
    ((300, 150, 250), Vary.TRAINING),
    ((300, 100, 250), Vary.TRAINING),
    ((300, 200, 200), Vary.VALIDATION),
    ((300, 200, 150), Vary.VALIDATION),
)


def load_mortality(cfg: ExperimentConfig) -> MortalityTable:
    return MortalityTable.from_csv(cfg.mortality) if cfg.mortality else gompertz_makeham_table()


def mc_config(cfg: ExperimentConfig):
    return dataclasses.replace(cfg.mc, seed=derive_seed(cfg.seed, "mc"))


def train_config(cfg: ExperimentConfig) -> TrainConfig:
    return dataclasses.replace(cfg.train, seed=derive_seed(cfg.seed, "train") % (2**32))


def _value(contracts, mortality, cfg: ExperimentConfig) -> tuple[np.ndarray, float, list[McResult]]:
    t0 = time.perf_counter()
    valuation = value_portfolio(contracts, mortality, mc_config(cfg), workers=cfg.workers)
    return valuation.deltas, time.perf_counter() - t0, valuation.results


def input_portfolio(cfg: ExperimentConfig) -> list[VaContract]:
    return generate_input_portfolio(cfg.input_space, cfg.sizes.input, derive_seed(cfg.seed, "input"))


def input_valuation(
    cfg: ExperimentConfig,
    contracts: Sequence[VaContract],
    mortality: MortalityTable,
    cache_dir: str | Path | None = None,
) -> tuple[np.ndarray, float, bool]:
    """Per-contract MC deltas of the input portfolio, cached by config hash.

    Returns ``(deltas, seconds, from_cache)``.
    """
    path = None
    if cache_dir is not None:
        key = cfg.digest("seed", "sizes", "mc", "mortality", "spaces")
        path = Path(cache_dir) / f"delta_mc_{key}.csv"
        if path.exists():
            results = read_results_csv(path)
            if [r.id for r in results] == [c.id for c in contracts]:
                return np.array([r.delta for r in results]), 0.0, True
            log.warning("ignoring stale cache %s", path)
    deltas, seconds, results = _value(contracts, mortality, cfg)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        write_results_csv(results, tmp)
        tmp.replace(path)
    return deltas, seconds, False


def training_set(cfg: ExperimentConfig, mortality, realization: int = 0, size: int | None = None):
    contracts = sample_from_grid(
        cfg.training_space,
        size or cfg.sizes.training,
        derive_seed(cfg.seed, "training", realization),
        id_offset=TRAINING_ID_BASE + realization * REPLICATION_ID_STRIDE,
    )
    deltas, _, _ = _value(contracts, mortality, cfg)
    return contracts, deltas


def validation_set(
    cfg: ExperimentConfig, contracts, deltas, realization: int = 0, size: int | None = None
):
    """Validation contracts drawn from the input portfolio; their MC deltas are reused."""
    index = {c.id: k for k, c in enumerate(contracts)}
    chosen = sample_validation(
        contracts, size or cfg.sizes.validation, derive_seed(cfg.seed, "validation", realization)
    )
    return chosen, np.array([deltas[index[c.id]] for c in chosen])


def representative_set(cfg: ExperimentConfig, mortality, realization: int, size: int | None = None):
    reps = sample_from_grid(
        cfg.representative_space,
        size or cfg.sizes.representatives,
        derive_seed(cfg.seed, "representatives", realization),
        id_offset=REPRESENTATIVE_ID_BASE + realization * REPLICATION_ID_STRIDE,
    )
    deltas, seconds, _ = _value(reps, mortality, cfg)
    return reps, deltas, seconds


def feature_config(cfg: ExperimentConfig, contracts: Sequence[VaContract]) -> FeatureConfig:
    if cfg.ratio_quantiles is None:
        return FeatureConfig.from_space(cfg.input_space)
    return FeatureConfig.from_space(
        cfg.input_space, contracts=contracts, ratio_quantiles=cfg.ratio_quantiles
    )


@dataclass
class PreparedData:
    input: list[VaContract]
    input_deltas: np.ndarray
    training: list[VaContract]
    training_deltas: np.ndarray
    validation: list[VaContract]
    validation_deltas: np.ndarray
    mortality: MortalityTable
    features: FeatureConfig
    mc_seconds: float = 0.0
    cached: bool = False

    @property
    def delta_mc(self) -> float:
        return math.fsum(self.input_deltas)


def prepare(cfg: ExperimentConfig, cache_dir: str | Path | None = None) -> PreparedData:
    with stage("mortality"):
        mortality = load_mortality(cfg)
    with stage("generate"):
        contracts = input_portfolio(cfg)
    with stage("mc-value"):
        deltas, seconds, cached = input_valuation(cfg, contracts, mortality, cache_dir)
        if math.fsum(deltas) == 0.0:
            raise ValueError("MC portfolio delta is zero; relative errors are undefined")
        trn, trn_d = training_set(cfg, mortality)
    with stage("generate"):
        val, val_d = validation_set(cfg, contracts, deltas)
    with stage("features"):
        fc = feature_config(cfg, contracts)
    return PreparedData(contracts, deltas, trn, trn_d, val, val_d, mortality, fc, seconds, cached)


@dataclass
class MethodOutcome:
    method: MethodSpec
    estimate: float
    portfolio_seconds: float
    per_policy_seconds: float
    model: Metamodel | None = None
    state: TrainState | None = None
    estimate_seconds: float = 0.0


def build_baseline(method: MethodSpec, cfg: ExperimentConfig, portfolio: Sequence[VaContract]):
    """Unfitted baseline estimator; the IDW age scale comes from ``portfolio``."""
    if method.name == "idw":
        return IdwInterpolator(method.power, IdwDistance(max_age(portfolio), cfg.gamma))
    distance = KrigingDistance.from_space(cfg.input_space, cfg.gamma)
    if method.name == "kriging":
        return KrigingInterpolator(VariogramKind(method.variogram), distance)
    if method.name == "rbf":
        return GaussianRbf(method.epsilon, distance)
    raise ValueError(f"no baseline estimator for {method.name!r}")


def run_method(
    method: MethodSpec,
    cfg: ExperimentConfig,
    data: PreparedData,
    reps: Sequence[VaContract],
    rep_deltas,
    training: tuple | None = None,
    validation: tuple | None = None,
) -> MethodOutcome:
    """Fit one method on the representatives and estimate the input portfolio.

    Portfolio-mode time covers fitting plus the aggregate estimate; per-policy
    time covers fitting plus one estimate per contract.  MC of the
    representatives is excluded.
    """
    contracts = data.input
    if method.name == "mc":
        return MethodOutcome(method, data.delta_mc, data.mc_seconds, data.mc_seconds)
    if method.name == "nn":
        trn, trn_d = training or (data.training, data.training_deltas)
        val, val_d = validation or (data.validation, data.validation_deltas)
        t0 = time.perf_counter()
        model, state = train(
            reps, rep_deltas, list(zip(trn, trn_d)), list(zip(val, val_d)), train_config(cfg), data.features
        )
        fit = time.perf_counter() - t0
        estimator = model
    else:
        t0 = time.perf_counter()
        estimator = build_baseline(method, cfg, data.input).fit(reps, rep_deltas)
        fit = time.perf_counter() - t0
        model = state = None
    t1 = time.perf_counter()
    total = estimator.total(contracts)
    t2 = time.perf_counter()
    per_policy = math.fsum(estimator.predict(contracts))
    t3 = time.perf_counter()
    if not math.isclose(total, per_policy, rel_tol=1e-8, abs_tol=1e-6 * abs(data.delta_mc)):
        log.warning("%s: aggregate %.6g differs from per-policy sum %.6g", method.label, total, per_policy)
    return MethodOutcome(method, float(total), fit + (t2 - t1), fit + (t3 - t2), model, state, t2 - t1)


@dataclass(frozen=True)
class ComparisonRow:
    replication: int
    method: str
    estimate: float
    delta_mc: float
    portfolio_seconds: float = 0.0
    per_policy_seconds: float = 0.0
    rep_mc_seconds: float = 0.0

    @property
    def rel_error(self) -> float:
        return (self.estimate - self.delta_mc) / abs(self.delta_mc)


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow] = field(default_factory=list)
    histories: dict[int, TrainState] = field(default_factory=dict)
    scatter: list[tuple[float, float]] = field(default_factory=list)
    mc_seconds: float = 0.0

    def errors(self, method: str) -> np.ndarray:
        return np.array([r.rel_error for r in self.rows if r.method == method])

    def summary(self) -> list[dict]:
        out = []
        for label in dict.fromkeys(r.method for r in self.rows):
            rows = [r for r in self.rows if r.method == label]
            errs = np.array([r.rel_error for r in rows])
            mean, std = summarize(errs)
            out.append(
                {
                    "method": label,
                    "mean_rel_error": mean,
                    "std_rel_error": std,
                    "mean_abs_rel_error": float(np.mean(np.abs(errs))),
                    "mean_portfolio_seconds": summarize([r.portfolio_seconds for r in rows])[0],
                    "mean_per_policy_seconds": summarize([r.per_policy_seconds for r in rows])[0],
                }
            )
        return out


def summarize(values) -> tuple[float, float]:
    """Mean and sample STD; the STD of a single value is reported as 0."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(np.mean(v)), float(np.std(v, ddof=1)) if v.size > 1 else 0.0


def run_comparison(
    cfg: ExperimentConfig,
    data: PreparedData | None = None,
    cache_dir: str | Path | None = None,
    report: ComparisonReport | None = None,
) -> ComparisonReport:
    """Every configured method on every replication of the representatives.

    Rows are appended to ``report`` as they complete, so a caller holding it
    can still flush partial results when a later stage fails.
    """
    report = report if report is not None else ComparisonReport()
    data = data or prepare(cfg, cache_dir)
    report.mc_seconds = data.mc_seconds
    for r in range(cfg.replications):
        with stage("representatives"):
            reps, rep_d, rep_seconds = representative_set(cfg, data.mortality, r)
        for method in cfg.methods:
            with stage(f"estimate:{method.label}"):
                out = run_method(method, cfg, data, reps, rep_d)
            report.rows.append(
                ComparisonRow(
                    r, method.label, out.estimate, data.delta_mc,
                    out.portfolio_seconds, out.per_policy_seconds, rep_seconds,
                )
            )
            if out.state is not None:
                report.histories[r] = out.state
                if r == 0:
                    nn = out.model.predict(data.validation)
                    report.scatter = [(float(a), float(b)) for a, b in zip(data.validation_deltas, nn)]
            log.info("replication %d %s: err %.4f", r, method.label, report.rows[-1].rel_error)
    return report


@dataclass(frozen=True)
class SensitivityRow:
    vary: str
    sizes: tuple[int, int, int]
    realization: int
    estimate: float
    delta_mc: float
    iterations: int
    seconds: float = 0.0
    estimate_seconds: float = 0.0

    @property
    def rel_error(self) -> float:
        return (self.estimate - self.delta_mc) / abs(self.delta_mc)


@dataclass
class SensitivityReport:
    rows: list[SensitivityRow] = field(default_factory=list)

    def groups(self) -> dict[tuple[str, tuple[int, int, int]], list[SensitivityRow]]:
        out: dict = {}
        for r in self.rows:
            out.setdefault((r.vary, r.sizes), []).append(r)
        return out

    def summary(self) -> list[dict]:
        out = []
        for (vary, sizes), rows in self.groups().items():
            err_mean, err_std = summarize([r.rel_error for r in rows])
            it_mean, it_std = summarize([r.iterations for r in rows])
            t_mean, t_std = summarize([r.seconds for r in rows])
            e_mean, _ = summarize([r.estimate_seconds for r in rows])
            out.append(
                {
                    "vary": vary,
                    "sizes": sizes,
                    "realizations": len(rows),
                    "mean_rel_error": err_mean,
                    "std_rel_error": err_std,
                    "mean_iterations": it_mean,
                    "std_iterations": it_std,
                    "mean_seconds": t_mean,
                    "std_seconds": t_std,
                    "mean_estimate_seconds": e_mean,
                }
            )
        return out


def _scaled(triple, factor: float) -> tuple[int, int, int]:
    return tuple(max(1, int(round(x * factor))) for x in triple)


def run_sensitivity(
    cfg: ExperimentConfig,
    vary: Vary | str,
    realizations: int | None = None,
    data: PreparedData | None = None,
    cache_dir: str | Path | None = None,
    report: SensitivityReport | None = None,
) -> SensitivityReport:
    """NN accuracy and runtime as one portfolio choice (or the sizes) varies.

    Portfolios that are not varied stay at realisation 0.  Runtime covers
    training plus estimation.
    """
    vary = Vary(vary)
    k = realizations or cfg.sensitivity_realizations
    if k < 1:
        raise ValueError("realizations must be positive")
    data = data or prepare(cfg, cache_dir)
    base = (cfg.sizes.representatives, cfg.sizes.training, cfg.sizes.validation)
    plan = (
        [(_scaled(t, cfg.size_factor), v) for t, v in SIZE_SWEEP]
        if vary is Vary.SIZES
        else [(base, vary)]
    )
    nn = MethodSpec("nn")
    report = report if report is not None else SensitivityReport()
    for sizes, varied in plan:
        n, t, v = sizes
        for j in range(k):
            with stage(f"sensitivity:{vary.value}"):
                rj = j if varied is Vary.REPRESENTATIVES else 0
                tj = j if varied is Vary.TRAINING else 0
                vj = j if varied is Vary.VALIDATION else 0
                reps, rep_d, _ = representative_set(cfg, data.mortality, rj, size=n)
                training = training_set(cfg, data.mortality, tj, size=t)
                validation = validation_set(cfg, data.input, data.input_deltas, vj, size=v)
                out = run_method(nn, cfg, data, reps, rep_d, training, validation)
            report.rows.append(
                SensitivityRow(
                    vary.value, sizes, j, out.estimate, data.delta_mc,
                    out.state.iteration, out.portfolio_seconds, out.estimate_seconds,
                )
            )
    return report
