"""Monte Carlo valuation of guarantee liabilities and their delta.

Cash-flow model
---------------
Annual projection over the contract term, per scenario::

    AV_t = AV_{t-1} * growth_t                      (fund growth)
    AV_t -= min(W_t, AV_t)                           (GMWB withdrawal)
    rider_t = W_t - min(W_t, AV_t)                   (insurer pays the shortfall)
    death_t = P(die in year t) * max(GD_t - AV_t, 0) (GMDB top-up, end of year)

``W_t = rate * GW_0`` while the guaranteed balance lasts (last instalment
partial), ``GD_t = max(GD_0 - sum of withdrawals, 0)``.  Withdrawals are paid
regardless of survival; deaths are an expected-value decrement.  Everything
is discounted at the risk-free rate and averaged over scenarios.  There are
no fees and no lapses.

Delta is ``[V(1 + h) - V(1 - h)] / (2h)`` where the argument scales the
initial account value, valued on one path matrix (common random numbers).
It is therefore a dollar delta per unit relative fund move.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .mortality import MortalityTable
from .portfolio import VaContract

__all__ = [
    "McConfig",
    "McResult",
    "PortfolioValuation",
    "contract_seed",
    "generate_paths",
    "project_contract",
    "compute_delta",
    "value_portfolio",
    "write_results_csv",
    "read_results_csv",
]

_RESIDUE = 1e-9


@dataclass(frozen=True)
class McConfig:
    scenario_count: int = 10_000
    risk_free_rate: float = 0.03
    volatility: float = 0.20
    time_step_years: float = 1.0
    bump_fraction: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.scenario_count < 1:
            raise ValueError("scenario_count must be >= 1")
        if self.volatility < 0:
            raise ValueError("volatility must be >= 0")
        if not 0 < self.bump_fraction < 1:
            raise ValueError("bump_fraction must lie in (0, 1)")
        if self.time_step_years <= 0:
            raise ValueError("time_step_years must be positive")
        steps = 1.0 / self.time_step_years
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("time_step_years must divide one year evenly")

    @property
    def steps_per_year(self) -> int:
        return int(round(1.0 / self.time_step_years))


@dataclass(frozen=True)
class McResult:
    id: int
    liability: float
    delta: float
    standard_error: float
    scenario_count: int
    liability_se: float = 0.0


@dataclass
class PortfolioValuation:
    results: list[McResult]

    @property
    def aggregate_delta(self) -> float:
        return float(math.fsum(r.delta for r in self.results))

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r.delta for r in self.results])


def contract_seed(base_seed: int, contract_id: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(contract_id)])


def generate_paths(cfg: McConfig, horizon_years: int, seed) -> np.ndarray:
    """Annual fund growth factors, shape ``(scenario_count, horizon_years)``.

    Sub-annual steps (``time_step_years < 1``) are compounded into one factor
    per year.
    """
    if horizon_years < 1:
        raise ValueError("horizon_years must be >= 1")
    rng = np.random.default_rng(seed)
    k = cfg.steps_per_year
    dt = cfg.time_step_years
    z = rng.standard_normal((cfg.scenario_count, horizon_years * k))
    log_step = (cfg.risk_free_rate - 0.5 * cfg.volatility**2) * dt + cfg.volatility * math.sqrt(dt) * z
    if k > 1:
        log_step = log_step.reshape(cfg.scenario_count, horizon_years, k).sum(axis=2)
    return np.exp(log_step)


def _schedules(contract: VaContract, mortality: MortalityTable, years: int):
    """Deterministic per-year withdrawal, death-benefit base and death probability."""
    t = np.arange(1, years + 1, dtype=float)
    live = t <= contract.maturity
    if contract.has_gmwb and contract.gw_value > 0:
        w = contract.withdrawal_rate * contract.gw_value
        remaining = contract.gw_value - (t - 1.0) * w
        withdrawals = np.clip(remaining, 0.0, w)
        withdrawals[withdrawals <= _RESIDUE * contract.gw_value] = 0.0
    else:
        withdrawals = np.zeros(years)
    withdrawals = np.where(live, withdrawals, 0.0)
    gd = np.maximum(contract.gd_value - np.cumsum(withdrawals), 0.0)
    term = min(years, contract.maturity)
    deaths = np.zeros(years)
    deaths[:term] = mortality.death_probabilities(contract.gender, contract.age, term)
    return withdrawals, gd, deaths


def _project_block(
    account_values: np.ndarray,
    growth: np.ndarray,
    withdrawals: np.ndarray,
    gd: np.ndarray,
    deaths: np.ndarray,
    discount: np.ndarray,
    scales: Sequence[float],
) -> np.ndarray:
    """Present value of guarantee cash flows, shape ``(len(scales), C, S)``.

    ``growth`` is ``(C, S, T)``; schedules are ``(C, T)``.
    """
    scales = np.asarray(scales, dtype=float)
    av = scales[:, None, None] * account_values[None, :, None] * np.ones(growth.shape[1])
    pv = np.zeros_like(av)
    for t in range(growth.shape[2]):
        av *= growth[None, :, :, t]
        wd = withdrawals[None, :, t, None]
        if np.any(wd):
            taken = np.minimum(wd, av)
            av -= taken
            pv += discount[t] * (wd - taken)
        dp = deaths[None, :, t, None]
        if np.any(dp):
            pv += (discount[t] * dp) * np.maximum(gd[None, :, t, None] - av, 0.0)
    return pv


def _discount(cfg: McConfig, years: int) -> np.ndarray:
    return np.exp(-cfg.risk_free_rate * np.arange(1, years + 1, dtype=float))


def _check_horizon(contract: VaContract, paths: np.ndarray):
    if paths.ndim != 2 or paths.shape[1] < contract.maturity:
        raise ValueError(
            f"path horizon {paths.shape[-1]} shorter than maturity {contract.maturity} "
            f"of contract {contract.id}"
        )


def project_contract(
    contract: VaContract,
    paths: np.ndarray,
    mortality: MortalityTable,
    cfg: McConfig,
    initial_scale: float = 1.0,
) -> float:
    """Liability of one contract on a given path matrix."""
    _check_horizon(contract, paths)
    if initial_scale <= 0:
        raise ValueError("initial_scale must be positive")
    years = contract.maturity
    wd, gd, deaths = _schedules(contract, mortality, years)
    pv = _project_block(
        np.array([contract.account_value]),
        paths[None, :, :years],
        wd[None],
        gd[None],
        deaths[None],
        _discount(cfg, years),
        [initial_scale],
    )
    return float(pv.mean())


def _value_block(
    contracts: Sequence[VaContract], mortality: MortalityTable, cfg: McConfig
) -> list[McResult]:
    years = max(c.maturity for c in contracts)
    s = cfg.scenario_count
    growth = np.ones((len(contracts), s, years))
    wd = np.zeros((len(contracts), years))
    gd = np.zeros((len(contracts), years))
    deaths = np.zeros((len(contracts), years))
    for k, c in enumerate(contracts):
        growth[k, :, : c.maturity] = generate_paths(cfg, c.maturity, contract_seed(cfg.seed, c.id))
        wd[k], gd[k], deaths[k] = _schedules(c, mortality, years)
    h = cfg.bump_fraction
    pv = _project_block(
        np.array([c.account_value for c in contracts]),
        growth,
        wd,
        gd,
        deaths,
        _discount(cfg, years),
        [1.0, 1.0 + h, 1.0 - h],
    )
    base, up, down = pv
    per_path_delta = (up - down) / (2.0 * h)
    results = []
    for k, c in enumerate(contracts):
        if s > 1:
            se = float(per_path_delta[k].std(ddof=1) / math.sqrt(s))
            lse = float(base[k].std(ddof=1) / math.sqrt(s))
        else:
            se = lse = 0.0
        results.append(
            McResult(
                id=c.id,
                liability=float(base[k].mean()),
                delta=float(per_path_delta[k].mean()),
                standard_error=se,
                scenario_count=s,
                liability_se=lse,
            )
        )
    return results


def compute_delta(contract: VaContract, mortality: MortalityTable, cfg: McConfig) -> McResult:
    """Central-difference delta on the contract's own seeded path matrix."""
    return _value_block([contract], mortality, cfg)[0]


def value_portfolio(
    contracts: Sequence[VaContract],
    mortality: MortalityTable,
    cfg: McConfig,
    workers: int = 1,
    block_elements: int = 4_000_000,
) -> PortfolioValuation:
    """Value every contract; results are identical for any ``workers``."""
    if not contracts:
        raise ValueError("cannot value an empty portfolio")
    per_contract = cfg.scenario_count * max(c.maturity for c in contracts)
    block = max(1, block_elements // per_contract)
    blocks = [contracts[i : i + block] for i in range(0, len(contracts), block)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda b: _value_block(b, mortality, cfg), blocks))
    else:
        chunks = [_value_block(b, mortality, cfg) for b in blocks]
    return PortfolioValuation([r for chunk in chunks for r in chunk])


RESULT_COLUMNS = ["id", "liability", "delta", "std_err"]


def write_results_csv(results: Sequence[McResult], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in results:
            writer.writerow([r.id, repr(r.liability), repr(r.delta), repr(r.standard_error)])


def read_results_csv(path: str | Path) -> list[McResult]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if list(reader.fieldnames or []) != RESULT_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(RESULT_COLUMNS)}")
        return [
            McResult(
                id=int(row["id"]),
                liability=float(row["liability"]),
                delta=float(row["delta"]),
                standard_error=float(row["std_err"]),
                scenario_count=0,
            )
            for row in reader
        ]
