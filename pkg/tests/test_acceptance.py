"""Acceptance criteria, one test each.

Every test records a ``criterion k PASS/FAIL: ...`` line, echoed in the
pytest terminal summary, before asserting.
"""

import csv
import filecmp
import math
import time
from dataclasses import replace

import numpy as np

from bs import bs_put
from conftest import ACCEPTANCE_LINES, DESK_SECONDS, distinct_nearest_queries, make_contract, random_contracts
from vagreeks.baselines import (
    GaussianRbf,
    IdwDistance,
    IdwInterpolator,
    KrigingDistance,
    OrdinaryKriging,
    VariogramKind,
    fit_variogram,
)
from vagreeks.baselines.distance import max_age
from vagreeks.harness import desk_scale
from vagreeks.harness.experiments import representative_set
from vagreeks.mc_engine import McConfig, compute_delta
from vagreeks.metamodel import FeatureConfig, Metamodel, detect_stopping, forward, gradient, momentum_coeff
from vagreeks.mortality import MortalityTable, gompertz_makeham_table
from vagreeks.portfolio import INPUT_SPACE, REPRESENTATIVE_GRID, Gender, Rider, generate_input_portfolio, sample_from_grid

FC = FeatureConfig.from_space(INPUT_SPACE)


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_model(rng, n: int) -> Metamodel:
    reps = random_contracts(rng, n, id_offset=1000)
    model = Metamodel.zeros(reps, -rng.uniform(1e3, 1e5, n), FC)
    model.weights = rng.normal(0.0, 1.0, model.weights.shape)
    model.biases = rng.normal(0.0, 1.0, n)
    return model


# 1. estimator oracle


def _attributes(c) -> list[float]:
    av = c.account_value
    return [
        c.maturity,
        c.age,
        av,
        c.gd_value / av if av > 0 else 0.0,
        c.gw_value / av if av > 0 else 0.0,
        c.withdrawal_rate,
    ]


def _hand_features(z, zi, ranges) -> list[float]:
    names = ("maturity", "age", "account_value", "gd_over_av", "gw_over_av", "withdrawal_rate")
    tz, ti = _attributes(z), _attributes(zi)
    mismatch = [float(z.rider is not zi.rider), float(z.gender is not zi.gender)]
    minus = [max(b - a, 0.0) / ranges[k] for a, b, k in zip(tz, ti, names)]
    plus = [max(a - b, 0.0) / ranges[k] for a, b, k in zip(tz, ti, names)]
    return mismatch + minus + plus


def brute_force(model: Metamodel, z) -> float:
    """sum_i exp(w_i . f_i + b_i) y_i / sum_i exp(w_i . f_i + b_i), scalar arithmetic."""
    num, den = [], []
    for i, zi in enumerate(model.reps):
        f = _hand_features(z, zi, model.feature_config.ranges)
        a = math.fsum(w * x for w, x in zip(model.weights[i], f)) + model.biases[i]
        e = math.exp(a)
        num.append(e * model.rep_deltas[i])
        den.append(e)
    return math.fsum(num) / math.fsum(den)


def test_criterion_1_estimator_matches_brute_force():
    rng = np.random.default_rng(101)
    pairs = []
    for _ in range(1000):
        model = random_model(rng, int(rng.integers(1, 11)))
        pairs.append((model, random_contracts(rng, 1)[0]))
    t0 = time.perf_counter()
    got = [forward(m, z)[0] for m, z in pairs]
    seconds = time.perf_counter() - t0
    want = [brute_force(m, z) for m, z in pairs]
    worst = max(abs(g - w) / abs(w) for g, w in zip(got, want))
    record(1, worst <= 1e-12 and seconds < 1.0,
           f"max rel diff {worst:.2e} (tol 1e-12) over 1000 pairs, forward time {seconds:.3f}s (< 1s)")


# 2. gradient vs central differences


def _loss_extended(weights, biases, feats, rep_y, targets):
    """Mini-batch loss in extended precision, independent of the package code."""
    a = np.einsum("qnf,nf->qn", feats, weights) + biases
    e = np.exp(a - a.max(axis=1, keepdims=True))
    yhat = (e @ rep_y) / e.sum(axis=1)
    return np.mean((yhat - targets) ** 2) / 2


def test_criterion_2_gradient_matches_central_differences():
    ld = np.longdouble
    h = ld(1e-6)
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst, coords = 0.0, 0
    for _ in range(100):
        model = random_model(rng, int(rng.integers(2, 11)))
        queries = random_contracts(rng, int(rng.integers(1, 21)))
        targets = -rng.uniform(1e3, 1e5, len(queries))
        gw, gb = gradient(model, list(zip(queries, targets)))
        analytic = np.concatenate([gw.ravel(), gb])
        feats = model.features(queries).astype(ld)
        rep_y = model.normalised_deltas.astype(ld)
        tgt = (targets / model.scale).astype(ld)
        theta = model.parameters().astype(ld)
        k, shape = model.weights.size, model.weights.shape

        def loss(p):
            return _loss_extended(p[:k].reshape(shape), p[k:], feats, rep_y, tgt)

        numeric = np.empty(len(theta))
        for j in range(len(theta)):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            numeric[j] = float((loss(up) - loss(dn)) / (2 * h))
        scale = np.maximum(np.abs(analytic), np.abs(numeric))
        nz = scale > 0
        assert np.array_equal(analytic[~nz], numeric[~nz])
        coords += int(nz.sum())
        worst = max(worst, float(np.max(np.abs(analytic - numeric)[nz] / scale[nz])))
    seconds = time.perf_counter() - t0
    record(2, worst < 1e-5 and seconds < 10.0,
           f"max per-coordinate rel error {worst:.2e} (tol 1e-5) over {coords} coordinates, {seconds:.2f}s (< 10s)")


# 3. momentum schedule


def test_criterion_3_momentum_schedule():
    exact = [momentum_coeff(t, 0.99) for t in (1, 50, 150)]
    t = np.arange(1, 1_000_001)
    formula = np.minimum(1.0 - 2.0 ** (-1.0 - np.log2(t // 50 + 1)), 0.99)
    ours = np.array([momentum_coeff(int(x), 0.99) for x in t])
    mismatches = int(np.sum(ours != formula))
    ok = exact == [0.5, 0.75, 0.875] and mismatches == 0
    record(3, ok, f"mu(1, 50, 150) = {exact}; {mismatches} mismatches against the formula for t <= 1e6")


# 4. MC put oracle


def test_criterion_4_mc_put_oracle():
    t0 = time.perf_counter()
    contract = make_contract(rider=Rider.GMDB, gender=Gender.MALE, av=100.0, guarantee=105.0, maturity=1)
    certain_death = MortalityTable.constant(1.0)
    runs = []
    for seed in (17, 18):
        cfg = McConfig(scenario_count=10_000, seed=seed)
        runs.append((cfg, compute_delta(contract, certain_death, cfg)))
    seconds = time.perf_counter() - t0
    cfg = runs[0][0]
    price, n_d1 = bs_put(100.0, 105.0, cfg.risk_free_rate, cfg.volatility, 1.0)
    bs_delta = 100.0 * n_d1  # per unit relative move of the account value
    details, ok = [], True
    for _, r in runs:
        zp = (r.liability - price) / r.liability_se
        zd = (r.delta - bs_delta) / r.standard_error
        ok &= abs(zp) < 3 and abs(zd) < 3
        details.append(f"price z {zp:+.2f}, delta z {zd:+.2f}")
    d1, d2 = runs[0][1].delta, runs[1][1].delta
    spread = abs(d1 - d2) / abs(0.5 * (d1 + d2))
    ok &= spread <= 0.05 and seconds < 30.0
    record(4, ok, f"{'; '.join(details)}; seed spread {spread:.2%} (<= 5%); {seconds:.2f}s (< 30s)")


# 5. desk-scale comparison


def _comparison_rows(run_dir):
    with open(run_dir / "comparison.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_criterion_5_desk_scale_comparison(desk_runs):
    rows = _comparison_rows(desk_runs[0])
    nn = [float(r["rel_error"]) for r in rows if r["method"] == "NN"]
    idw = [float(r["rel_error"]) for r in rows if r["method"] == "IDW(p=1)"]
    nn_abs, idw_abs = np.mean(np.abs(nn)), np.mean(np.abs(idw))
    seconds = DESK_SECONDS[0]
    ok = (
        len(nn) == 3
        and all(abs(e) <= 0.05 for e in nn)
        and nn_abs <= idw_abs
        and seconds < 15 * 60
    )
    record(5, ok, f"NN Err {', '.join(f'{e:+.2%}' for e in nn)} (each |Err| <= 5%); "
                  f"mean |Err| NN {nn_abs:.2%} vs IDW(p=1) {idw_abs:.2%}; compare run {seconds:.0f}s (< 900s)")


# 6. interpolation properties


def test_criterion_6_interpolation_properties():
    cfg = desk_scale()
    reps, deltas, _ = representative_set(cfg, gompertz_makeham_table(), 0)
    peak = np.abs(deltas).max()
    distance = KrigingDistance.from_space(cfg.input_space, cfg.gamma)
    rng = np.random.default_rng(606)
    queries = random_contracts(rng, 1000, id_offset=10**6)
    parts, ok = [], True

    for kind in VariogramKind:
        model = replace(fit_variogram(reps, deltas, kind, distance), nugget=0.0)
        ok_kind = OrdinaryKriging(model, distance).fit(reps, deltas)
        err = np.abs(ok_kind.predict(reps) - deltas).max() / peak
        wsum = np.abs(ok_kind.weights(queries).sum(axis=1) - 1.0).max()
        ok &= err <= 1e-6 and wsum <= 1e-10
        parts.append(f"kriging {kind.value} reproduction {err:.1e}, |sum w - 1| {wsum:.1e}")

    rbf = GaussianRbf(1.0, distance).fit(reps, deltas)
    err = np.abs(rbf.predict(reps) - deltas).max() / peak
    ok &= err <= 1e-6
    parts.append(f"RBF reproduction {err:.1e}")

    portfolio = generate_input_portfolio(cfg.input_space, 2000, 7)
    idw_distance = IdwDistance(max_age(portfolio), cfg.gamma)
    near = distinct_nearest_queries(rng, reps, idw_distance, 1000)
    est = IdwInterpolator(100.0, idw_distance).fit(reps, deltas).predict(near)
    nearest = deltas[np.argmin(idw_distance.matrix(near, reps), axis=1)]
    err = np.abs(est - nearest).max() / peak
    ok &= err <= 1e-6
    parts.append(f"IDW p=100 vs nearest on 1000 queries {err:.1e}")
    record(6, ok, "; ".join(parts) + " (tolerances 1e-6 relative to max |delta|, 1e-10, 1e-6)")


# 7. stopping machinery


def test_criterion_7_stopping_on_noisy_u_shape():
    interval, window = 50, 4
    stamps = interval * np.arange(1, 31)
    t_min = 0.4 * stamps[-1]
    t0 = time.perf_counter()
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        values = 1.0 + ((stamps - t_min) / t_min) ** 2 + rng.uniform(-0.1, 0.1, len(stamps))
        fired = next(
            (stamps[m - 1] for m in range(2, len(stamps) + 1) if detect_stopping(stamps[:m], values[:m])[0]),
            None,
        )
        hits += fired is not None and t_min < fired <= t_min + window * interval
    seconds = time.perf_counter() - t0
    record(7, hits >= 95 and seconds < 5.0,
           f"fired in (t_min, t_min + 200] for {hits}/100 seeds (>= 95), {seconds:.2f}s (< 5s)")


# 8. scaling in N


def test_criterion_8_estimation_time_linear_in_n():
    rng = np.random.default_rng(808)
    reps = sample_from_grid(REPRESENTATIVE_GRID, 100, 3)
    model = Metamodel.zeros(reps, -rng.uniform(1e3, 1e5, 100), FC)
    model.weights = rng.normal(0.0, 1.0, model.weights.shape)
    big = generate_input_portfolio(INPUT_SPACE, 10_000, 9)
    small = big[:1000]

    def best(contracts, repeats=5):
        out = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            model.total(contracts)
            out = min(out, time.perf_counter() - t0)
        return out

    best(small, 1)  # warm-up
    t_big, t_small = best(big), best(small)
    ratio = t_big / t_small
    record(8, 5.0 <= ratio <= 20.0,
           f"N=1e4 {t_big * 1e3:.1f}ms vs N=1e3 {t_small * 1e3:.1f}ms at n=100, ratio {ratio:.2f} (in [5, 20])")


# 9. determinism


def test_criterion_9_compare_is_byte_identical(desk_runs):
    a, b = desk_runs
    names = sorted(p.name for p in a.glob("*.csv") if not p.name.endswith("_timing.csv"))
    other = sorted(p.name for p in b.glob("*.csv") if not p.name.endswith("_timing.csv"))
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    ok = names == other and "comparison.csv" in names and not mismatch and not errors
    record(9, ok, f"{len(names) - len(mismatch) - len(errors)}/{len(names)} CSV reports byte-identical "
                  f"(timing CSVs and manifest excluded){'; differ: ' + ', '.join(mismatch) if mismatch else ''}")
