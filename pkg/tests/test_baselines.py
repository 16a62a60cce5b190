import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import distinct_nearest_queries, make_contract, random_contracts
from vagreeks.baselines import (
    GaussianRbf,
    IdwDistance,
    IdwInterpolator,
    KrigingDistance,
    KrigingError,
    OrdinaryKriging,
    VariogramKind,
    VariogramModel,
    empirical_semivariogram,
    fit_semivariogram,
    fit_variogram,
    idw_estimate,
    kriging_estimate,
    portfolio_estimate,
    rbf_estimate,
)
from vagreeks.portfolio import INPUT_SPACE, Gender, Rider

KD = KrigingDistance.from_space(INPUT_SPACE)
SPH = VariogramModel(VariogramKind.SPHERICAL, 0.0, 1.0, 1.5)


def _reps_and_deltas(seed: int, n: int):
    rng = np.random.default_rng(seed)
    reps = random_contracts(rng, n)
    return reps, rng.normal(0.0, 1e4, n)


# distances


def test_kriging_distance_identity_and_single_category():
    x = make_contract()
    assert KD(x, x) == 0.0
    assert KD(x, replace(x, gender=Gender.FEMALE)) == 1.0
    assert KrigingDistance(KD.ranges, gamma=4.0)(x, replace(x, gender=Gender.FEMALE)) == 2.0


def test_kriging_distance_hand_pair():
    x = make_contract(av=1e5, age=30)
    y = replace(x, account_value=1e5 + 0.5 * KD.ranges["account_value"], age=30 + 0.5 * KD.ranges["age"])
    assert KD(x, y) == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert KD.matrix([x], [y])[0, 0] == pytest.approx(math.sqrt(0.5), rel=1e-12)


def _idw_by_hand(x, y, gamma, max_age):
    ex = 0.0 if x.gd_value == 0 else math.exp(-x.account_value / x.gd_value)
    ey = 0.0 if y.gd_value == 0 else math.exp(-y.account_value / y.gd_value)
    total = gamma * ((x.gender != y.gender) + (x.rider != y.rider))
    total += (ex * x.maturity - ey * y.maturity) ** 2
    total += (ex * x.withdrawal_rate - ey * y.withdrawal_rate) ** 2
    total += math.exp((x.age + y.age) / 2 - max_age) * (ex * x.age - ey * y.age) ** 2
    return math.sqrt(total)


def test_idw_distance_hand_pair_and_symmetry(rng):
    d = IdwDistance(max_age=60.0)
    x = make_contract(age=55, av=1e5, guarantee=2e5, maturity=20, rate=0.06)
    y = make_contract(rider=Rider.GMDB, gender=Gender.FEMALE, age=58, av=1.5e5, guarantee=3e5, maturity=12, rate=0.04)
    assert d(x, y) == pytest.approx(_idw_by_hand(x, y, 1.0, 60.0), rel=1e-12)
    assert d(x, x) == 0.0
    pairs = random_contracts(rng, 200)
    a, b = pairs[:100], pairs[100:]
    m = d.matrix(a, b)
    np.testing.assert_array_equal(m, d.matrix(b, a).T)
    for i in range(0, 100, 9):
        assert m[i, i] == pytest.approx(_idw_by_hand(a[i], b[i], 1.0, 60.0), rel=1e-12)


# IDW


def test_idw_exact_hit_and_equidistant_mean():
    reps, deltas = _reps_and_deltas(1, 10)
    assert idw_estimate(reps, deltas, reps[3], power=1.0) == deltas[3]
    q = make_contract(cid=3, gender=Gender.FEMALE)
    a = replace(q, id=1, gender=Gender.MALE)
    b = replace(q, id=2, rider=Rider.GMDB, gw_value=0.0)
    d = IdwDistance(max_age=60.0)
    assert d(q, a) == d(q, b) == 1.0
    assert idw_estimate([a, b], [1.0, 3.0], q, power=1.0, distance=d) == pytest.approx(2.0)


def test_idw_large_power_is_nearest_neighbour(rng):
    reps, deltas = _reps_and_deltas(2, 50)
    dist = IdwDistance(max_age=60.0)
    queries = distinct_nearest_queries(rng, reps, dist, 1000)
    est = IdwInterpolator(100.0, dist).fit(reps, deltas).predict(queries)
    nearest = deltas[np.argmin(dist.matrix(queries, reps), axis=1)]
    np.testing.assert_allclose(est, nearest, rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), power=st.floats(0.5, 50.0))
def test_idw_estimates_are_convex_combinations(seed, power):
    reps, deltas = _reps_and_deltas(seed, 8)
    queries = random_contracts(np.random.default_rng(seed + 1), 20, id_offset=50)
    est = IdwInterpolator(power, IdwDistance(60.0)).fit(reps, deltas).predict(queries)
    assert np.all(est >= deltas.min() - 1e-9) and np.all(est <= deltas.max() + 1e-9)


# variograms


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_empirical_semivariogram_nonnegative(seed):
    reps, deltas = _reps_and_deltas(seed, 15)
    lags, sv, counts = empirical_semivariogram(KD.matrix(reps, reps), deltas)
    assert np.all(sv >= 0) and np.all(counts > 0) and len(lags) == len(sv)


def test_constant_deltas_give_flat_variogram():
    reps, _ = _reps_and_deltas(3, 30)
    model = fit_variogram(reps, np.full(30, 7.0), VariogramKind.SPHERICAL, KD)
    assert model.sill - model.nugget == pytest.approx(0.0, abs=1e-9)


def test_variogram_round_trip_from_gaussian_field():
    truth = VariogramModel(VariogramKind.SPHERICAL, nugget=0.1, sill=2.0, range=0.8)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 1.0, (300, 2))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    cov = truth.sill - truth(d)  # the nugget sits on the diagonal only
    chol = np.linalg.cholesky(cov + 1e-10 * np.eye(len(pts)))
    realizations = 300
    total = 0.0
    for _ in range(realizations):
        lags, sv, _ = empirical_semivariogram(d, chol @ rng.standard_normal(len(pts)))
        total = total + sv
    fitted = fit_semivariogram(lags, total / realizations, VariogramKind.SPHERICAL)
    assert fitted.nugget == pytest.approx(0.1, rel=0.15)
    assert fitted.sill == pytest.approx(2.0, rel=0.15)
    assert fitted.range == pytest.approx(0.8, rel=0.15)


def test_variogram_needs_enough_points():
    reps, deltas = _reps_and_deltas(4, 5)
    with pytest.raises(KrigingError):
        fit_variogram(reps, deltas, VariogramKind.SPHERICAL, KD)


def test_variogram_shapes():
    exp = VariogramModel(VariogramKind.EXPONENTIAL, 0.0, 1.0, 2.0)
    assert exp(0.0) == 0.0 and exp(2.0) == pytest.approx(1 - math.exp(-3))
    assert SPH(1.5) == SPH(10.0) == 1.0
    assert SPH(0.75) == pytest.approx(1.5 * 0.5 - 0.5 * 0.125)


# kriging


def test_kriging_interpolates_and_weights_sum_to_one(rng):
    reps, deltas = _reps_and_deltas(5, 40)
    ok = OrdinaryKriging(SPH, KD).fit(reps, deltas)
    np.testing.assert_allclose(ok.predict(reps), deltas, rtol=0, atol=1e-8 * np.abs(deltas).max())
    w = ok.weights(random_contracts(rng, 200, id_offset=1000))
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-10)


def test_kriging_weights_match_unscaled_bordered_solve(rng):
    reps, deltas = _reps_and_deltas(6, 25)
    q = random_contracts(rng, 3, id_offset=1000)
    n = len(reps)
    a = np.ones((n + 1, n + 1))
    a[:n, :n] = SPH(KD.matrix(reps, reps))
    a[n, n] = 0.0
    rhs = np.vstack([SPH(KD.matrix(reps, q)), np.ones((1, 3))])
    oracle = np.linalg.solve(a, rhs)[:n].T
    np.testing.assert_allclose(OrdinaryKriging(SPH, KD).fit(reps, deltas).weights(q), oracle, atol=1e-9)


def test_kriging_constant_field_is_reproduced(rng):
    reps, _ = _reps_and_deltas(7, 30)
    queries = random_contracts(rng, 50, id_offset=1000)
    est = [kriging_estimate(reps, np.full(30, -3.5), q, SPH, KD) for q in queries[:5]]
    np.testing.assert_allclose(est, -3.5, atol=1e-8)


def test_kriging_aggregate_over_reps_is_their_sum():
    reps, deltas = _reps_and_deltas(8, 50)
    ok = OrdinaryKriging(SPH, KD).fit(reps, deltas)
    assert ok.total(reps) == pytest.approx(deltas.sum(), rel=1e-6)


# RBF


def test_rbf_interpolates_representatives():
    reps, deltas = _reps_and_deltas(9, 30)
    rbf = GaussianRbf(1.0, KD).fit(reps, deltas)
    assert not rbf.jittered
    np.testing.assert_allclose(rbf.predict(reps), deltas, rtol=1e-6)


def test_rbf_single_representative_closed_form():
    rep = make_contract()
    q = replace(rep, id=1, age=55)
    assert rbf_estimate([rep], [5.0], rep, 1.0, KD) == 5.0
    assert rbf_estimate([rep], [5.0], q, 2.0, KD) == pytest.approx(5.0 * math.exp(-(2.0 * KD(rep, q)) ** 2))


def test_rbf_matches_dense_solve(rng):
    reps, deltas = _reps_and_deltas(10, 20)
    q = random_contracts(rng, 5, id_offset=1000)
    phi = np.exp(-KD.matrix(reps, reps) ** 2)
    coef = np.linalg.solve(phi, deltas)
    oracle = np.exp(-KD.matrix(q, reps) ** 2) @ coef
    np.testing.assert_allclose(GaussianRbf(1.0, KD).fit(reps, deltas).predict(q), oracle, rtol=1e-8)


def test_rbf_rejects_duplicate_representatives():
    rep = make_contract()
    with pytest.raises(ValueError, match="duplicate"):
        GaussianRbf(1.0, KD).fit([rep, replace(rep, id=9)], [1.0, 2.0])


# aggregation


@pytest.mark.parametrize("make", [
    lambda: IdwInterpolator(1.0, IdwDistance(60.0)),
    lambda: GaussianRbf(1.0, KD),
])
def test_portfolio_estimate_modes(make, rng):
    reps, deltas = _reps_and_deltas(11, 20)
    portfolio = random_contracts(rng, 137, id_offset=1000)
    agg = portfolio_estimate(make(), reps, deltas, portfolio)
    per = portfolio_estimate(make(), reps, deltas, portfolio, per_policy=True)
    assert agg.per_policy is None and len(per.per_policy) == 137
    assert per.total == pytest.approx(agg.total, rel=1e-10)
    assert per.seconds >= 0
