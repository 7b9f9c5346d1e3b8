import numpy as np
import pytest

from lafte import (
    DegenerateTestError,
    EstimationError,
    RankDeficientError,
    RelevanceError,
    derive,
    fit_stacked,
    linear_combination,
    ols,
    stack,
    tsls,
    wald_joint,
)

from conftest import fix8_table, random_table

# ---------------------------------------------------------------------------
# independent matrix-algebra oracle (no calls into lafte.regression)


def oracle_stacked_iv(equations, labels):
    """Stacked just-identified IV with a cluster sandwich, by explicit algebra.

    equations: list of (y, X, W); labels: one dependence label per original
    row, reused across the stacked copies.
    """
    n = len(equations[0][0])
    m = len(equations)
    widths = [eq[1].shape[1] for eq in equations]
    total = sum(widths)
    ys = np.concatenate([np.asarray(eq[0], dtype=float) for eq in equations])
    Xs = np.zeros((m * n, total))
    Ws = np.zeros((m * n, total))
    col = 0
    for e, (yv, X, W) in enumerate(equations):
        Xs[e * n:(e + 1) * n, col:col + X.shape[1]] = X
        Ws[e * n:(e + 1) * n, col:col + W.shape[1]] = W
        col += X.shape[1]
    lab = np.concatenate([np.asarray(labels)] * m)

    b = np.linalg.solve(Ws.T @ Xs, Ws.T @ ys)
    e = ys - Xs @ b
    A = np.linalg.inv(Ws.T @ Xs)
    S = Ws * e[:, None]
    uniq = list(dict.fromkeys(lab.tolist()))
    G, N, K = len(uniq), m * n, total
    meat = np.zeros((total, total))
    for g in uniq:
        sg = S[lab == g].sum(axis=0)
        meat += np.outer(sg, sg)
    meat *= (G / (G - 1.0)) * ((N - 1.0) / (N - K))
    V = A @ meat @ A.T
    return b, V


def fix8_theorem1_stack_oracle():
    t = fix8_table()
    d = derive(t)
    ones = np.ones(t.n)
    z = t.z.astype(float)
    eq1 = (d.dand_y, np.column_stack([ones, d.d_and]), np.column_stack([ones, z]))
    eq2 = (d.untreated_y, np.column_stack([ones, t.d1]), np.column_stack([ones, z]))
    b, V = oracle_stacked_iv([eq1, eq2], np.arange(t.n))
    upper = b[1] + b[3]
    se = np.sqrt(V[1, 1] + V[3, 3] + 2 * V[1, 3])
    return b, upper, se


# Frozen from the pre-build oracle run on the fixture.
FIX8_STACKED_UPPER_SE = 0.3636964837266539


# ---------------------------------------------------------------------------
# ols


def test_ols_fix8_outcome():
    t = fix8_table()
    x = np.column_stack([np.ones(t.n), t.z])
    fit = ols(t.y, x)
    assert fit.coefficients[1] == pytest.approx(1.0, rel=1e-12)
    assert fit.covariance_kind == "hc1"


def test_ols_fix8_g_or():
    t = fix8_table()
    d = derive(t)
    x = np.column_stack([np.ones(t.n), t.z])
    fit = ols(d.g_or, x)
    assert fit.coefficients[1] == pytest.approx(0.25, rel=1e-12)


def test_intercept_only_matches_sd_over_sqrt_n():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(31) * 3 + 2
    fit = ols(y, np.ones((31, 1)))
    assert fit.coefficients[0] == pytest.approx(y.mean(), rel=1e-12)
    assert fit.se(0) == pytest.approx(y.std(ddof=1) / np.sqrt(31), rel=1e-12)


def test_binary_slope_is_difference_of_means():
    rng = np.random.default_rng(1)
    for _ in range(5):
        t = random_table(rng, n=100)
        x = np.column_stack([np.ones(t.n), t.z])
        fit = ols(t.y, x)
        diff = t.y[t.z == 1].mean() - t.y[t.z == 0].mean()
        assert abs(fit.coefficients[1] - diff) <= 1e-12 * max(1, abs(diff))


def test_rank_deficiency_names_column():
    rng = np.random.default_rng(2)
    x1 = rng.standard_normal(20)
    x = np.column_stack([np.ones(20), x1, 2 * x1])
    # either member of the collinear pair may be named, never the intercept
    with pytest.raises(RankDeficientError, match="'(x1|dup)'"):
        ols(rng.standard_normal(20), x, names=("const", "x1", "dup"))


def test_constant_regressand_flagged():
    t = fix8_table()
    x = np.column_stack([np.ones(t.n), t.z])
    fit = ols(np.full(t.n, 5.0), x)
    assert fit.response_constant
    assert fit.coefficients[1] == 0.0
    assert fit.se(1) is None
    assert np.all(fit.vcov == 0.0)


def test_cluster_singleton_equals_hc1():
    rng = np.random.default_rng(3)
    t = random_table(rng, n=60)
    x = np.column_stack([np.ones(t.n), t.z, t.d1])
    plain = ols(t.y, x)
    clustered = ols(t.y, x, cluster=np.arange(t.n))
    # the small-sample factors coincide exactly when G == N
    n, k = t.n, 3
    ratio = (n / (n - 1)) * ((n - 1) / (n - k)) / (n / (n - k))
    assert ratio == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_allclose(clustered.vcov, plain.vcov * ratio, rtol=1e-10)
    assert clustered.covariance_kind == "cluster"
    assert clustered.cluster_count == t.n


def test_cluster_permutation_invariance():
    rng = np.random.default_rng(4)
    t = random_table(rng, n=90, cluster_size=5)
    x = np.column_stack([np.ones(t.n), t.z, t.controls]) if t.controls.size else \
        np.column_stack([np.ones(t.n), t.z])
    fit = ols(t.y, x, cluster=t.cluster)
    perm = rng.permutation(t.n)
    fit_p = ols(t.y[perm], x[perm], cluster=t.cluster[perm])
    np.testing.assert_allclose(fit_p.coefficients, fit.coefficients, rtol=1e-10)
    np.testing.assert_allclose(fit_p.vcov, fit.vcov, rtol=1e-10, atol=1e-14)


def test_vcov_psd_and_symmetric():
    rng = np.random.default_rng(5)
    for cluster_size in (0, 7):
        t = random_table(rng, n=140, cluster_size=cluster_size)
        x = np.column_stack([np.ones(t.n), t.z, t.d1, t.d2])
        fit = ols(t.y, x, cluster=t.cluster)
        assert np.allclose(fit.vcov, fit.vcov.T, rtol=1e-10)
        eig = np.linalg.eigvalsh(fit.vcov)
        assert eig.min() >= -1e-8 * eig.max()
        assert np.all(np.diag(fit.vcov) >= 0)


def test_classical_covariance_option():
    rng = np.random.default_rng(6)
    y = rng.standard_normal(40)
    x = np.column_stack([np.ones(40), rng.standard_normal(40)])
    fit = ols(y, x, covariance="classical")
    assert fit.covariance_kind == "classical"
    resid = y - x @ fit.coefficients
    sigma2 = resid @ resid / (40 - 2)
    expected = sigma2 * np.linalg.inv(x.T @ x)
    np.testing.assert_allclose(fit.vcov, expected, rtol=1e-10)


def test_too_few_rows():
    with pytest.raises(EstimationError):
        ols(np.array([1.0, 2.0]), np.column_stack([np.ones(2), [0.0, 1.0]]))


# ---------------------------------------------------------------------------
# tsls


def test_tsls_fix8_values():
    t = fix8_table()
    d = derive(t)
    z = t.z.astype(float)
    assert tsls(t.y, t.d1, z).coefficients[1] == pytest.approx(4 / 3, rel=1e-12)
    assert tsls(t.y, d.d_sum, z).coefficients[1] == pytest.approx(1.0, rel=1e-12)
    assert tsls(t.y, t.d2, z).coefficients[1] == pytest.approx(4.0, rel=1e-12)


def test_tsls_equals_wald_ratio():
    rng = np.random.default_rng(7)
    for _ in range(10):
        t = random_table(rng, n=150)
        fit = tsls(t.y, t.d1, t.z.astype(float))
        num = t.y[t.z == 1].mean() - t.y[t.z == 0].mean()
        den = t.d1[t.z == 1].mean() - t.d1[t.z == 0].mean()
        assert fit.coefficients[1] == pytest.approx(num / den, rel=1e-10)


def test_tsls_with_controls_changes_estimate():
    rng = np.random.default_rng(8)
    t = random_table(rng, n=300)
    x = rng.standard_normal((t.n, 2))
    fit = tsls(t.y, t.d1, t.z.astype(float), controls=x)
    assert fit.k == 4
    assert np.isfinite(fit.se(1))


def test_tsls_relevance_error_carries_first_stage():
    rng = np.random.default_rng(9)
    n = 80
    # d varies but has the same mean in both arms: exactly zero first stage
    z = np.repeat([0, 1], n // 2)
    d = np.tile([0.0, 1.0], n // 2)
    with pytest.raises(RelevanceError) as info:
        tsls(rng.standard_normal(n), d, z.astype(float))
    assert abs(info.value.first_stage) <= 1e-10


# ---------------------------------------------------------------------------
# stacking


def test_stack_matches_separate_fits(fix8=None):
    t = fix8_table()
    d = derive(t)
    ones = np.ones(t.n)
    z = t.z.astype(float)
    eq1 = (d.dand_y, np.column_stack([ones, d.d_and]), np.column_stack([ones, z]))
    eq2 = (d.untreated_y, np.column_stack([ones, t.d1]), np.column_stack([ones, z]))
    system = stack([eq1, eq2])
    fit = fit_stacked(system)
    assert fit.coefficients[system.coef_index(0, 1)] == pytest.approx(3.0, rel=1e-12)
    assert fit.coefficients[system.coef_index(1, 1)] == pytest.approx(-1 / 3, rel=1e-12)

    weights = np.zeros(fit.k)
    weights[system.coef_index(0, 1)] = 1.0
    weights[system.coef_index(1, 1)] = 1.0
    value, se = linear_combination(fit, weights)
    assert value == pytest.approx(8 / 3, rel=1e-12)
    assert np.isfinite(se) and se > 0


def test_stacked_se_matches_matrix_oracle():
    _, upper, se = fix8_theorem1_stack_oracle()
    assert upper == pytest.approx(8 / 3, rel=1e-12)
    assert se == pytest.approx(FIX8_STACKED_UPPER_SE, rel=1e-12)

    t = fix8_table()
    d = derive(t)
    ones = np.ones(t.n)
    z = t.z.astype(float)
    system = stack([
        (d.dand_y, np.column_stack([ones, d.d_and]), np.column_stack([ones, z])),
        (d.untreated_y, np.column_stack([ones, t.d1]), np.column_stack([ones, z])),
    ])
    fit = fit_stacked(system)
    weights = np.zeros(fit.k)
    weights[1] = weights[3] = 1.0
    _, got = linear_combination(fit, weights)
    assert got == pytest.approx(se, rel=1e-12)


def test_stack_single_equation_equals_ols():
    rng = np.random.default_rng(10)
    t = random_table(rng, n=70)
    x = np.column_stack([np.ones(t.n), t.z])
    single = fit_stacked(stack([(t.y, x)]))
    plain = ols(t.y, x)
    np.testing.assert_allclose(single.coefficients, plain.coefficients, rtol=1e-12)
    np.testing.assert_allclose(single.vcov, plain.vcov, rtol=1e-10)


def test_stack_order_invariance():
    rng = np.random.default_rng(11)
    t = random_table(rng, n=120, cluster_size=6)
    d = derive(t)
    ones = np.ones(t.n)
    z = t.z.astype(float)
    eq1 = (d.dand_y, np.column_stack([ones, d.d_and]), np.column_stack([ones, z]))
    eq2 = (d.untreated_y, np.column_stack([ones, t.d1]), np.column_stack([ones, z]))

    def upper_se(eqs, first, second):
        system = stack(eqs, cluster=t.cluster)
        fit = fit_stacked(system)
        w = np.zeros(fit.k)
        w[system.coef_index(first, 1)] = 1.0
        w[system.coef_index(second, 1)] = 1.0
        return linear_combination(fit, w)

    v1, s1 = upper_se([eq1, eq2], 0, 1)
    v2, s2 = upper_se([eq2, eq1], 1, 0)
    assert v1 == pytest.approx(v2, rel=1e-12)
    assert s1 == pytest.approx(s2, rel=1e-10)


def test_stack_mismatched_rows():
    with pytest.raises(EstimationError, match="mismatch"):
        stack([(np.ones(4), np.ones((4, 1))), (np.ones(5), np.ones((5, 1)))])


def test_stacked_cluster_duplication():
    # with clusters given, the duplicated labels keep both copies of an
    # observation in one dependence unit
    rng = np.random.default_rng(12)
    t = random_table(rng, n=40, cluster_size=4)
    x = np.column_stack([np.ones(t.n), t.z])
    system = stack([(t.y, x), (t.d1.astype(float), x)], cluster=t.cluster)
    assert system.cluster_given
    fit = fit_stacked(system)
    assert fit.cluster_count == 10


# ---------------------------------------------------------------------------
# wald tests


def test_wald_zero_subvector():
    fit = ols(np.random.default_rng(13).standard_normal(30), np.ones((30, 1)))
    shifted = wald_joint(fit, [0], null=[fit.coefficients[0]])
    assert shifted.statistic == pytest.approx(0.0, abs=1e-20)
    assert shifted.p_value == pytest.approx(1.0)


def test_wald_scalar_is_t_squared():
    rng = np.random.default_rng(14)
    t = random_table(rng, n=100)
    x = np.column_stack([np.ones(t.n), t.z])
    fit = ols(t.y, x)
    res = wald_joint(fit, [1])
    tratio = fit.coefficients[1] / fit.se(1)
    assert res.statistic == pytest.approx(tratio ** 2, rel=1e-10)
    assert res.dof == 1
    assert res.kind == "wald-two-sided"


def test_wald_singular_submatrix():
    t = fix8_table()
    x = np.column_stack([np.ones(t.n), t.z])
    fit = ols(np.zeros(t.n), x)  # constant response, zero vcov
    with pytest.raises(DegenerateTestError, match="degenerate joint test"):
        wald_joint(fit, [1])


def test_fix8_joint_contrast_test_matches_oracle():
    # joint 2-df test of both plain mover contrasts, against explicit algebra
    t = fix8_table()
    d = derive(t)
    x = np.column_stack([np.ones(t.n), t.z])
    system = stack([(d.g_or, x), (d.g_and, x)])
    fit = fit_stacked(system)
    res = wald_joint(fit, [system.coef_index(0, 1), system.coef_index(1, 1)])
    assert res.dof == 2
    assert np.isfinite(res.statistic)

    b, V = oracle_stacked_iv([(d.g_or, x, x), (d.g_and, x, x)], np.arange(t.n))
    sub = b[[1, 3]]
    stat = sub @ np.linalg.solve(V[np.ix_([1, 3], [1, 3])], sub)
    assert res.statistic == pytest.approx(stat, rel=1e-10)
