"""Energy/charge/pairing functionals against closed forms and finite differences."""

import numpy as np
import pytest

from ymeps.basis import ball_context
from ymeps.forms import FormField, codifferential_eps, covariant_d_eps, domain_ball_rule
from ymeps.functionals import (
    EstimateReport,
    QuantityRow,
    _cdot,
    _codiff,
    _curv,
    _wsum,
    bump_one_form,
    charge,
    compute_point_metrics,
    fit_slope,
    grad_pairing,
    hessian_form,
    lemma36_report,
    lemma57_report,
    lemma58_report,
    sweep_points,
    ym_eps,
)
from ymeps.instanton import ParamQ, extended_connection, glued_connection
from ymeps.liealg import AlgElement, exp_map

RNG_SEED = 77023


def _generic_q(eps=2.0 ** -6):
    return ParamQ.default(eps, p=[0.1, -0.08, 0.05, 0.12],
                          g=exp_map(AlgElement(0.3, -0.4, 0.2)))


# ---------------------------------------------------------------------------
# slope fitting


def test_fit_slope_exact_power():
    eps = [2.0 ** -k for k in range(4, 10)]
    fit = fit_slope([(e, 3.7 * e ** -1.5) for e in eps])
    assert abs(fit.slope + 1.5) < 1e-12
    assert fit.residual < 1e-12
    assert abs(fit.intercept - np.log(3.7)) < 1e-10
    assert fit.npoints == 6


def test_fit_slope_validation():
    with pytest.raises(ValueError, match="at least 3"):
        fit_slope([(0.1, 1.0), (0.05, 2.0)])
    with pytest.raises(ValueError, match="positive"):
        fit_slope([(0.1, 1.0), (0.05, -2.0), (0.025, 4.0)])
    with pytest.raises(ValueError, match="positive"):
        fit_slope([(0.1, 1.0), (-0.05, 2.0), (0.025, 4.0)])


# ---------------------------------------------------------------------------
# energy and charge


def test_energy_extension_closed_form():
    q = _generic_q()
    val = q.eps ** 2 * ym_eps(extended_connection(q), q.eps, domain="r4")
    assert abs(val - 8.0 * np.pi ** 2) < 1e-3 * 8.0 * np.pi ** 2


def test_energy_flat_is_zero():
    assert ym_eps(None, 2.0 ** -6, domain="r4") == 0.0


def test_energy_constant_group_invariance():
    q1 = ParamQ.default(2.0 ** -5, p=[0.05, 0.0, -0.1, 0.02])
    q2 = ParamQ(p=q1.p, g=exp_map(AlgElement(-0.7, 0.25, 1.1)), lam=q1.lam,
                eps=q1.eps)
    e1 = ym_eps(extended_connection(q1), q1.eps, domain="r4")
    e2 = ym_eps(extended_connection(q2), q2.eps, domain="r4")
    assert abs(e1 - e2) < 1e-10 * abs(e1)


def test_charge_extension_is_plus_one():
    q = _generic_q()
    assert abs(charge(extended_connection(q), q.eps) - 1.0) < 1e-3


def test_charge_flat_is_zero():
    assert charge(None, 2.0 ** -6) == 0.0


def test_charge_negated_group_element():
    # -g acts by the same rotation, so the connection and charge are unchanged
    q = _generic_q(2.0 ** -5)
    gneg = q.g * exp_map(AlgElement(2.0 * np.pi, 0.0, 0.0))
    assert np.allclose(gneg.quaternion(), -q.g.quaternion(), atol=1e-14)
    qn = ParamQ(p=q.p, g=gneg, lam=q.lam, eps=q.eps)
    c1 = charge(extended_connection(q), q.eps)
    c2 = charge(extended_connection(qn), q.eps)
    assert c1 == pytest.approx(c2, rel=1e-13)


# ---------------------------------------------------------------------------
# gradient and Hessian pairings vs finite differences of the energy


def _energy_curve(A, a, eps, rule):
    """E(t) = ym(A + t a) evaluated through shared sampled arrays."""
    ctx = ball_context(A, eps, rule=rule)
    nfA = ctx.arrays(A)
    nfa = ctx.arrays(a)

    def E(t):
        F = _curv(nfA + t * nfa, eps)
        return _wsum(rule, 0.5 * _cdot(F, F))

    return E


def test_grad_pairing_matches_fd():
    q = _generic_q(2.0 ** -4)
    A = glued_connection(q)
    a = bump_one_form(q.p + np.array([0.25, 0.0, -0.1, 0.0]), 0.2,
                      [[0.4, -0.2, 0.0, 0.1],
                       [0.0, 0.3, -0.5, 0.0],
                       [0.2, 0.0, 0.0, -0.3]])
    rule = domain_ball_rule(q.p, q.lam)
    got = grad_pairing(A, a, q.eps, domain="ball", rule=rule)
    E = _energy_curve(A, a, q.eps, rule)
    h = 1e-3

    def central(step):
        return (E(step) - E(-step)) / (2.0 * step)

    fd = (4.0 * central(h / 2) - central(h)) / 3.0
    assert got == pytest.approx(fd, rel=1e-6)


def test_grad_pairing_linear():
    q = _generic_q(2.0 ** -4)
    A = glued_connection(q)
    rule = domain_ball_rule(q.p, q.lam)
    ctx = ball_context(A, q.eps, rule=rule)
    rng = np.random.default_rng(RNG_SEED)
    nfa = ctx.arrays(bump_one_form([0.2, 0.1, 0.0, -0.1], 0.3,
                                   rng.standard_normal((3, 4))))
    nfb = ctx.arrays(bump_one_form([-0.1, 0.0, 0.2, 0.1], 0.4,
                                   rng.standard_normal((3, 4))))
    combo = nfa * 2.0 + nfb * 3.0
    lhs = grad_pairing(A, combo, q.eps, domain="ball", rule=rule)
    rhs = (2.0 * grad_pairing(A, nfa, q.eps, domain="ball", rule=rule)
           + 3.0 * grad_pairing(A, nfb, q.eps, domain="ball", rule=rule))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_hessian_symmetric():
    q = _generic_q(2.0 ** -4)
    A = glued_connection(q)
    rng = np.random.default_rng(RNG_SEED + 1)
    a = bump_one_form([0.15, -0.05, 0.0, 0.1], 0.3, rng.standard_normal((3, 4)))
    b = bump_one_form([-0.2, 0.0, 0.1, 0.0], 0.35, rng.standard_normal((3, 4)))
    rule = domain_ball_rule(q.p, q.lam)
    hab = hessian_form(A, a, b, q.eps, rule=rule)
    hba = hessian_form(A, b, a, q.eps, rule=rule)
    assert hab == pytest.approx(hba, rel=1e-10)


def test_hessian_matches_second_difference():
    q = _generic_q(2.0 ** -4)
    A = glued_connection(q)
    rng = np.random.default_rng(RNG_SEED + 2)
    a = bump_one_form(q.p + np.array([0.2, 0.05, 0.0, -0.1]), 0.25,
                      rng.standard_normal((3, 4)))
    rule = domain_ball_rule(q.p, q.lam)
    got = hessian_form(A, a, a, q.eps, rule=rule)
    E = _energy_curve(A, a, q.eps, rule)
    E0 = E(0.0)
    h = 2e-3

    def second(step):
        return (E(step) - 2.0 * E0 + E(-step)) / step ** 2

    # E itself is ~1e4 while h^2 E'' ~ 1e-6, so the second difference keeps
    # only ~10 digits; a few 1e-6 relative is the floating-point floor here
    fd = (4.0 * second(h / 2) - second(h)) / 3.0
    assert got == pytest.approx(fd, rel=5e-4)


# ---------------------------------------------------------------------------
# codifferential arrays vs the standalone form operator


def test_codiff_arrays_match_form_operator():
    rng = np.random.default_rng(RNG_SEED + 3)
    Aff = bump_one_form([0.1, 0.0, -0.1, 0.2], 0.5, rng.standard_normal((3, 4)))
    alpha = bump_one_form([-0.05, 0.1, 0.0, 0.0], 0.45,
                          rng.standard_normal((3, 4)))
    eps = 0.37
    rule = domain_ball_rule(np.zeros(4), 0.25)
    ctx = ball_context(Aff, eps, rule=rule)
    nfA = ctx.arrays(Aff)
    nfa = ctx.arrays(alpha)
    got = _codiff(nfA.val, nfa, eps)
    want = codifferential_eps(Aff, alpha, eps).value(rule.nodes)
    assert np.allclose(got, want, atol=1e-11 * max(1.0, np.abs(want).max()))


def test_codifferential_adjoint_to_covariant_d():
    # int <d_A phi, alpha> = int <phi, delta_A alpha> for compact support
    rng = np.random.default_rng(RNG_SEED + 4)
    Aff = bump_one_form([0.0, 0.1, 0.0, -0.1], 0.5, rng.standard_normal((3, 4)))
    alpha = bump_one_form([0.1, 0.0, 0.05, 0.0], 0.4,
                          rng.standard_normal((3, 4)))
    coef0 = rng.standard_normal(3)

    def phi_value(X):
        u = 1.0 - np.sum((X - 0.05) ** 2, axis=1) / 0.45 ** 2
        prof = np.where(u > 0, u ** 3, 0.0)
        return coef0[None, :, None] * prof[:, None, None]

    def phi_jac(X):
        Y = X - 0.05
        u = 1.0 - np.sum(Y * Y, axis=1) / 0.45 ** 2
        dp = np.where(u > 0, 3 * u ** 2, 0.0) * (-2.0 / 0.45 ** 2)
        return coef0[None, :, None, None] * (dp[:, None] * Y)[:, None, None, :]

    phi = FormField(0, phi_value, phi_jac, domain="ball", name="phi")
    eps = 0.59
    rule = domain_ball_rule(np.zeros(4), 0.25)
    X = rule.nodes
    dphi = covariant_d_eps(Aff, phi, eps).value(X)
    delta = codifferential_eps(Aff, alpha, eps).value(X)
    lhs = _wsum(rule, _cdot(dphi, alpha.value(X)))
    rhs = _wsum(rule, _cdot(phi.value(X), delta))
    # equality holds after integration by parts, so the gap is pure quadrature
    # error (the bump support kink sits inside panels); well under 10x the
    # rule's tolerance
    scale = max(abs(lhs), abs(rhs))
    assert abs(lhs - rhs) < 1e-3 * scale


# ---------------------------------------------------------------------------
# sweep metrics and reports


def test_sweep_points_defaults():
    pts = sweep_points([2.0 ** -5, 2.0 ** -7], D=1.5)
    assert [p.eps for p in pts] == [2.0 ** -5, 2.0 ** -7]
    assert all(abs(p.lam - np.sqrt(1.5 * p.eps)) < 1e-15 for p in pts)
    assert all(np.all(p.p == 0) for p in pts)


@pytest.fixture(scope="module")
def small_sweep_metrics():
    eps_list = [2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7]
    return [compute_point_metrics(q, blocks=frozenset({"basis", "l36"}))
            for q in sweep_points(eps_list)]


def test_norm_scaling_report(small_sweep_metrics):
    rep = lemma57_report(small_sweep_metrics)
    assert rep.lemma == "5.7"
    for row in rep.rows:
        assert row.verdict in ("pass", "exact"), (row.quantity, row.note,
                                                  row.slope, row.values)
    assert rep.passed()


def test_ball_coefficient_report(small_sweep_metrics):
    rep = lemma58_report(small_sweep_metrics)
    for row in rep.rows:
        assert row.verdict == "pass", (row.quantity, row.note, row.values)


def test_basis_gap_report(small_sweep_metrics):
    rep = lemma36_report(small_sweep_metrics)
    for row in rep.rows:
        assert row.verdict == "pass", (row.quantity, row.note, row.values)


def test_five_term_expansion_single_point():
    q = ParamQ.default(2.0 ** -5)
    m = compute_point_metrics(q, blocks=frozenset({"l37"}), n_test=6,
                              seed=RNG_SEED)
    assert m["five_term_residual"] < 1e-8
    assert m["hess_dual_i1"] > 0.0
    assert m["codiff_dual_i1"] > 0.0
    assert np.isfinite(m["hess_dual_i5"])


def test_perp_derivative_paths_single_point():
    q = ParamQ.default(2.0 ** -5)
    m = compute_point_metrics(q, blocks=frozenset({"l310"}))
    assert m["l310_ortho_residual"] < 1e-8
    rel = abs(m["l310_fd_norm"] - m["l310_an_norm"]) / m["l310_an_norm"]
    assert rel < 0.05, (m["l310_fd_norm"], m["l310_an_norm"])
    total = np.hypot(m["l310_inner_norm"], m["l310_outer_norm"])
    assert total == pytest.approx(m["l310_fd_norm"], rel=1e-10)


def test_report_verdict_logic():
    rows = [QuantityRow("x", [0.1], [1.0], None, "identity", None, None,
                        "pass", ""),
            QuantityRow("y", [0.1], [1.0], None, "identity", None, None,
                        "fail", "")]
    rep = EstimateReport("5.7", rows)
    assert not rep.passed()
    assert [r.quantity for r in rep.failures()] == ["y"]
    assert EstimateReport("5.7", rows[:1]).passed()
