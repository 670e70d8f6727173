import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import mixed_games
from gameinverse import GameSpec, MixedProfile, simulate
from gameinverse.errors import (
    IndeterminateEquilibriumError,
    NoInteriorBalanceError,
    NoMixedEquilibriumError,
)
from gameinverse.game import impulses, transform
from gameinverse.solvers import (
    balance_gap,
    qre_residual,
    solve,
    solve_ase_2x2,
    solve_ibe_2x2,
    solve_ne_2x2,
    solve_pse_2x2,
    solve_qre,
)

CONCEPTS = ("ne", "qre", "ase", "pse", "ibe")


# -- independent oracles -----------------------------------------------------


def dec(v):
    """Exact rational of the decimal a float was written as."""
    return Fraction(repr(float(v)))


def ase_oracle(own, n, q):
    """Action-sampling right-hand side with exact tie decisions."""
    u = [[dec(v) for v in row] for row in own]
    total = 0.0
    for k in range(n + 1):
        gain = k * (u[0][0] - u[1][0])
        loss = (n - k) * (u[1][1] - u[0][1])
        alpha = 1.0 if gain > loss else 0.5 if gain == loss else 0.0
        total += alpha * math.comb(n, k) * q**k * (1 - q) ** (n - k)
    return total


def pse_oracle(own, n, q):
    u = [[dec(v) for v in row] for row in own]
    total = 0.0
    for k0 in range(n + 1):
        for k1 in range(n + 1):
            s0 = k0 * u[0][0] + (n - k0) * u[0][1]
            s1 = k1 * u[1][0] + (n - k1) * u[1][1]
            alpha = 1.0 if s0 > s1 else 0.5 if s0 == s1 else 0.0
            w0 = math.comb(n, k0) * q**k0 * (1 - q) ** (n - k0)
            w1 = math.comb(n, k1) * q**k1 * (1 - q) ** (n - k1)
            total += alpha * w0 * w1
    return total


def logit_oracle(own, lam, q):
    eu0 = q * own[0][0] + (1 - q) * own[0][1]
    eu1 = q * own[1][0] + (1 - q) * own[1][1]
    return 1.0 / (1.0 + math.exp(-lam * (eu0 - eu1)))


def swap_rows(g):
    return GameSpec(g.u_row[::-1], g.u_col[::-1], g.name)


# -- Nash --------------------------------------------------------------------


def test_ne_matching_pennies(pennies):
    p = solve_ne_2x2(pennies).profile
    assert (p.p_U, p.p_L) == (0.5, 0.5)


def test_ne_direct_formula():
    p = solve_ne_2x2(GameSpec([[3, 0], [0, 1]], [[0, 1], [1, 0]])).profile
    assert p.p_L == 0.25 and p.p_U == 0.5


@pytest.mark.parametrize("g", mixed_games(20), ids=lambda g: g.name)
def test_ne_makes_both_players_indifferent(g):
    rep = solve_ne_2x2(g)
    p = rep.profile
    row_eu = g.u_row @ p.p_col
    col_eu = p.p_row @ g.u_col
    assert abs(row_eu[0] - row_eu[1]) <= 1e-10
    assert abs(col_eu[0] - col_eu[1]) <= 1e-10
    assert rep.residual == pytest.approx(max(abs(row_eu[0] - row_eu[1]), abs(col_eu[0] - col_eu[1])), abs=1e-12)


def test_ne_pure_game_has_no_mixed_equilibrium():
    with pytest.raises(NoMixedEquilibriumError):
        solve_ne_2x2(GameSpec([[3, 3], [0, 0]], [[1, 0], [1, 0]]))


# -- QRE ---------------------------------------------------------------------


def test_qre_zero_lambda_is_uniform():
    g = mixed_games(1)[0]
    p = solve_qre(g, 0.0).profile
    assert np.allclose(p.p_row, 0.5, atol=1e-12) and np.allclose(p.p_col, 0.5, atol=1e-12)


def test_qre_identical_rows_split_evenly():
    g = GameSpec([[4, 9], [4, 9]], [[1, 7], [3, 2]])
    assert solve_qre(g, 1.0).profile.p_U == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("g", mixed_games(10), ids=lambda g: g.name)
def test_qre_high_lambda_approaches_nash(g):
    ne = solve_ne_2x2(g).profile
    q = solve_qre(g, 50.0).profile
    assert abs(q.p_U - ne.p_U) <= 0.02 and abs(q.p_L - ne.p_L) <= 0.02


@pytest.mark.parametrize("g", mixed_games(10), ids=lambda g: g.name)
def test_qre_satisfies_the_logit_equations(g):
    rep = solve_qre(g, 1.05)
    p = rep.profile
    assert abs(logit_oracle(g.u_row, 1.05, p.p_L) - p.p_U) <= 1e-10
    assert abs(logit_oracle(g.u_col.T, 1.05, p.p_U) - p.p_L) <= 1e-10
    assert rep.residual == pytest.approx(qre_residual(g, p, 1.05), abs=1e-12)


def test_qre_varies_continuously_in_lambda():
    g = mixed_games(1)[0]
    prev = None
    for lam in np.arange(0.0, 3.0001, 0.01):
        p = solve_qre(g, float(lam)).profile
        if prev is not None:
            assert abs(p.p_U - prev.p_U) <= 0.05 and abs(p.p_L - prev.p_L) <= 0.05
        prev = p


def test_qre_larger_game_by_iteration():
    g = GameSpec([[3, 0], [1, 2], [0, 4]], [[0, 2], [3, 1], [2, 0]])
    rep = solve_qre(g, 1.5)
    assert rep.residual <= 1e-10
    assert rep.residual == pytest.approx(qre_residual(g, rep.profile, 1.5), abs=1e-12)
    assert rep.iterations > 0


def test_qre_rejects_negative_lambda(pennies):
    with pytest.raises(ValueError):
        solve_qre(pennies, -1)


# -- sampling equilibria -----------------------------------------------------


@pytest.mark.parametrize("n", [1, 6, 12])
def test_sampling_concepts_on_matching_pennies(pennies, n):
    for rep in (solve_ase_2x2(pennies, n), solve_pse_2x2(pennies, n)):
        assert rep.profile.p_U == pytest.approx(0.5, abs=1e-12)
        assert rep.profile.p_L == pytest.approx(0.5, abs=1e-12)


def test_dominant_row_action_is_always_played():
    g = GameSpec([[5, 6], [1, 2]], [[0, 1], [1, 0]])
    assert solve_ase_2x2(g, 12).profile.p_U == 1.0
    assert solve_pse_2x2(g, 6).profile.p_U == 1.0


@pytest.mark.parametrize("g", mixed_games(10), ids=lambda g: g.name)
def test_ase_agrees_with_exact_binomial_sums(g):
    rep = solve_ase_2x2(g, 12)
    p = rep.profile
    r1 = abs(ase_oracle(g.u_row, 12, p.p_L) - p.p_U)
    r2 = abs(ase_oracle(g.u_col.T, 12, p.p_U) - p.p_L)
    assert max(r1, r2) <= 1e-8


@pytest.mark.parametrize("g", mixed_games(10), ids=lambda g: g.name)
def test_pse_agrees_with_exact_double_sums(g):
    p = solve_pse_2x2(g, 6).profile
    r1 = abs(pse_oracle(g.u_row, 6, p.p_L) - p.p_U)
    r2 = abs(pse_oracle(g.u_col.T, 6, p.p_U) - p.p_L)
    assert max(r1, r2) <= 1e-8


@pytest.mark.parametrize("g", mixed_games(8), ids=lambda g: g.name)
def test_reported_residuals_can_be_recomputed(g):
    for rep, resp_row, resp_col in (
        (solve_ase_2x2(g, 12), lambda q: ase_oracle(g.u_row, 12, q), lambda p: ase_oracle(g.u_col.T, 12, p)),
        (solve_pse_2x2(g, 6), lambda q: pse_oracle(g.u_row, 6, q), lambda p: pse_oracle(g.u_col.T, 6, p)),
    ):
        p = rep.profile
        # the solver reports the reduced-map violation at p_L
        assert rep.residual == pytest.approx(abs(resp_col(resp_row(p.p_L)) - p.p_L), abs=1e-12)
        assert abs(resp_row(p.p_L) - p.p_U) <= 1e-12


def test_ase_single_observation_by_enumeration():
    g = GameSpec([[6, 1], [2, 4]], [[1, 5], [4, 2]])
    p = solve_ase_2x2(g, 1).profile

    # one observed opponent action: best-respond to it
    def br_row(b):
        return 1.0 if g.u_row[0, b] > g.u_row[1, b] else 0.0

    def br_col(a):
        return 1.0 if g.u_col[a, 0] > g.u_col[a, 1] else 0.0

    assert p.p_U == pytest.approx(p.p_L * br_row(0) + (1 - p.p_L) * br_row(1), abs=1e-12)
    assert p.p_L == pytest.approx(p.p_U * br_col(0) + (1 - p.p_U) * br_col(1), abs=1e-12)


def test_sampling_solvers_validate_sample_size(pennies):
    with pytest.raises(ValueError):
        solve_ase_2x2(pennies, 0)
    with pytest.raises(ValueError):
        solve_pse_2x2(pennies, 0)


# -- impulse balance ---------------------------------------------------------


def test_ibe_symmetric_game(pennies):
    p = solve_ibe_2x2(pennies).profile
    assert (p.p_U, p.p_L) == (0.5, 0.5)


def test_ibe_one_line_balance():
    g = GameSpec([[10, 0], [4, 4]], [[0, 1], [1, 0]])
    assert np.array_equal(impulses(transform(g)).imp_row, [[0, 4], [3, 0]])
    p = solve_ibe_2x2(g).profile
    assert p.p_L == pytest.approx(4 / 7, abs=1e-15)
    assert p.p_U == 0.5


@pytest.mark.parametrize("g", mixed_games(20), ids=lambda g: g.name)
def test_ibe_balances_both_players(g):
    rep = solve_ibe_2x2(g)
    p = rep.profile
    imp = impulses(transform(g))

    def gap(imp_own, q):
        return abs((imp_own[0, 0] * q + imp_own[0, 1] * (1 - q)) - (imp_own[1, 0] * q + imp_own[1, 1] * (1 - q)))

    r_row = gap(imp.imp_row, p.p_L)
    r_col = gap(imp.imp_col.T, p.p_U)
    assert max(r_row, r_col) <= 1e-10
    assert rep.residual == pytest.approx(max(r_row, r_col), abs=1e-12)
    assert balance_gap(imp.imp_row, p.p_L) == pytest.approx(0, abs=1e-10)


def test_ibe_without_impulses_is_indeterminate():
    g = GameSpec([[3, 3], [3, 3]], [[0, 1], [1, 0]])
    with pytest.raises(IndeterminateEquilibriumError):
        solve_ibe_2x2(g)


def test_ibe_dominance_has_no_interior_balance():
    g = GameSpec([[5, 6], [1, 2]], [[0, 1], [1, 0]])
    with pytest.raises(NoInteriorBalanceError):
        solve_ibe_2x2(g)


# -- shared properties -------------------------------------------------------


@pytest.mark.parametrize("g", mixed_games(6), ids=lambda g: g.name)
@pytest.mark.parametrize("concept", CONCEPTS)
def test_relabelling_row_actions(g, concept):
    a = solve(g, concept).profile
    b = solve(swap_rows(g), concept).profile
    assert b.p_U == pytest.approx(1 - a.p_U, abs=1e-9)
    assert b.p_L == pytest.approx(a.p_L, abs=1e-9)


@pytest.mark.parametrize("g", mixed_games(6), ids=lambda g: g.name)
@pytest.mark.parametrize("concept", CONCEPTS)
def test_solver_output_is_a_valid_profile(g, concept):
    rep = solve(g, concept)
    assert rep.residual >= 0
    assert rep.multiplicity == 1
    assert rep.profile.p_row.sum() == pytest.approx(1)


def test_multiple_equilibria_are_all_reported():
    # coordination game: two pure equilibria and a mixed one under high lambda
    g = GameSpec([[5, 0], [0, 5]], [[5, 0], [0, 5]])
    rep = solve_qre(g, 5.0)
    assert rep.multiplicity == 3
    assert [r.p_U for r in rep.roots] == sorted(r.p_U for r in rep.roots)
    assert rep.profile is rep.roots[0]


def test_unknown_concept(pennies):
    with pytest.raises(ValueError):
        solve(pennies, "cheap-talk")


# -- simulation --------------------------------------------------------------


def test_degenerate_profile_plays_one_cell():
    s = simulate(MixedProfile.from_2x2(1.0, 1.0), 5, 0)
    assert s.plays.tolist() == [[0, 0]] * 5


def test_simulation_is_seeded():
    p = MixedProfile.from_2x2(0.3, 0.7)
    assert simulate(p, 50, 7) == simulate(p, 50, 7)
    assert simulate(p, 50, (7, 1)) == simulate(p, 50, (7, 1))
    assert simulate(p, 50, 7) != simulate(p, 50, 8)


def test_simulation_law_of_large_numbers():
    s = simulate(MixedProfile.from_2x2(0.6, 0.25), 100_000, 3)
    assert abs(np.mean(s.plays[:, 0] == 0) - 0.6) <= 0.01
    assert abs(np.mean(s.plays[:, 1] == 0) - 0.25) <= 0.01


def test_simulation_never_plays_zero_probability_actions():
    s = simulate(MixedProfile([0.0, 1.0, 0.0], [0.5, 0.5]), 1000, 1)
    assert set(s.plays[:, 0].tolist()) == {1}


def test_simulation_needs_a_period():
    with pytest.raises(ValueError):
        simulate(MixedProfile.from_2x2(0.5, 0.5), 0, 1)
