import numpy as np
import pytest
from scipy.integrate import solve_ivp

from spinamp.errors import ConfigError
from spinamp.fullspin import (
    LEAKAGE_TOLERANCE,
    FullSpinState,
    _SpinModel,
    rwa_validate_1d,
    two_tone_states,
    two_tone_validate_2d,
)
from spinamp.chain import build_chain, evolve
from spinamp.lattice import LatticeConfig, allowed_flips

# single-spin operators in the (down, up) basis
SZ = np.diag([-1.0, 1.0])
SX = np.array([[0, 1], [1, 0]], complex)
SY = np.array([[0, 1j], [-1j, 0]])


def embed(op, i, n):
    """``op`` on spin ``i`` of ``n``; spin ``i`` is bit ``i`` of the index."""
    out = np.eye(1)
    for k in reversed(range(n)):
        out = np.kron(out, op if k == i else np.eye(2))
    return out


def kron_hamiltonian(n, bonds, J, fields):
    """Dense ``J sum sz sz + sum_i sum_ops c * op_i`` on ``n`` spins."""
    H = sum(J * embed(SZ, a, n) @ embed(SZ, b, n) for a, b in bonds).astype(complex)
    for i, terms in fields.items():
        for c, op in terms:
            H += c * embed(op, i, n)
    return H


def freeze_first(H, n):
    """Project spin 0 onto up and drop it from the index."""
    keep = [s for s in range(2 ** n) if s & 1]
    return H[np.ix_(keep, keep)]


def test_full_spin_state_checks():
    FullSpinState(2, np.array([1, 0, 0, 0], complex))
    with pytest.raises(ConfigError):
        FullSpinState(2, np.array([1, 1, 0, 0], complex))
    with pytest.raises(ConfigError):
        FullSpinState(13, np.zeros(2 ** 13, complex))


def test_static_hamiltonian_matches_kronecker_oracle():
    n, J, om = 5, 1.3, 0.07
    bonds = [(i, i + 1) for i in range(n - 1)]
    ref = freeze_first(kron_hamiltonian(n, bonds, J, {i: [(om, SX)] for i in range(1, n)}), n)
    got = _SpinModel(n, bonds, {0: 1}, J).static_hamiltonian(om)
    np.testing.assert_allclose(got, ref, atol=1e-14)


def test_rwa_no_drive_no_leakage():
    s = rwa_validate_1d(6, 1.0, 0.0, np.linspace(0, 100, 11))
    assert np.all(s.leakage == 0)


def test_rwa_two_spins_never_leaves_walls():
    s = rwa_validate_1d(2, 1.0, 0.05, np.linspace(0, 100, 11))
    assert s.leakage.max() < 1e-12


def test_rwa_leakage_bound_and_scaling():
    a = rwa_validate_1d(8, 1.0, 0.02, np.linspace(0, 20 / 0.02, 401))
    b = rwa_validate_1d(8, 1.0, 0.01, np.linspace(0, 20 / 0.01, 401))
    assert a.leakage.max() <= 0.05
    assert b.time_average() * 2 <= a.time_average()


def test_rwa_walls_follow_the_uniform_chain():
    # the last spin has one neighbour and never flips resonantly, so n spins
    # give a uniform chain of n - 1 wall positions
    om, n = 0.01, 6
    t = np.linspace(0, 3 / om, 13)
    s = rwa_validate_1d(n, 1.0, om, t)
    ref = np.array([np.abs(st.amps) ** 2 for st in evolve(build_chain(1, n - 1, om), t)])
    assert np.max(np.abs(s.subspace[:, : n - 1] - ref)) < 0.02
    assert s.subspace[:, 1:].max() > 0.3  # the wall really moves


def test_rwa_rejects_strong_drive():
    with pytest.raises(ConfigError):
        rwa_validate_1d(6, 1.0, 0.2, [0, 1])


def _two_tone_oracle(J, om, t):
    """2x2 grid with the corner frozen up, built from Pauli products."""
    n = 4
    bonds = [(0, 1), (2, 3), (0, 2), (1, 3)]
    Hs = kron_hamiltonian(n, bonds, J, {i: [(om, SX)] for i in range(1, n)})
    X = sum(embed(SX, i, n) for i in range(1, n))
    Y = sum(embed(SY, i, n) for i in range(1, n))
    Hs, X, Y = (freeze_first(M, n) for M in (Hs, X, Y))

    def rhs(tt, psi):
        H = Hs + om * (np.cos(2 * J * tt) * X - np.sin(2 * J * tt) * Y)
        return -1j * (H @ psi)

    psi0 = np.zeros(8, complex)
    psi0[0] = 1
    sol = solve_ivp(rhs, (0, t[-1]), psi0, t_eval=t, rtol=1e-11, atol=1e-13, method="DOP853")
    return sol.y


def test_two_tone_matches_kronecker_oracle():
    t = np.linspace(0, 40, 9)
    got = two_tone_states(2, 2, 1.0, 0.1, t)
    ref = _two_tone_oracle(1.0, 0.1, t)
    # free spins (0,1), (1,0), (1,1) are sites 1, 2, 3 -> bits 0, 1, 2 in both
    np.testing.assert_allclose(got, ref, atol=1e-6)


def test_two_tone_zero_drive_is_static():
    r = two_tone_validate_2d(3, 3, 1.0, 0.0, np.linspace(0, 10, 5))
    assert np.all(r.leakage == 0) and np.all(r.up_population == 0) and np.all(r.rule_l1 == 0)


def test_second_tone_drives_the_edge():
    # on 3x3 both neighbours of the corner have three neighbours: with only
    # the corner up they are resonant with the second tone alone
    om = 0.02
    t = np.linspace(0, np.pi / (2 * np.sqrt(2) * om), 21)
    with_tone = two_tone_validate_2d(3, 3, 1.0, om, t)
    without = two_tone_validate_2d(3, 3, 1.0, om, t, second_tone=False)
    assert with_tone.up_population.max() > 0.5
    assert without.up_population.max() < 0.05


def test_corner_down_is_inert():
    cfg = LatticeConfig.corner_only(3, 3, corner_up=False)
    assert allowed_flips(cfg) == []
    for om in (0.05, 0.025):
        r = two_tone_validate_2d(3, 3, 1.0, om, np.linspace(0, 10 / om, 201), corner_up=False)
        assert r.up_population.max() <= LEAKAGE_TOLERANCE
        assert r.leakage.max() <= LEAKAGE_TOLERANCE
    # no growth: late times look like early times
    late = r.up_population[100:].mean()
    early = r.up_population[1:100].mean()
    assert late < 2 * early


def test_rule_agreement_improves_with_weaker_drive():
    l1 = {}
    for om in (0.05, 0.025):
        r = two_tone_validate_2d(3, 3, 1.0, om, np.linspace(0, 10 / om, 201))
        l1[om] = r.rule_l1.max()
    assert l1[0.025] <= 0.5 * l1[0.05]


@pytest.mark.xfail(strict=True, reason="measured max L1 is 0.125: second-order level "
                   "shifts of order Omega^2/J dephase the rule dynamics by t = 10/Omega")
def test_rule_agreement_three_by_three():
    r = two_tone_validate_2d(3, 3, 1.0, 0.05, np.linspace(0, 10 / 0.05, 201))
    assert r.rule_l1.max() <= 0.1
