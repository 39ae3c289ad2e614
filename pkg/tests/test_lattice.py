import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinamp.errors import BoundaryTouchError, ConfigError
from spinamp.lattice import (
    LatticeConfig,
    allowed_flips,
    build_rule_hamiltonian,
    config_partition,
    reachable_states,
    tridiagonalize_from_seed,
)
from spinamp.young import Partition, children, level, parents, partitions_of


def P(*parts):
    return Partition(tuple(parts))


def cells(lam):
    return {(r, j) for j, h in enumerate(lam.parts) for r in range(h)}


def young_flip_sites(lam):
    """Sites whose flip moves the staircase to a Young neighbour."""
    out = set()
    for mu in children(lam):
        out |= cells(mu) - cells(lam)
    if lam.n > 1:
        for mu in parents(lam):
            out |= cells(lam) - cells(mu)
    return out


def naive_flippable(grid, r, c, flip_corners=False):
    """Neighbour pattern rules written out case by case."""
    H, W = grid.shape
    if (r, c) == (0, 0):
        return False
    nb = [grid[rr, cc] for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
          if 0 <= rr < H and 0 <= cc < W]
    ups = sum(nb)
    if len(nb) == 4:
        return ups == 2
    if len(nb) == 3:
        return ups == 1
    if len(nb) == 2:
        return flip_corners and ups == 1
    return False  # a 1-wide grid end: a single neighbour


# -- allowed_flips -----------------------------------------------------------

def test_corner_up_flips_its_two_neighbours():
    cfg = LatticeConfig.corner_only(4, 4)
    assert allowed_flips(cfg) == [(0, 1), (1, 0)]


def test_corner_down_is_inert():
    assert allowed_flips(LatticeConfig.corner_only(4, 4, corner_up=False)) == []
    assert allowed_flips(LatticeConfig.corner_only(7, 5, corner_up=False)) == []


def test_staircase_two_one():
    cfg = LatticeConfig.from_partition(P(2, 1), 4, 4)
    assert set(allowed_flips(cfg)) == {(2, 0), (1, 1), (0, 2), (1, 0), (0, 1)}
    reached = {config_partition(cfg.flipped(s)) for s in allowed_flips(cfg)}
    assert reached == {P(3, 1), P(2, 2), P(2, 1, 1), P(1, 1), P(2)}


@pytest.mark.parametrize("n", range(1, 8))
def test_flips_are_young_moves(n):
    for lam in partitions_of(n):
        cfg = LatticeConfig.from_partition(lam, 10, 10)
        assert set(allowed_flips(cfg)) == young_flip_sites(lam)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.booleans(), st.data())
def test_rules_match_naive_counts_and_are_symmetric(w, h, corners, data):
    bits = data.draw(st.lists(st.booleans(), min_size=w * h, max_size=w * h))
    grid = np.array(bits).reshape(h, w)
    cfg = LatticeConfig.from_grid(grid)
    flips = set(allowed_flips(cfg, corners))
    assert flips == {(r, c) for r in range(h) for c in range(w)
                     if naive_flippable(grid, r, c, corners)}
    for s in flips:
        assert s in allowed_flips(cfg.flipped(s), corners)
    assert (0, 0) not in flips


def test_far_corners_frozen_unless_requested():
    cfg = LatticeConfig(4, 4, frozenset({(3, 2)}))
    assert (3, 3) not in allowed_flips(cfg)
    assert (3, 3) in allowed_flips(cfg, flip_corners=True)


def test_corner_is_frozen():
    with pytest.raises(ConfigError):
        LatticeConfig.corner_only(3, 3).flipped((0, 0))


def test_config_validation():
    with pytest.raises(ConfigError):
        LatticeConfig(3, 3, frozenset({(3, 0)}))
    with pytest.raises(ConfigError):
        LatticeConfig(0, 3)


def test_config_partition():
    assert config_partition(LatticeConfig.from_partition(P(3, 1, 1), 5, 5)) == P(3, 1, 1)
    assert config_partition(LatticeConfig(5, 5, frozenset({(1, 0)}))) is None
    assert config_partition(LatticeConfig(5, 5, frozenset({(0, 0), (0, 2)}))) is None
    assert config_partition(LatticeConfig(5, 5, frozenset({(0, 0), (0, 1), (1, 1)}))) is None
    assert config_partition(LatticeConfig(5, 5)) == P()


# -- reachable states --------------------------------------------------------

def test_level_sizes_six_by_six():
    b = reachable_states(6, 6, max_n=5)
    assert b.level_sizes() == [1, 2, 3, 5, 7]


def test_corner_down_single_state():
    b = reachable_states(6, 6, max_n=5, corner_up=False)
    assert len(b) == 1 and b.configs[0].n_up == 0


def test_boundary_touch_is_refused():
    with pytest.raises(BoundaryTouchError):
        reachable_states(6, 6, max_n=6)
    # frozen far corners block (6) and (1, 1, 1, 1, 1, 1)
    b = reachable_states(6, 6, max_n=6, allow_boundary=True)
    assert b.level_sizes()[-1] == 9
    b = reachable_states(6, 6, max_n=6, allow_boundary=True, flip_corners=True)
    assert b.level_sizes()[-1] == 11


def test_tiny_grid_closure_with_boundary():
    # on 2x2 every free site has two neighbours and flips with exactly one up,
    # so any two of the three free sites can be up but never all three
    b = reachable_states(2, 2, max_n=4, allow_boundary=True, flip_corners=True)
    assert b.level_sizes() == [1, 2, 3]
    assert len(reachable_states(2, 2, max_n=4, allow_boundary=True)) == 1
    assert LatticeConfig(2, 2, frozenset({(0, 0), (0, 1), (1, 0), (1, 1)})) not in b.index


def test_bijection_and_path_counts():
    b = reachable_states(10, 10, max_n=8)
    levels = b.levels()
    for n in range(1, 9):
        labels = [config_partition(c) for c in levels[n]]
        assert None not in labels
        assert sorted(labels) == partitions_of(n)
        weights = level(n).entries
        for c in levels[n]:
            assert b.path_counts[b.index[c]] == weights[config_partition(c)]


def test_dump_format():
    b = reachable_states(3, 3, max_n=2)
    lines = b.dump().splitlines()
    assert lines[0] == "100000000\t1"
    assert set(lines[1:]) == {"110000000\t1,1", "100100000\t2"}


# -- rule Hamiltonian and tridiagonalisation ----------------------------------

def test_rule_hamiltonian_structure():
    H = build_rule_hamiltonian(reachable_states(8, 8, max_n=7), omega=0.3)
    M = H.matrix.toarray()
    np.testing.assert_array_equal(M, M.T)
    assert np.all(np.diag(M) == 0)
    assert set(np.unique(M)) <= {0.0, 0.3}
    # each level-n staircase links to its Young neighbours inside the basis
    deg = (M != 0).sum(axis=1)
    for i, c in enumerate(H.basis.configs):
        lam = config_partition(c)
        expect = len(parents(lam)) * (lam.n > 1) + len(children(lam)) * (lam.n < 7)
        assert deg[i] == expect


def test_lanczos_recovers_sqrt_couplings():
    omega = 0.7
    H = build_rule_hamiltonian(reachable_states(12, 12, max_n=11), omega)
    alphas, betas = tridiagonalize_from_seed(H)
    assert np.max(np.abs(alphas)) < 1e-10
    # betas[k] links |k+1> and |k+2>
    assert betas[0] == pytest.approx(omega * math.sqrt(2), abs=1e-12)
    k = np.arange(1, 10)
    np.testing.assert_allclose(betas[:9], omega * np.sqrt(k + 1), rtol=0, atol=1e-8)


def test_lanczos_seed_must_be_in_basis():
    H = build_rule_hamiltonian(reachable_states(5, 5, max_n=3))
    with pytest.raises(ConfigError):
        tridiagonalize_from_seed(H, LatticeConfig(5, 5, frozenset({(2, 2)})))
