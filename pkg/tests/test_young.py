import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinamp.errors import SizeLimitError
from spinamp.young import (
    MAX_N,
    Partition,
    children,
    coupled_state,
    effective_coupling,
    exact_amplitude,
    format_levels,
    hop_amplitude,
    level,
    parents,
    parse_levels,
    partitions_of,
)


def P(*parts):
    return Partition(tuple(parts))


# -- independent oracles ------------------------------------------------------

def brute_partitions(n):
    """Sort every composition of n (2^(n-1) of them) and deduplicate."""
    if n == 0:
        return {()}
    out = set()
    for cuts in itertools.product((0, 1), repeat=n - 1):
        parts, run = [], 1
        for c in cuts:
            if c:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        out.add(tuple(sorted(parts, reverse=True)))
    return out


def count_partitions(n):
    """Euler's pentagonal-number recurrence."""
    p = [1] + [0] * n
    for m in range(1, n + 1):
        k, total = 1, 0
        while True:
            g1 = k * (3 * k - 1) // 2
            if g1 > m:
                break
            sign = 1 if k % 2 else -1
            total += sign * p[m - g1]
            g2 = k * (3 * k + 1) // 2
            if g2 <= m:
                total += sign * p[m - g2]
            k += 1
        p[m] = total
    return p[n]


def cells(parts):
    return {(i, j) for i, h in enumerate(parts) for j in range(h)}


def count_paths(parts):
    """Number of ways to grow the shape from the single box, box by box."""
    target = cells(parts)

    def rec(current):
        if current == target:
            return 1
        total = 0
        for (i, j) in target - current:
            # addable: left column taller and the cell below filled
            if (i == 0 or (i - 1, j) in current) and (j == 0 or (i, j - 1) in current):
                total += rec(current | {(i, j)})
        return total

    return rec(frozenset({(0, 0)}))


def hook_length_count(parts):
    n = sum(parts)
    conj = [sum(1 for p in parts if p > j) for j in range(parts[0])] if parts else []
    prod = 1
    for i, h in enumerate(parts):
        for j in range(h):
            prod *= (h - j - 1) + (conj[j] - i - 1) + 1
    return math.factorial(n) // prod


# -- partitions_of -----------------------------------------------------------

def test_partitions_of_three():
    assert partitions_of(3) == [P(3), P(2, 1), P(1, 1, 1)]


def test_partitions_of_zero():
    assert partitions_of(0) == [P()]


def test_partitions_of_ten():
    assert len(partitions_of(10)) == 42
    assert {p.parts for p in partitions_of(10)} == brute_partitions(10)


@pytest.mark.parametrize("n", range(0, 13))
def test_partitions_match_composition_oracle(n):
    got = [p.parts for p in partitions_of(n)]
    assert len(got) == len(set(got))
    assert set(got) == brute_partitions(n)


@pytest.mark.parametrize("n", range(0, 26))
def test_partition_counts_match_pentagonal_recurrence(n):
    assert len(partitions_of(n)) == count_partitions(n)


def test_reverse_lexicographic_order():
    for n in range(1, 12):
        ps = [p.parts for p in partitions_of(n)]
        assert ps == sorted(ps, reverse=True)


def test_cap():
    assert len(partitions_of(MAX_N)) == count_partitions(MAX_N)
    with pytest.raises(SizeLimitError):
        partitions_of(MAX_N + 1)


def test_partition_validation():
    with pytest.raises(ValueError):
        P(1, 2)
    with pytest.raises(ValueError):
        P(2, 0)


# -- parents / children -------------------------------------------------------

def test_parents_examples():
    assert set(parents(P(2, 1))) == {P(1, 1), P(2)}
    assert parents(P(1)) == [P()]
    assert set(parents(P(3, 3, 1))) == {P(3, 2, 1), P(3, 3)}


def test_children_examples():
    assert children(P()) == [P(1)]
    assert set(children(P(2, 1))) == {P(3, 1), P(2, 2), P(2, 1, 1)}
    assert set(children(P(1, 1))) == {P(2, 1), P(1, 1, 1)}


def test_parents_of_empty_raises():
    with pytest.raises(ValueError):
        parents(P())


def test_parent_child_duality_exhaustive():
    for n in range(0, 12):
        upper = partitions_of(n + 1)
        for lam in partitions_of(n):
            kids = set(children(lam))
            for mu in upper:
                assert (mu in kids) == (lam in parents(mu))


@given(st.integers(min_value=1, max_value=18).flatmap(
    lambda n: st.sampled_from(partitions_of(n))))
def test_parents_children_are_valid_neighbours(lam):
    for mu in parents(lam):
        assert mu.n == lam.n - 1
        assert cells(mu.parts) <= cells(lam.parts)
    for mu in children(lam):
        assert mu.n == lam.n + 1
        assert lam in parents(mu)


# -- level weights -----------------------------------------------------------

def test_level_three():
    lv = level(3)
    assert dict(lv.entries) == {P(3): 1, P(2, 1): 2, P(1, 1, 1): 1}
    assert lv.sum_sq() == 6


def test_level_one():
    assert dict(level(1).entries) == {P(1): 1}
    assert level(1).sum_sq() == 1


def test_level_six_sum():
    assert level(6).sum_sq() == 720


@pytest.mark.parametrize("n", range(1, 9))
def test_weights_match_explicit_path_enumeration(n):
    for lam, w in level(n).entries.items():
        assert w == count_paths(lam.parts)


@pytest.mark.parametrize("n", range(1, 21))
def test_sum_of_squared_weights_is_factorial(n):
    assert level(n).sum_sq() == math.factorial(n)


def test_weights_match_hook_length_cross_check():
    for n in (10, 15, 20):
        for lam, w in level(n).entries.items():
            assert w == hook_length_count(lam.parts)


def test_weights_are_big_integers():
    # n! passes 2**63 at n = 21
    lv = level(25)
    assert lv.sum_sq() == math.factorial(25)
    assert lv.sum_sq() > 2**63


def test_level_dump_round_trip():
    levels = [level(k) for k in range(1, 6)]
    text = format_levels(levels)
    assert text.split("\n\n")[1] == "2\t1\n1,1\t1"
    parsed = parse_levels(text)
    assert parsed == [dict(lv.entries) for lv in levels]


# -- coupled states ----------------------------------------------------------

def test_coupled_state_two():
    c = coupled_state(2).coeffs
    assert set(c) == {P(2), P(1, 1)}
    assert c[P(2)] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert c[P(1, 1)] == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_coupled_state_one():
    assert dict(coupled_state(1).coeffs) == {P(1): 1.0}


def _rule_matrix(lower, upper):
    """Link matrix between two partition levels, one entry per parent link."""
    M = np.zeros((len(upper), len(lower)))
    idx = {lam: i for i, lam in enumerate(lower)}
    for a, lam in enumerate(upper):
        for mu in parents(lam):
            M[a, idx[mu]] = 1.0
    return M


def test_coupled_state_four_by_gram_schmidt():
    # |4> is the normalised projection of H|3> onto level 4; H|3> has no
    # other level-4 component, so orthogonalise explicitly against the
    # hyperplane basis of states |3> does not couple to
    lower, upper = partitions_of(3), partitions_of(4)
    c3 = np.array([coupled_state(3).coeffs[lam] for lam in lower])
    M = _rule_matrix(lower, upper)
    row = c3 @ M.T  # <3|H|psi_j> up to Omega
    # orthonormal basis of the uncoupled hyperplane {alpha : row . alpha = 0}
    _, _, vt = np.linalg.svd(row[None, :])
    hyper = vt[1:]
    v = np.eye(len(upper))[0]
    for e in hyper:
        v = v - (v @ e) * e
    for b in np.eye(len(upper))[1:]:
        if np.linalg.norm(v) > 1e-8:
            break
        v = b - sum((b @ e) * e for e in hyper)
    v = v / np.linalg.norm(v) * np.sign(v @ row)
    got = np.array([coupled_state(4).coeffs[lam] for lam in upper])
    np.testing.assert_allclose(got, v, atol=1e-12)
    w = np.array([level(4).entries[lam] for lam in upper], dtype=float)
    np.testing.assert_allclose(got, w / np.linalg.norm(w), atol=1e-12)


@pytest.mark.parametrize("n", range(1, 16))
def test_coupled_state_matches_weights(n):
    cs = coupled_state(n)
    assert abs(cs.norm_sq() - 1) < 1e-12
    scale = math.sqrt(math.factorial(n))
    for lam, w in level(n).entries.items():
        assert abs(cs.coeffs[lam] * scale - w) <= 1e-10 * max(1.0, w)
        assert cs.coeffs[lam] == pytest.approx(exact_amplitude(w, n), rel=1e-12)


@pytest.mark.parametrize("n", range(1, 16))
def test_hop_amplitude_is_sqrt(n):
    assert abs(hop_amplitude(n, 0.7) - 0.7 * math.sqrt(n + 1)) < 1e-10


# -- effective coupling ------------------------------------------------------

def test_effective_coupling_examples():
    assert effective_coupling(1, 1.0) == 1.0
    assert effective_coupling(2, 1.0) == pytest.approx(1.41421356, abs=1e-8)
    assert effective_coupling(9, 0.5) == 1.5


@pytest.mark.parametrize("bad", [(0, 1.0), (2, 0.0), (2, -1.0), (1.5, 1.0)])
def test_effective_coupling_rejects(bad):
    with pytest.raises(ValueError):
        effective_coupling(*bad)
