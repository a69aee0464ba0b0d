import random

import pytest
from hypothesis import given, settings, strategies as st

from groupca.errors import CapExceeded, FamilyMismatch, ParseError, UsageError
from groupca.groups import (
    DirectProduct,
    FreeGroup,
    InfiniteDihedral,
    Integers,
    check_ball_inclusion,
    parse_group,
)

from oracles import bfs_norms, free_reduce

F2 = FreeGroup(2)
DINF = InfiniteDihedral()
DP3 = DirectProduct(3)
Z = Integers()
FAMILIES = [Z, DirectProduct(2), DP3, DINF, F2, FreeGroup(3)]


def random_element(group, rng, length=12):
    g = group.identity()
    for _ in range(rng.randint(0, length)):
        g = group.multiply(g, rng.choice(group.generators))
    return g


class TestArithmetic:
    def test_identities(self):
        assert Z.identity() == 0
        assert F2.identity() == ""
        assert DINF.identity() == (0, 0)

    def test_products(self):
        assert F2.multiply("ab", "Ba") == "aa"
        assert DINF.multiply((2, 1), (3, 0)) == (-1, 1)
        assert Z.multiply(3, 4) == 7
        assert DP3.multiply((1, 2), (4, 2)) == (5, 1)

    def test_inverses(self):
        assert F2.inverse("ab") == "BA"
        assert DINF.inverse((3, 1)) == (3, 1)
        assert Z.inverse(5) == -5

    def test_norms(self):
        assert F2.norm("abA") == 3
        assert DINF.norm((-2, 1)) == bfs_norms(DINF, 3)[(-2, 1)] == 3
        assert DP3.norm((0, 2)) == 1

    def test_family_mismatch_rejected(self):
        with pytest.raises(FamilyMismatch):
            F2.multiply("ab", 3)
        with pytest.raises(FamilyMismatch):
            DINF.multiply((0, 2), (1, 0))
        with pytest.raises(FamilyMismatch):
            F2.multiply("aA", "b")

    @pytest.mark.parametrize("group", FAMILIES, ids=lambda g: g.descriptor)
    def test_group_laws_on_random_triples(self, group):
        rng = random.Random(7)
        e = group.identity()
        for _ in range(1000):
            g, h, k = (random_element(group, rng) for _ in range(3))
            assert group.multiply(group.multiply(g, h), k) == group.multiply(g, group.multiply(h, k))
            assert group.multiply(g, e) == g == group.multiply(e, g)
            assert group.multiply(g, group.inverse(g)) == e
            assert group.norm(group.multiply(g, h)) <= group.norm(g) + group.norm(h)
            assert group.norm(g) == group.norm(group.inverse(g))

    @given(st.lists(st.sampled_from("aAbB"), max_size=30), st.lists(st.sampled_from("aAbB"), max_size=30))
    def test_free_product_matches_stack_reduction(self, u, v):
        g, h = free_reduce("".join(u)), free_reduce("".join(v))
        assert F2.multiply(g, h) == free_reduce(g + h)

    def test_generators_closed_under_inverse(self):
        for group in FAMILIES:
            gens = set(group.generators)
            assert group.identity() not in gens
            assert {group.inverse(s) for s in gens} == gens


class TestBalls:
    def test_small_balls(self):
        assert len(F2.ball(2)) == 17
        assert set(Z.ball(3)) == set(range(-3, 4))
        assert set(DINF.ball(1)) == {(0, 0), (1, 0), (-1, 0), (0, 1)}

    @pytest.mark.parametrize("k", range(9))
    def test_free_ball_size_closed_form(self, k):
        ball = F2.ball(k)
        assert len(ball) == len(set(ball)) == 2 * 3**k - 1
        if k <= 6:
            assert set(ball) == set(bfs_norms(F2, k))

    @pytest.mark.parametrize("group", FAMILIES, ids=lambda g: g.descriptor)
    def test_ball_matches_bfs_norms(self, group):
        norms = bfs_norms(group, 4)
        ball = group.ball(4)
        assert set(ball) == set(norms)
        assert all(group.norm(g) == norms[g] for g in ball)
        assert len(ball) == group.ball_size(4)

    @pytest.mark.parametrize("group", FAMILIES, ids=lambda g: g.descriptor)
    def test_balls_nested_and_sorted(self, group):
        for k in range(4):
            small, big = group.ball(k), group.ball(k + 1)
            assert set(small) <= set(big)
            assert all(group.norm(g) <= k for g in small)
            assert list(big) == group.sorted(big)

    def test_cap_is_an_error(self, monkeypatch):
        monkeypatch.setenv("GROUPCA_CAP_ELEMS", "100")
        with pytest.raises(CapExceeded):
            F2.ball(5)

    def test_explicit_cap(self):
        with pytest.raises(CapExceeded):
            F2.ball(4, cap=50)


class TestSerialization:
    @pytest.mark.parametrize("group", FAMILIES, ids=lambda g: g.descriptor)
    def test_round_trip(self, group):
        for g in group.ball(3):
            assert group.parse(group.format(g)) == g

    def test_formats(self):
        assert Z.format(-3) == "-3"
        assert DINF.format((2, 1)) == "(2,1)"
        assert F2.format("") == ""
        assert F2.parse("1") == ""

    def test_bad_strings(self):
        with pytest.raises(ParseError):
            F2.parse("aAb")
        with pytest.raises(ParseError):
            DP3.parse("(1,x)")

    def test_parse_group(self):
        assert parse_group("free:3") == FreeGroup(3)
        assert parse_group("dp:4") == DirectProduct(4)
        assert parse_group("z:2,3").generators == Integers((2, 3, -2, -3)).generators
        with pytest.raises(UsageError):
            parse_group("sl2z")


class TestBallInclusion:
    def test_examples(self):
        e1, e23 = Integers(), Integers((2, -2, 3, -3))
        assert check_ball_inclusion(e1, e23, 1) == 2
        assert check_ball_inclusion(e1, e1, 5) == 5
        assert check_ball_inclusion(e23, e1, 1) == 3

    def test_norm_matches_bfs_for_custom_generators(self):
        e23 = Integers((2, -2, 3, -3))
        norms = bfs_norms(e23, 6)
        for g, d in norms.items():
            assert e23.norm(g) == d

    @settings(max_examples=30)
    @given(st.integers(0, 8))
    def test_monotone(self, k):
        e1, e23 = Integers(), Integers((2, -2, 3, -3))
        assert check_ball_inclusion(e1, e23, k) <= check_ball_inclusion(e1, e23, k + 1)

    def test_unsupported_family(self):
        with pytest.raises(FamilyMismatch):
            check_ball_inclusion(F2, F2, 1)
