import random

import pytest

from groupca.engine import dependency_region, evolve
from groupca.errors import PreconditionError
from groupca.freeca import (
    BIN,
    BOUNDARY,
    FREE_ALPHABET,
    INTERIOR,
    LazyFreeBlock,
    PropagationSpec,
    classify_blocked,
    classify_free,
    experiment_nonsensitivity,
    experiment_propagation,
    experiment_uniform_interior,
    freeblock_ca,
    nonzero_set,
    obstacle_config,
    rule_F,
    to_dot,
    xor_overlay,
)
from groupca.groups import FreeGroup
from groupca.patterns import Configuration, Pattern, Uniform

from oracles import free_step_naive

F2 = FreeGroup(2)
CA = freeblock_ca(F2)
SYMBOLS = FREE_ALPHABET.symbols


def uniform(symbol, cells=None):
    return Configuration.uniform(F2, FREE_ALPHABET, symbol, cells or {})


def random_finite(rng, radius=2, weights=(3, 3, 2, 2)):
    """Random symbols on ``ball(radius)``, zeros outside."""
    cells = {g: rng.choices(SYMBOLS, weights)[0] for g in F2.ball(radius)}
    return uniform("0", cells)


def obstacle_with_binary_exterior(rng, n, outer):
    c = obstacle_config(n)
    cells = {g: rng.choice("01") for g in F2.ball(outer) if len(g) >= n}
    return c.with_cells(cells)


def one_step(cfg, window):
    return evolve(CA, cfg, window, 1).frames[1].cells


class TestPredicates:
    def test_free_examples(self):
        assert classify_free(uniform("0"), "ab")
        assert classify_free(obstacle_config(3), "aba")
        assert not classify_free(uniform(INTERIOR), "")

    def test_blocked_examples(self):
        assert classify_blocked(uniform(INTERIOR), "bA")
        assert classify_blocked(obstacle_config(4), "abb")
        assert not classify_blocked(uniform("0", {"": BOUNDARY}), "")
        assert not classify_blocked(uniform("0"), "a")

    def test_obstacle_sweeps(self):
        for n in (2, 3, 4):
            c = obstacle_config(n)
            assert all(classify_blocked(c, g) for g in F2.ball(n - 1))
            assert all(classify_free(c, g) for g in F2.sphere(n))
        c = obstacle_config(2)
        assert c.value_at("") == INTERIOR and {c.value_at(g) for g in F2.sphere(1)} == {BOUNDARY}
        assert c.value_at("ab") == "0"
        with pytest.raises(PreconditionError):
            obstacle_config(1)

    def test_nonzero_set(self):
        assert nonzero_set(uniform("0"), F2.ball(3)) == frozenset()
        assert nonzero_set(obstacle_config(3), F2.ball(4)) == frozenset(F2.ball(2))
        assert nonzero_set(uniform("0", {"": INTERIOR}), F2.ball(2)) == {""}


class TestRule:
    def test_single_one(self):
        c = uniform("0", {"": "1"})
        frame = one_step(c, F2.ball(2))
        assert all(frame[g] == ("1" if len(g) <= 1 else "0") for g in F2.ball(2))

    def test_fixed_points(self):
        assert all(v == INTERIOR for v in one_step(uniform(INTERIOR), F2.ball(2)).values())
        c = obstacle_config(3)
        assert all(one_step(c, F2.ball(5))[g] == c.value_at(g) for g in F2.ball(5))

    def test_vector_rule_matches_definitions(self):
        rng = random.Random(1)
        window = F2.ball(2)
        for _ in range(60):
            c = random_finite(rng)
            frame = one_step(c, window)
            values = {g: c.value_at(g) for g in F2.ball(5)}
            naive = free_step_naive(values, F2.generators)
            for g in window:
                assert frame[g] == rule_F(c, g) == naive[g]

    def test_lazy_matches_eager(self):
        rng = random.Random(2)
        window = F2.ball(1)
        for _ in range(20):
            c = random_finite(rng, 2)
            eager = evolve(CA, c, window, 4).frames
            lazy = LazyFreeBlock(c)
            for t in range(5):
                assert all(lazy.symbol(t, g) == eager[t][g] for g in window)

    def test_lazy_classes_match_naive(self):
        rng = random.Random(6)
        for _ in range(15):
            c = random_finite(rng, 2)
            values = {g: c.value_at(g) for g in F2.ball(5)}
            lazy = LazyFreeBlock(c)
            for t in range(4):
                for g in F2.ball(2):
                    want = BIN if values[g] in "01" else FREE_ALPHABET.index(values[g])
                    assert lazy.cls(t, g) == want
                values = free_step_naive(values, F2.generators)

    def test_xor_overlay(self):
        x = uniform("0", {"a": "1", "bb": "1"})
        region = F2.ball(2)
        assert set(xor_overlay(x, x, region).cells.values()) == {"0"}
        assert xor_overlay(x, uniform("0"), region).cells == {g: x.value_at(g) for g in region}
        both = xor_overlay(uniform("0", {"a": "1"}), uniform("0", {"B": "1"}), region)
        assert {g for g, v in both.cells.items() if v == "1"} == {"a", "B"}
        with pytest.raises(PreconditionError) as err:
            xor_overlay(x, obstacle_config(2), region)
        assert err.value.reason == "non-binary"


class TestLocalFacts:
    def test_radius_two_soundness(self):
        rng = random.Random(3)
        outer = F2.ball(5)
        for _ in range(500):
            c = random_finite(rng, 3)
            g = rng.choice(F2.ball(2))
            near = dependency_region(F2, [g], F2.ball(2), 1)
            far = [h for h in outer if h not in near]
            rewritten = c.with_cells({h: rng.choice(SYMBOLS) for h in rng.sample(far, 30)})
            assert rule_F(c, g) == rule_F(rewritten, g)

    def test_monotone_nonzero_set(self):
        rng = random.Random(4)
        region = F2.ball(2)
        for _ in range(500):
            c = random_finite(rng)
            after = Configuration(F2, Pattern(FREE_ALPHABET, one_step(c, region)), Uniform("0"))
            D0, D1 = nonzero_set(c, region), nonzero_set(after, region)
            assert D1 <= D0
            if all(classify_blocked(c, g) for g in D0):
                assert D1 == D0

    def test_all_blocked_keeps_nonzero_set(self):
        rng = random.Random(5)
        for n in (2, 3):
            for _ in range(20):
                c = obstacle_with_binary_exterior(rng, n, n + 3)
                region = F2.ball(n + 1)
                after = Configuration(F2, Pattern(FREE_ALPHABET, one_step(c, region)), Uniform("0"))
                assert nonzero_set(after, region) == nonzero_set(c, region) == frozenset(F2.ball(n - 1))

    def test_free_stays_free(self):
        rng = random.Random(7)
        for _ in range(500):
            lazy = LazyFreeBlock(random_finite(rng))
            for t in range(6):
                for g in F2.ball(2):
                    if lazy.free(t, g):
                        assert lazy.free(t + 1, g)

    def test_unblock_then_free(self):
        rng = random.Random(8)
        checked = 0
        for _ in range(300):
            c = random_finite(rng, 2, weights=(2, 2, 3, 3))
            lazy = LazyFreeBlock(c)
            for g in F2.ball(1):
                if c.value_at(g) in "01" and not classify_free(c, g):
                    checked += 1
                    assert lazy.free(1, g)
                    for h in lazy.neighbors(g):
                        if lazy.cls(0, h) != BIN:
                            assert lazy.state(1, h) == 0
        assert checked > 50

    def test_abelian_on_free_positions(self):
        rng = random.Random(9)
        for _ in range(1000):
            n = rng.choice((2, 3))
            outer = n + 3
            x1 = obstacle_with_binary_exterior(rng, n, outer)
            x2 = obstacle_with_binary_exterior(rng, n, outer)
            D = F2.ball(n - 1)
            binary_region = [g for g in F2.ball(outer) if len(g) >= n]
            s = obstacle_config(n).with_cells(xor_overlay(x1, x2, binary_region).cells)
            for g in rng.sample(F2.ball(n + 1), 10):
                if g in D:
                    continue
                a, b, both = rule_F(x1, g), rule_F(x2, g), rule_F(s, g)
                assert int(both) == (int(a) + int(b)) % 2


class TestNonsensitivity:
    def test_literal_statement_breaks_on_hand_example(self):
        # ι at aab and aaB leave aa with one binary neighbor, so β at a is not blocked
        c = obstacle_config(2)
        y = c.with_cells({"aab": INTERIOR, "aaB": INTERIOR})
        rep = experiment_nonsensitivity(2, 3, exteriors=[y])
        assert rep["violations"] == 1
        first = rep["per_trial"][0]["first_disagreement"]
        assert first["time"] == 1 and first["cell"] == "a" and first["perturbed"] == "0"

    @pytest.mark.parametrize("n", [2, 3])
    def test_agreement_one_step_further_suffices(self, n):
        rep = experiment_nonsensitivity(n, 10, trials=30, agree_radius=n + 1)
        assert rep["passed"] and rep["fixed_point"]["holds"]

    @pytest.mark.parametrize("n", [2, 3])
    def test_binary_exteriors_suffice(self, n):
        rep = experiment_nonsensitivity(n, 10, trials=30, exterior_symbols=("0", "1"))
        assert rep["passed"]

    def test_report_shape(self):
        rep = experiment_nonsensitivity(2, 5, trials=5, agree_radius=3)
        assert rep["trials"] == 5 and rep["window_radius"] == 1
        assert rep["per_trial"][0]["initial_distance"]["exponent"] >= 3
        assert [r["seed"] for r in rep["per_trial"]] == list(range(5))

    def test_adversarial_exterior_rejected(self):
        y = obstacle_config(3).with_cells({"ab": "0"})
        with pytest.raises(PreconditionError) as err:
            experiment_nonsensitivity(3, 2, exteriors=[y])
        assert err.value.reason == "perturbation-inside-ball"


class TestUniformInterior:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_separation(self, n):
        rep = experiment_uniform_interior(n)
        assert rep["passed"] and rep["uniform_at_origin"] == INTERIOR
        assert rep["flipped_at_origin"] in ("0", "1")

    def test_far_flip_not_felt_after_one_step(self):
        # a 0 at norm 3 is outside the radius-2 reach of the origin
        c = uniform(INTERIOR, {F2.sphere(3)[0]: "0"})
        assert evolve(CA, c, [""], 1).frames[1][""] == INTERIOR

    def test_guard(self):
        with pytest.raises(PreconditionError):
            experiment_uniform_interior(1)


class TestPropagation:
    @pytest.mark.parametrize("i", [1, 2, 3])
    def test_uniform_zero(self, i):
        rep = experiment_propagation(PropagationSpec(uniform("0"), "", 0, 2, i))
        assert rep["passed"] and rep["stabilization_time"] == 0
        assert rep["path"] == ["A" * j for j in range(i + 1)]
        assert rep["flip"] == "A" * i and rep["reaches_g_at"] == i
        assert [s["closest"] for s in rep["schedule"]] == [["A" * (i - k)] for k in range(i + 1)]

    def test_obstacle_medium(self):
        rep = experiment_propagation(PropagationSpec(obstacle_config(2), "aaa", 0, 4, 2))
        assert rep["passed"] and rep["path"][0] == "aaa" and rep["stable_after"]

    def test_settling_obstacle(self):
        # an unguarded ι melts at t=1, so the schedule starts one step later
        rep = experiment_propagation(PropagationSpec(uniform("0", {"b": INTERIOR}), "", 0, 2, 2))
        assert rep["stabilization_time"] == 1 and rep["nonzero_history"][:2] == [1, 0]
        assert rep["passed"] and rep["reaches_g_at"] == 3

    def test_guards(self):
        with pytest.raises(PreconditionError) as err:
            experiment_propagation(PropagationSpec(uniform("0"), "", 0, 2, 1, flip="ab"))
        assert err.value.reason == "flip-inside-ball"
        with pytest.raises(PreconditionError):
            experiment_propagation(PropagationSpec(uniform("0"), "a", 1, 3, 1))
        with pytest.raises(PreconditionError) as err:
            experiment_propagation(PropagationSpec(uniform(INTERIOR), "", 0, 2, 1))
        assert err.value.reason == "no-binary-cell"
        with pytest.raises(PreconditionError):
            experiment_propagation(PropagationSpec(uniform("0"), "", 0, 2, 0))

    def test_explicit_flip(self):
        rep = experiment_propagation(PropagationSpec(uniform("0"), "", 0, 2, 3, flip="AAA"))
        assert rep["passed"] and not rep["flip_derived"]


def test_dot_export():
    frame = Pattern(FREE_ALPHABET, {g: obstacle_config(2).value_at(g) for g in F2.ball(1)})
    dot = to_dot(F2, frame)
    assert dot.startswith("graph ball {") and dot.count(" -- ") == 4
    assert '"1:ι"' in dot
