import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from groupca.errors import ParseError, PreconditionError
from groupca.freeca import FREE_ALPHABET, obstacle_config
from groupca.groups import FreeGroup, InfiniteDihedral, Integers
from groupca.patterns import (
    BINARY,
    Alphabet,
    Configuration,
    Pattern,
    Random,
    Uniform,
    cantor_distance,
    load_json,
    overlay,
    shift,
)

Z = Integers()
F2 = FreeGroup(2)
DINF = InfiniteDihedral()


def random_config(group, seed, radius=3, alphabet=BINARY):
    rng = random.Random(seed)
    cells = {g: rng.choice(alphabet.symbols) for g in group.ball(radius)}
    return Configuration(group, Pattern(alphabet, cells), Random(seed, alphabet.symbols))


class TestAlphabetAndPattern:
    def test_alphabet_rejects_duplicates(self):
        with pytest.raises(PreconditionError):
            Alphabet(("0", "0"))
        with pytest.raises(PreconditionError):
            Alphabet(())

    def test_pattern_rejects_foreign_symbols(self):
        with pytest.raises(PreconditionError):
            Pattern(BINARY, {0: "2"})

    def test_overlay(self):
        a = Pattern(BINARY, {0: "1", 1: "0"})
        b = Pattern(BINARY, {2: "1"})
        assert overlay(a, b).cells == {0: "1", 1: "0", 2: "1"}
        assert overlay(a, a) == a
        assert overlay(a, Pattern(BINARY, {1: "1"})).cells == {0: "1", 1: "1"}

    def test_json_round_trip(self):
        p = Pattern(FREE_ALPHABET, {"": "ι", "a": "β", "Ab": "1"})
        data = json.loads(json.dumps(p.to_json(F2)))
        assert data["cells"] == {"": "ι", "a": "β", "Ab": "1"}
        assert Pattern.from_json(F2, data) == p

    def test_restrict_and_translate(self):
        p = Pattern(BINARY, {0: "1", 3: "0"})
        assert p.restrict([0, 1]).cells == {0: "1"}
        assert p.translate(Z, 2).cells == {2: "1", 5: "0"}


class TestConfiguration:
    def test_value_at(self):
        cfg = Configuration.uniform(F2, BINARY, "0")
        assert cfg.value_at("abAB") == "0"
        cfg = Configuration.uniform(F2, BINARY, "0", {"": "1"})
        assert cfg.value_at("") == "1"
        assert obstacle_config(3).value_at("ab") == "β"

    def test_random_background_is_reproducible_and_total(self):
        bg = Random(5, BINARY.symbols)
        vals = [bg.value(F2, g) for g in F2.ball(3)]
        assert vals == [Random(5, BINARY.symbols).value(F2, g) for g in F2.ball(3)]
        assert set(vals) == {"0", "1"}

    @pytest.mark.parametrize("group", [Z, DINF, F2], ids=lambda g: g.descriptor)
    def test_json_round_trip(self, group, tmp_path):
        cfg = shift(group, group.generators[0], random_config(group, 3))
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_json()))
        back = Configuration.from_json(group, load_json(path))
        assert back.structurally_equal(cfg)
        assert all(back.value_at(g) == cfg.value_at(g) for g in group.ball(5))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_json(path)
        with pytest.raises(ParseError):
            Configuration.from_json(Z, {"alphabet": ["0"], "cells": {}, "background": {"kind": "nope"}})


class TestShift:
    def test_examples(self):
        cfg = Configuration.uniform(Z, BINARY, "0", {0: "1"})
        assert shift(Z, 0, cfg).structurally_equal(cfg)
        assert shift(Z, 2, cfg).base.cells == {2: "1"}
        b = Configuration.uniform(F2, FREE_ALPHABET, "0", {"": "β"})
        assert shift(F2, "a", b).base.cells == {"a": "β"}

    @pytest.mark.parametrize("group", [Z, DINF, F2], ids=lambda g: g.descriptor)
    def test_action_laws(self, group):
        rng = random.Random(11)
        for seed in range(20):
            cfg = random_config(group, seed)
            g = group.ball(2)[rng.randrange(len(group.ball(2)))]
            h = group.ball(2)[rng.randrange(len(group.ball(2)))]
            gh = shift(group, g, shift(group, h, cfg))
            direct = shift(group, group.multiply(g, h), cfg)
            ginv = group.inverse(g)
            moved = shift(group, g, cfg)
            for x in group.ball(4):
                assert gh.value_at(x) == direct.value_at(x)
                assert moved.value_at(x) == cfg.value_at(group.multiply(ginv, x))
            assert all(
                shift(group, group.identity(), cfg).value_at(x) == cfg.value_at(x) for x in group.ball(3)
            )


class TestCantorDistance:
    def test_examples(self):
        x = Configuration.uniform(F2, BINARY, "0")
        d = cantor_distance(F2, x, x, 5)
        assert (d.exponent, d.exact, d.value) == (5, False, 2**-5)
        y = x.with_cells({"abA": "1", "baba": "1"})
        d = cantor_distance(F2, x, y, 5)
        assert (d.exponent, d.exact) == (3, True)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(-6, 6), max_size=3), st.lists(st.integers(-6, 6), max_size=3),
           st.lists(st.integers(-6, 6), max_size=3))
    def test_symmetric_and_ultrametric(self, a, b, c):
        def cfg(ones):
            return Configuration.uniform(Z, BINARY, "0", {i: "1" for i in ones})

        x, y, z = cfg(a), cfg(b), cfg(c)
        probe = 7
        dxy, dyx = cantor_distance(Z, x, y, probe), cantor_distance(Z, y, x, probe)
        assert dxy == dyx
        dxz, dyz = cantor_distance(Z, x, z, probe), cantor_distance(Z, y, z, probe)
        assert dxz.value <= max(dxy.value, dyz.value)
