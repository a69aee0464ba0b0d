"""Finite patterns, total configurations, the G-shift and the Cantor metric.

A configuration is a finite ``base`` pattern laid over a ``background``
rule that assigns a symbol to every group element.  The background is
read through an ``offset`` element, ``value_at(g) = bg(offset^-1 g)``, so
shifting never needs to materialize anything: it just moves the base
cells and composes the offset.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import ParseError, PreconditionError
from .groups import Group


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not syms:
            raise PreconditionError("alphabet must be non-empty")
        if len(set(syms)) != len(syms):
            raise PreconditionError(f"alphabet symbols must be distinct: {syms}")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(syms)})

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, s):
        return s in self._index

    def index(self, s) -> int:
        try:
            return self._index[s]
        except KeyError:
            raise PreconditionError(f"symbol {s!r} not in alphabet {self.symbols}")

    def __getitem__(self, i):
        return self.symbols[i]


BINARY = Alphabet(("0", "1"))


@dataclass(frozen=True, eq=False)
class Pattern:
    """A map from a finite set of group elements to symbols."""

    alphabet: Alphabet
    cells: Mapping = field(default_factory=dict)

    def __post_init__(self):
        cells = dict(self.cells)
        for g, s in cells.items():
            if s not in self.alphabet:
                raise PreconditionError(f"symbol {s!r} at {g!r} not in alphabet")
        object.__setattr__(self, "cells", cells)

    @property
    def support(self) -> frozenset:
        return frozenset(self.cells)

    def __len__(self):
        return len(self.cells)

    def __getitem__(self, g):
        return self.cells[g]

    def __contains__(self, g):
        return g in self.cells

    def get(self, g, default=None):
        return self.cells.get(g, default)

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        return self.alphabet == other.alphabet and self.cells == other.cells

    def restrict(self, region: Iterable) -> "Pattern":
        region = set(region)
        return Pattern(self.alphabet, {g: s for g, s in self.cells.items() if g in region})

    def translate(self, ctx: Group, g) -> "Pattern":
        """The pattern ``g.u`` with support ``gL`` and values ``u(g^-1 .)``."""
        return Pattern(self.alphabet, {ctx._mul(g, h): s for h, s in self.cells.items()})

    def overlay(self, patch: "Pattern") -> "Pattern":
        return overlay(self, patch)

    def to_json(self, ctx: Group) -> dict:
        return {
            "alphabet": list(self.alphabet.symbols),
            "cells": {ctx.format(g): self.cells[g] for g in ctx.sorted(self.cells)},
        }

    @classmethod
    def from_json(cls, ctx: Group, data: Mapping) -> "Pattern":
        try:
            alphabet = Alphabet(tuple(data["alphabet"]))
            cells = {ctx.parse(k): str(v) for k, v in data.get("cells", {}).items()}
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed pattern JSON: {exc}")
        return cls(alphabet, cells)


def overlay(base: Pattern, patch: Pattern) -> Pattern:
    """Union of supports; ``patch`` wins where both are defined."""
    if base.alphabet != patch.alphabet:
        raise PreconditionError("cannot overlay patterns over different alphabets")
    cells = dict(base.cells)
    cells.update(patch.cells)
    return Pattern(base.alphabet, cells)


# --- backgrounds -----------------------------------------------------------

BACKGROUND_KINDS: dict = {}


def register_background(kind: str):
    def deco(cls):
        cls.kind = kind
        BACKGROUND_KINDS[kind] = cls
        return cls

    return deco


@register_background("uniform")
@dataclass(frozen=True)
class Uniform:
    symbol: str

    def value(self, ctx: Group, g) -> str:
        return self.symbol

    def to_json(self, ctx: Group) -> dict:
        return {"kind": "uniform", "symbol": self.symbol}

    @classmethod
    def from_json(cls, ctx: Group, data: Mapping, alphabet: Alphabet):
        return cls(str(data["symbol"]))


@register_background("random")
@dataclass(frozen=True)
class Random:
    """Seeded pseudo-random symbol per element, total on the whole group.

    The symbol at ``g`` is a hash of ``(seed, serialization of g)``, so the
    configuration is reproducible and needs no storage.
    """

    seed: int
    symbols: tuple

    def value(self, ctx: Group, g) -> str:
        digest = hashlib.blake2b(
            f"{self.seed}|{ctx.format(g)}".encode(), digest_size=8
        ).digest()
        return self.symbols[int.from_bytes(digest, "little") % len(self.symbols)]

    def to_json(self, ctx: Group) -> dict:
        return {"kind": "random", "seed": self.seed, "symbols": list(self.symbols)}

    @classmethod
    def from_json(cls, ctx: Group, data: Mapping, alphabet: Alphabet):
        return cls(int(data["seed"]), tuple(data.get("symbols", alphabet.symbols)))


@dataclass(frozen=True, eq=False)
class Configuration:
    """Total configuration: ``base`` on its support, ``background`` elsewhere."""

    ctx: Group
    base: Pattern
    background: object
    offset: object = None

    def __post_init__(self):
        if self.offset is None:
            object.__setattr__(self, "offset", self.ctx.identity())
        if isinstance(self.background, Uniform):
            object.__setattr__(self, "offset", self.ctx.identity())
            if self.background.symbol not in self.base.alphabet:
                raise PreconditionError(f"background symbol {self.background.symbol!r} not in alphabet")

    @property
    def alphabet(self) -> Alphabet:
        return self.base.alphabet

    @classmethod
    def uniform(cls, ctx: Group, alphabet: Alphabet, symbol, cells=None) -> "Configuration":
        return cls(ctx, Pattern(alphabet, cells or {}), Uniform(symbol))

    def value_at(self, g):
        s = self.base.cells.get(g)
        if s is not None:
            return s
        if isinstance(self.background, Uniform):
            return self.background.symbol
        ctx = self.ctx
        return self.background.value(ctx, ctx._mul(ctx._inv(self.offset), g))

    def values(self, elements: Iterable) -> list:
        cells = self.base.cells
        if isinstance(self.background, Uniform):
            sym = self.background.symbol
            return [cells.get(g, sym) for g in elements]
        return [self.value_at(g) for g in elements]

    def materialize(self, region: Iterable) -> Pattern:
        region = list(region)
        return Pattern(self.alphabet, dict(zip(region, self.values(region))))

    def with_cells(self, cells: Mapping) -> "Configuration":
        """Same configuration with the given cells overwritten."""
        patch = Pattern(self.alphabet, cells)
        return Configuration(self.ctx, overlay(self.base, patch), self.background, self.offset)

    def structurally_equal(self, other: "Configuration") -> bool:
        return (
            self.ctx == other.ctx
            and self.base == other.base
            and self.background == other.background
            and self.offset == other.offset
        )

    def to_json(self) -> dict:
        out = self.base.to_json(self.ctx)
        out["background"] = self.background.to_json(self.ctx)
        if self.offset != self.ctx.identity():
            out["offset"] = self.ctx.format(self.offset)
        return out

    @classmethod
    def from_json(cls, ctx: Group, data: Mapping) -> "Configuration":
        base = Pattern.from_json(ctx, data)
        bg_data = data.get("background", {"kind": "uniform", "symbol": base.alphabet[0]})
        kind = bg_data.get("kind") if isinstance(bg_data, Mapping) else None
        if kind not in BACKGROUND_KINDS:
            raise ParseError(f"unknown background kind {kind!r}")
        try:
            background = BACKGROUND_KINDS[kind].from_json(ctx, bg_data, base.alphabet)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed {kind} background: {exc}")
        offset = ctx.parse(data["offset"]) if "offset" in data else None
        return cls(ctx, base, background, offset)


def shift(ctx: Group, g, cfg: Configuration) -> Configuration:
    """The G-shift ``g.x = x o L_{g^-1}``: ``(g.x)(h) = x(g^-1 h)``."""
    ctx.check(g)
    return Configuration(
        cfg.ctx, cfg.base.translate(ctx, g), cfg.background, ctx._mul(g, cfg.offset)
    )


@dataclass(frozen=True)
class CantorDistance:
    """``2**-exponent``; when ``exact`` is false it is only an upper bound."""

    exponent: int
    exact: bool

    @property
    def value(self) -> float:
        return 2.0 ** -self.exponent

    def to_json(self) -> dict:
        return {"exponent": self.exponent, "value": self.value, "exact": self.exact}


def cantor_distance(ctx: Group, x: Configuration, y: Configuration, probe_radius: int) -> CantorDistance:
    """Cantor distance from the least-norm disagreement inside ``ball(probe_radius)``."""
    for g in ctx.ball(probe_radius):
        if x.value_at(g) != y.value_at(g):
            return CantorDistance(ctx.norm(g), True)
    return CantorDistance(probe_radius, False)


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON: {exc}")


def function_background(fn: Callable) -> object:
    """Background from an arbitrary callable ``(ctx, g) -> symbol``; not serializable."""
    return _FunctionBackground(fn)


@dataclass(frozen=True)
class _FunctionBackground:
    fn: Callable
    kind = "function"

    def value(self, ctx: Group, g):
        return self.fn(ctx, g)

    def to_json(self, ctx: Group) -> dict:
        raise ParseError("function backgrounds cannot be serialized")
