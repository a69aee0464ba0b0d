"""Cellular automata over the supported groups, evaluated exactly on finite windows.

``Phi(x)(g) = mu((g^-1 x)|_S)``, i.e. the local rule reads ``x(g s)`` for
``s`` in the neighborhood.  To get ``Phi^t(x)`` on a window ``V`` with no
boundary artifacts we materialize the dependency cone ``D_T`` of ``V``
(``D_0 = V``, ``D_{t+1} = D_t u D_t S``) at time 0 and compute frame ``t``
on the shrinking layer ``D_{T-t}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import CapExceeded, ParseError, PreconditionError, UsageError
from .groups import Group, Integers, element_cap
from .patterns import BINARY, Alphabet, Configuration, Pattern, shift

TABLE_LIMIT = 1 << 16


@dataclass(frozen=True, eq=False)
class CellularAutomaton:
    """Alphabet, neighborhood ``S`` and local rule ``mu``.

    ``rule`` maps a tuple of symbol indices (in neighborhood declaration
    order) to a symbol index.  Small rules are tabulated at construction;
    large ones may supply ``vector_rule`` acting on an integer array whose
    last axis runs over the neighborhood.
    """

    name: str
    group: Group
    alphabet: Alphabet
    neighborhood: tuple
    rule: Callable | None = None
    vector_rule: Callable | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        S = tuple(self.neighborhood)
        object.__setattr__(self, "neighborhood", S)
        for s in S:
            self.group.check(s)
        if len(set(S)) != len(S):
            raise PreconditionError(f"neighborhood of {self.name} has duplicates")
        k, n = len(self.alphabet), len(S)
        weights = np.array([k ** (n - 1 - j) for j in range(n)], dtype=np.int64)
        object.__setattr__(self, "_weights", weights)
        if self.table is not None:
            table = np.asarray(self.table, dtype=np.uint8)
            if table.shape != (k**n,) or (table >= k).any():
                raise PreconditionError(f"rule table of {self.name} is not total over A^S")
            object.__setattr__(self, "table", table)
        elif self.rule is None:
            raise PreconditionError(f"{self.name}: a rule, vector rule or table is required")
        elif self.vector_rule is None and k**n <= TABLE_LIMIT:
            table = np.array(
                [self.rule(c) for c in itertools.product(range(k), repeat=n)], dtype=np.uint8
            )
            object.__setattr__(self, "table", table)

    @property
    def radius(self) -> int:
        return max(self.group.norm(s) for s in self.neighborhood)

    def local(self, indices: Sequence[int]) -> int:
        if self.table is not None:
            return int(self.table[int(np.dot(self._weights, indices))])
        return int(self.rule(tuple(indices)))

    def apply_indices(self, arr: np.ndarray) -> np.ndarray:
        """Vectorized ``mu`` over an array whose last axis is the neighborhood."""
        if self.table is not None:
            return self.table[arr.astype(np.int64) @ self._weights]
        if self.vector_rule is not None:
            return self.vector_rule(arr).astype(np.uint8)
        flat = arr.reshape(-1, arr.shape[-1])
        out = np.fromiter((self.rule(tuple(r)) for r in flat), dtype=np.uint8, count=len(flat))
        return out.reshape(arr.shape[:-1])

    def to_json(self) -> dict:
        if self.name in BUILTINS:
            return {"builtin": self.name}
        if self.table is None:
            raise ParseError(f"{self.name} has no table form")
        sep = "" if all(len(s) == 1 for s in self.alphabet) else ","
        k = len(self.alphabet)
        table = {}
        for code, combo in enumerate(itertools.product(range(k), repeat=len(self.neighborhood))):
            table[sep.join(self.alphabet[i] for i in combo)] = self.alphabet[int(self.table[code])]
        return {
            "alphabet": list(self.alphabet.symbols),
            "neighborhood": [self.group.format(s) for s in self.neighborhood],
            "table": table,
        }


@dataclass
class EvolutionResult:
    window: tuple
    frames: list
    dependency_size: int


class Cone:
    """Layered dependency region of ``window`` for ``horizon`` steps.

    ``elements[:sizes[t]]`` is ``D_t``; ``neighbors[i, j]`` is the index of
    ``elements[i] * S[j]`` for every ``i`` below ``sizes[horizon - 1]``.
    """

    def __init__(self, group: Group, neighborhood: Sequence, window: Iterable, horizon: int, cap: int | None = None):
        if horizon < 0:
            raise UsageError(f"horizon must be non-negative, got {horizon}")
        cap = element_cap() if cap is None else cap
        self.group = group
        self.neighborhood = tuple(neighborhood)
        self.horizon = horizon
        window = group.sorted(set(window))
        elements = list(window)
        index = {g: i for i, g in enumerate(elements)}
        sizes = [len(elements)]
        rows = []
        mul = group._mul
        S = self.neighborhood
        start = 0
        for _ in range(horizon):
            end = len(elements)
            for i in range(start, end):
                g = elements[i]
                row = []
                for s in S:
                    h = mul(g, s)
                    j = index.get(h)
                    if j is None:
                        j = len(elements)
                        index[h] = j
                        elements.append(h)
                    row.append(j)
                rows.append(row)
                if len(elements) > cap:
                    raise CapExceeded(
                        f"dependency region exceeds the cap of {cap} elements", reason="cap-exceeded"
                    )
            start = end
            sizes.append(len(elements))
        self.elements = elements
        self.index = index
        self.sizes = sizes
        self.window = tuple(window)
        self.neighbors = np.array(rows, dtype=np.int64).reshape(len(rows), len(S))

    def __len__(self):
        return len(self.elements)

    def materialize(self, cfg: Configuration, alphabet: Alphabet) -> np.ndarray:
        idx = alphabet._index
        values = cfg.values(self.elements)
        try:
            return np.fromiter((idx[s] for s in values), dtype=np.uint8, count=len(values))
        except KeyError as exc:
            raise PreconditionError(f"configuration symbol {exc} not in the CA alphabet")

    def run(self, ca: CellularAutomaton, states: np.ndarray) -> np.ndarray:
        """Frames on the window for a batch of initial states.

        ``states`` has shape ``(batch, len(self))``; the result has shape
        ``(horizon + 1, batch, len(window))``.
        """
        arr = np.array(states, dtype=np.uint8, copy=True)
        if arr.ndim == 1:
            arr = arr[None, :]
        w = len(self.window)
        frames = np.empty((self.horizon + 1, arr.shape[0], w), dtype=np.uint8)
        frames[0] = arr[:, :w]
        T = self.horizon
        for t in range(T):
            size = self.sizes[T - t - 1]
            arr[:, :size] = ca.apply_indices(arr[:, self.neighbors[:size]])
            frames[t + 1] = arr[:, :w]
        return frames


def apply_local(ca: CellularAutomaton, cfg: Configuration, g):
    """``Phi(cfg)(g)`` evaluated directly from the local rule."""
    ctx = ca.group
    idx = ca.alphabet._index
    vals = [idx[cfg.value_at(ctx._mul(g, s))] for s in ca.neighborhood]
    return ca.alphabet[ca.local(vals)]


def dependency_region(ctx: Group, V: Iterable, S: Sequence, T: int, cap: int | None = None) -> frozenset:
    return frozenset(Cone(ctx, S, V, T, cap).elements)


def evolve(ca: CellularAutomaton, cfg: Configuration, window: Iterable, T: int, cap: int | None = None) -> EvolutionResult:
    cone = Cone(ca.group, ca.neighborhood, window, T, cap)
    frames = cone.run(ca, cone.materialize(cfg, ca.alphabet))
    syms = ca.alphabet.symbols
    patterns = [
        Pattern(ca.alphabet, {g: syms[v] for g, v in zip(cone.window, frames[t, 0])})
        for t in range(T + 1)
    ]
    return EvolutionResult(cone.window, patterns, len(cone))


def check_equivariance(ca: CellularAutomaton, g, cfg: Configuration, V: Iterable, T: int) -> bool:
    """``Phi^t(g.x) = g.Phi^t(x)`` on ``V`` for every ``t <= T``."""
    ctx = ca.group
    V = list(V)
    ginv = ctx.inverse(g)
    lhs = evolve(ca, shift(ctx, g, cfg), V, T)
    rhs = evolve(ca, cfg, [ctx._mul(ginv, v) for v in V], T)
    return all(
        lhs.frames[t][v] == rhs.frames[t][ctx._mul(ginv, v)] for t in range(T + 1) for v in V
    )


# --- built-in automata -------------------------------------------------------


def identity_ca(group: Group, alphabet: Alphabet = BINARY) -> CellularAutomaton:
    return CellularAutomaton("identity", group, alphabet, (group.identity(),), rule=lambda c: c[0])


def _require_z(group: Group, name: str) -> Group:
    if not isinstance(group, Integers) or not group.standard:
        raise UsageError(f"built-in {name} is defined on Z only", reason="unknown-ca")
    return group


def xor_ca(group: Group | None = None) -> CellularAutomaton:
    group = _require_z(group or Integers(), "xor")
    return CellularAutomaton("xor", group, BINARY, (-1, 1), rule=lambda c: c[0] ^ c[1])


def and_ca(group: Group | None = None) -> CellularAutomaton:
    group = _require_z(group or Integers(), "and")
    return CellularAutomaton("and", group, BINARY, (-1, 0, 1), rule=lambda c: c[0] & c[1] & c[2])


WALL_ALPHABET = Alphabet(("0", "1", "W"))


def _xor_wall(c):
    left, centre, right = c
    if centre == 2:
        return 2
    return (left if left != 2 else 0) ^ (right if right != 2 else 0)


def xor_wall_ca(group: Group | None = None) -> CellularAutomaton:
    """XOR of the two neighbors, where a wall ``W`` is frozen and reads as 0."""
    group = _require_z(group or Integers(), "xor-wall")
    return CellularAutomaton("xor-wall", group, WALL_ALPHABET, (-1, 0, 1), rule=_xor_wall)


def _freeblock(group: Group) -> CellularAutomaton:
    from .freeca import freeblock_ca

    return freeblock_ca(group)


BUILTINS = {
    "identity": identity_ca,
    "xor": xor_ca,
    "and": and_ca,
    "xor-wall": xor_wall_ca,
    "freeblock": _freeblock,
}


def builtin(name: str, group: Group) -> CellularAutomaton:
    if name not in BUILTINS:
        raise UsageError(f"unknown built-in CA {name!r}", reason="unknown-ca")
    return BUILTINS[name](group)


def ca_from_json(group: Group, data: Mapping) -> CellularAutomaton:
    if "builtin" in data:
        return builtin(str(data["builtin"]), group)
    try:
        alphabet = Alphabet(tuple(data["alphabet"]))
        S = tuple(group.parse(s) for s in data["neighborhood"])
        raw = data["table"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed rule JSON: {exc}")
    sep = "" if all(len(s) == 1 for s in alphabet) else ","
    table = []
    for combo in itertools.product(alphabet.symbols, repeat=len(S)):
        key = sep.join(combo)
        if key not in raw:
            raise PreconditionError(f"rule table is not total: missing entry {key!r}", reason="rule-not-total")
        table.append(alphabet.index(str(raw[key])))
    return CellularAutomaton(str(data.get("name", "table")), group, alphabet, S, table=np.array(table))
