"""Exact arithmetic, word norms and balls for the supported group families.

Elements are plain immutable Python values so they can be hashed and
shared freely:

* ``Integers``        -- ``int``
* ``DirectProduct(m)`` -- ``(n, r)`` with ``0 <= r < m`` (Z x Z_m)
* ``InfiniteDihedral`` -- ``(n, e)`` with ``e in {0, 1}``; the product is
  ``(n1, e1)(n2, e2) = (n1 + (-1)**e1 * n2, e1 ^ e2)``
* ``FreeGroup(d)``     -- reduced ``str`` over ``a, b, ...`` with the
  upper-case letter standing for the inverse; ``""`` is the identity.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd
from typing import Iterable, Sequence

from .errors import CapExceeded, FamilyMismatch, ParseError, UsageError

DEFAULT_ELEMENT_CAP = 10**7


def element_cap() -> int:
    """Ball/region size cap; ``GROUPCA_CAP_ELEMS`` overrides the default."""
    raw = os.environ.get("GROUPCA_CAP_ELEMS")
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"GROUPCA_CAP_ELEMS must be an integer, got {raw!r}")
    return DEFAULT_ELEMENT_CAP


def _check_cap(size: int, cap: int | None, what: str) -> None:
    cap = element_cap() if cap is None else cap
    if size > cap:
        raise CapExceeded(f"{what} has {size} elements, above the cap of {cap}")


class Group:
    """Common interface of the group families.

    ``multiply``/``inverse`` validate their arguments; the underscored
    ``_mul``/``_inv`` skip validation and are what the hot loops call.
    """

    generators: tuple

    def identity(self):
        raise NotImplementedError

    def _mul(self, g, h):
        raise NotImplementedError

    def _inv(self, g):
        raise NotImplementedError

    def norm(self, g) -> int:
        raise NotImplementedError

    def contains(self, g) -> bool:
        raise NotImplementedError

    def format(self, g) -> str:
        raise NotImplementedError

    def parse(self, s: str):
        raise NotImplementedError

    def ball_size(self, k: int) -> int:
        raise NotImplementedError

    @property
    def descriptor(self) -> str:
        raise NotImplementedError

    def check(self, g):
        if not self.contains(g):
            raise FamilyMismatch(f"{g!r} is not an element of {self.descriptor}")
        return g

    def multiply(self, g, h):
        return self._mul(self.check(g), self.check(h))

    def inverse(self, g):
        return self._inv(self.check(g))

    def product(self, *elements):
        out = self.identity()
        for g in elements:
            out = self._mul(out, self.check(g))
        return out

    def sort_key(self, g):
        return (self.norm(g), self.format(g))

    def sorted(self, elements: Iterable) -> list:
        return sorted(elements, key=self.sort_key)

    def ball(self, k: int, cap: int | None = None) -> tuple:
        """All elements of norm at most ``k``, ordered by (norm, serialization)."""
        if k < 0:
            raise UsageError(f"ball radius must be non-negative, got {k}")
        _check_cap(self.ball_size(k), cap, f"ball({k}) in {self.descriptor}")
        return self._bfs_ball(k)

    def sphere(self, k: int, cap: int | None = None) -> tuple:
        return tuple(g for g in self.ball(k, cap) if self.norm(g) == k)

    def _bfs_ball(self, k: int) -> tuple:
        # BFS over the Cayley graph; each level sorted by serialization.
        seen = {self.identity()}
        level = [self.identity()]
        out = list(level)
        for _ in range(k):
            nxt = set()
            for g in level:
                for e in self.generators:
                    h = self._mul(g, e)
                    if h not in seen:
                        seen.add(h)
                        nxt.add(h)
            level = sorted(nxt, key=self.format)
            out.extend(level)
        return tuple(out)

    def __str__(self):
        return self.descriptor


def _parse_int(s: str) -> int:
    if not re.fullmatch(r"[+-]?\d+", s):
        raise ParseError(f"not an integer: {s!r}")
    return int(s)


@lru_cache(maxsize=None)
def _z_norm(gens: tuple, n: int) -> int:
    if n == 0:
        return 0
    seen = {0}
    level = {0}
    dist = 0
    while True:
        dist += 1
        level = {x + e for x in level for e in gens} - seen
        if n in level:
            return dist
        seen |= level


@dataclass(frozen=True)
class Integers(Group):
    generators: tuple = (1, -1)

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        if not gens or 0 in gens:
            raise UsageError("Z generators must be non-empty and exclude 0")
        if any(-e not in gens for e in gens):
            raise UsageError("Z generators must be closed under inverses")
        g = 0
        for e in gens:
            g = gcd(g, e)
        if g != 1:
            raise UsageError(f"{gens} does not generate Z")

    @property
    def standard(self) -> bool:
        return set(self.generators) == {1, -1}

    def identity(self):
        return 0

    def _mul(self, g, h):
        return g + h

    def _inv(self, g):
        return -g

    def norm(self, g) -> int:
        if self.standard:
            return abs(g)
        return _z_norm(self.generators, g)

    def contains(self, g) -> bool:
        return type(g) is int

    def format(self, g) -> str:
        return str(g)

    def parse(self, s: str):
        return _parse_int(s.strip())

    def ball_size(self, k: int) -> int:
        if self.standard:
            return 2 * k + 1
        return 2 * k * max(self.generators) + 1

    def ball(self, k: int, cap: int | None = None) -> tuple:
        if self.standard and k >= 0:
            _check_cap(2 * k + 1, cap, f"ball({k}) in Z")
            out = [0]
            for j in range(1, k + 1):
                out += [-j, j]
            return tuple(out)
        return super().ball(k, cap)

    @property
    def descriptor(self) -> str:
        if self.standard:
            return "z"
        return "z:" + ",".join(str(e) for e in sorted(e for e in self.generators if e > 0))


@dataclass(frozen=True)
class DirectProduct(Group):
    """Z x Z_m with generators (+-1, 0) and (0, j) for j != 0."""

    m: int
    generators: tuple = field(init=False)

    def __post_init__(self):
        if self.m < 1:
            raise UsageError(f"DirectProduct needs m >= 1, got {self.m}")
        gens = ((1, 0), (-1, 0)) + tuple((0, j) for j in range(1, self.m))
        object.__setattr__(self, "generators", gens)

    def identity(self):
        return (0, 0)

    def _mul(self, g, h):
        return (g[0] + h[0], (g[1] + h[1]) % self.m)

    def _inv(self, g):
        return (-g[0], (-g[1]) % self.m)

    def norm(self, g) -> int:
        return abs(g[0]) + (1 if g[1] else 0)

    def contains(self, g) -> bool:
        return (
            type(g) is tuple
            and len(g) == 2
            and type(g[0]) is int
            and type(g[1]) is int
            and 0 <= g[1] < self.m
        )

    def format(self, g) -> str:
        return f"({g[0]},{g[1]})"

    def parse(self, s: str):
        mt = re.fullmatch(r"\(\s*([+-]?\d+)\s*,\s*(\d+)\s*\)", s.strip())
        if not mt:
            raise ParseError(f"not a Z x Z_{self.m} element: {s!r}")
        g = (int(mt.group(1)), int(mt.group(2)))
        if g[1] >= self.m:
            raise ParseError(f"residue {g[1]} out of range for m={self.m}")
        return g

    def ball_size(self, k: int) -> int:
        # |n| + [r != 0] <= k
        return 2 * k + 1 + (self.m - 1) * max(0, 2 * k - 1)

    @property
    def descriptor(self) -> str:
        return f"dp:{self.m}"


@dataclass(frozen=True)
class InfiniteDihedral(Group):
    """Z semidirect Z_2 with generators (+-1, 0) and the reflection (0, 1)."""

    generators: tuple = field(init=False, default=((1, 0), (-1, 0), (0, 1)))

    def identity(self):
        return (0, 0)

    def _mul(self, g, h):
        return (g[0] - h[0] if g[1] else g[0] + h[0], g[1] ^ h[1])

    def _inv(self, g):
        return g if g[1] else (-g[0], 0)

    def norm(self, g) -> int:
        return abs(g[0]) + g[1]

    def contains(self, g) -> bool:
        return (
            type(g) is tuple
            and len(g) == 2
            and type(g[0]) is int
            and g[1] in (0, 1)
            and type(g[1]) is int
        )

    def format(self, g) -> str:
        return f"({g[0]},{g[1]})"

    def parse(self, s: str):
        mt = re.fullmatch(r"\(\s*([+-]?\d+)\s*,\s*([01])\s*\)", s.strip())
        if not mt:
            raise ParseError(f"not an infinite dihedral element: {s!r}")
        return (int(mt.group(1)), int(mt.group(2)))

    def ball_size(self, k: int) -> int:
        return max(1, 4 * k)

    @property
    def descriptor(self) -> str:
        return "dinf"


@dataclass(frozen=True)
class FreeGroup(Group):
    rank: int = 2
    generators: tuple = field(init=False)

    def __post_init__(self):
        if not 2 <= self.rank <= 26:
            raise UsageError(f"free group rank must be in [2, 26], got {self.rank}")
        low = "abcdefghijklmnopqrstuvwxyz"[: self.rank]
        object.__setattr__(self, "generators", tuple(sorted(low + low.upper())))

    @property
    def letters(self) -> str:
        return "".join(self.generators)

    def identity(self):
        return ""

    def _mul(self, g, h):
        n = min(len(g), len(h))
        i = 0
        lg = len(g)
        while i < n and g[lg - 1 - i] == h[i].swapcase():
            i += 1
        if i:
            return g[: lg - i] + h[i:]
        return g + h

    def _inv(self, g):
        return g[::-1].swapcase()

    def norm(self, g) -> int:
        return len(g)

    def contains(self, g) -> bool:
        if type(g) is not str:
            return False
        letters = self.generators
        prev = ""
        for ch in g:
            if ch not in letters or ch == prev.swapcase():
                return False
            prev = ch
        return True

    def format(self, g) -> str:
        return g

    def parse(self, s: str):
        s = s.strip()
        if s in ("1", "e"):
            return ""
        if not self.contains(s):
            raise ParseError(f"not a reduced word of F_{self.rank}: {s!r}")
        return s

    def ball_size(self, k: int) -> int:
        d2 = 2 * self.rank
        return 1 + d2 * ((d2 - 1) ** k - 1) // (d2 - 2)

    def _bfs_ball(self, k: int) -> tuple:
        # Extending a sorted level by sorted letters keeps it sorted.
        out = [""]
        level = [""]
        letters = self.generators
        for _ in range(k):
            nxt = []
            for w in level:
                last = w[-1:].swapcase()
                for ch in letters:
                    if ch != last or not w:
                        nxt.append(w + ch)
            out.extend(nxt)
            level = nxt
        return tuple(out)

    def sort_key(self, g):
        return (len(g), g)

    @property
    def descriptor(self) -> str:
        return f"free:{self.rank}"


def parse_group(desc: str) -> Group:
    """``z``, ``z:2,3``, ``dp:3``, ``dinf`` or ``free:2``."""
    d = desc.strip().lower()
    try:
        if d in ("z", "integers"):
            return Integers()
        if d.startswith("z:"):
            pos = [int(x) for x in d[2:].split(",") if x]
            return Integers(tuple(pos) + tuple(-x for x in pos))
        if d.startswith("dp:"):
            return DirectProduct(int(d[3:]))
        if d in ("dinf", "d_inf", "dihedral"):
            return InfiniteDihedral()
        if d.startswith("free:"):
            return FreeGroup(int(d[5:]))
        if d == "free":
            return FreeGroup(2)
    except ValueError:
        pass
    raise UsageError(f"unknown group {desc!r}", reason="unknown-group")


def check_ball_inclusion(ctx1: Group, ctx2: Group, k1: int) -> int:
    """Smallest ``k2`` with ``B_1(1, k1)`` inside ``B_2(1, k2)``.

    Both contexts must be presentations of Z (generating sets may differ).
    """
    if not (isinstance(ctx1, Integers) and isinstance(ctx2, Integers)):
        raise FamilyMismatch("ball inclusion is supported for Z only", reason="unsupported-family")
    return max(ctx2.norm(g) for g in ctx1.ball(k1))


def format_elements(ctx: Group, elements: Sequence) -> list:
    return [ctx.format(g) for g in ctx.sorted(elements)]


def parse_elements(ctx: Group, items: Sequence[str]) -> list:
    return [ctx.parse(s) for s in items]
