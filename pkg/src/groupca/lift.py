"""Lifting a CA from a subgroup ``H`` to the free group ``G`` containing it.

Shipped embeddings: ``Z = <a>`` inside ``F_d``, and ``F_d'`` on the first
``d'`` letters inside ``F_d``.  In both cases an element ``g`` factors as
``g = f h`` where ``h`` is the longest suffix spelled with ``H``-letters;
``f`` is then the shortest element of the coset ``gH``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .engine import CellularAutomaton, dependency_region, evolve
from .errors import PreconditionError, UsageError
from .groups import FreeGroup, Group, Integers, parse_group
from .patterns import Configuration, Pattern, Uniform, register_background


class SubgroupEmbedding:
    def __init__(self, big: FreeGroup, sub: Group):
        if not isinstance(big, FreeGroup):
            raise UsageError("the ambient group must be free", reason="unsupported-family")
        if isinstance(sub, Integers):
            if not sub.standard:
                raise UsageError("Z must use its standard generators to embed as <a>")
            letters = "aA"
        elif isinstance(sub, FreeGroup):
            if sub.rank >= big.rank:
                raise UsageError(f"F_{sub.rank} does not embed as a proper letter subgroup of F_{big.rank}")
            letters = sub.letters
        else:
            raise UsageError(f"cannot embed {sub.descriptor} in a free group", reason="unsupported-family")
        self.big = big
        self.sub = sub
        self.letters = frozenset(letters)

    @property
    def descriptor(self) -> str:
        sub = "z-as-a" if isinstance(self.sub, Integers) else self.sub.descriptor
        return f"{self.big.descriptor}>{sub}"

    def embed(self, h):
        """Image in ``G`` of an element of ``H``."""
        if isinstance(self.sub, Integers):
            return "a" * h if h >= 0 else "A" * -h
        return self.sub.check(h)

    def to_sub(self, g):
        """Inverse of :meth:`embed` on ``H``."""
        if not self.in_H(g):
            raise PreconditionError(f"{self.big.format(g)} is not in H")
        if isinstance(self.sub, Integers):
            return len(g) if g[:1] == "a" else -len(g)
        return g

    def in_H(self, g) -> bool:
        return all(ch in self.letters for ch in g)

    def embedded_generators(self) -> tuple:
        return tuple(self.embed(e) for e in self.sub.generators)


def coset_rep(emb: SubgroupEmbedding, g):
    """``g`` with its longest ``H``-lettered suffix removed."""
    g = emb.big.check(g)
    i = len(g)
    while i and g[i - 1] in emb.letters:
        i -= 1
    return g[:i]


def decompose(emb: SubgroupEmbedding, g) -> tuple:
    """``(f, h)`` with ``f = coset_rep(g)`` and ``h = f^-1 g``, both as elements of ``G``."""
    f = coset_rep(emb, g)
    return f, g[len(f):]


def project_pi(emb: SubgroupEmbedding, g):
    """``pi(g) = f^-1 g`` in ``H``'s own coordinates."""
    return emb.to_sub(decompose(emb, g)[1])


def omega(emb: SubgroupEmbedding, g) -> int:
    """Distance from the identity to the coset ``gH``."""
    return len(coset_rep(emb, g))


def h_norm(emb: SubgroupEmbedding, g) -> int:
    return emb.sub.norm(project_pi(emb, g))


def coset_reps(emb: SubgroupEmbedding, radius: int) -> list:
    return [f for f in emb.big.ball(radius) if coset_rep(emb, f) == f]


@dataclass(frozen=True)
class RectangleSpec:
    k: int
    l: int

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise PreconditionError("rectangle height and length must be non-negative")


def rectangle(emb: SubgroupEmbedding, spec: RectangleSpec) -> frozenset:
    """``R(k, l)``: one ``H``-ball of radius ``l`` through every coset rep of norm at most ``k``."""
    segment = [emb.embed(h) for h in emb.sub.ball(spec.l)]
    mul = emb.big._mul
    return frozenset(mul(f, h) for f in coset_reps(emb, spec.k) for h in segment)


def lambda_of(emb: SubgroupEmbedding, k: int) -> int:
    return max(h_norm(emb, g) for g in emb.big.ball(k))


def check_rectangle_inclusions(emb: SubgroupEmbedding, k: int, l: int) -> dict:
    """``R(k,l)`` inside ``ball(k+l)`` and ``ball(k)`` inside ``R(k, Lambda(k))``."""
    big = emb.big
    lam = lambda_of(emb, k)
    rect = rectangle(emb, RectangleSpec(k, l))
    outside = [g for g in rect if big.norm(g) > k + l]
    cover = rectangle(emb, RectangleSpec(k, lam))
    uncovered = [g for g in big.ball(k) if g not in cover]
    return {
        "k": k,
        "l": l,
        "lambda": lam,
        "rectangle_size": len(rect),
        "rectangle_in_ball": not outside,
        "rectangle_outside": [big.format(g) for g in big.sorted(outside)],
        "ball_in_rectangle": not uncovered,
        "ball_uncovered": [big.format(g) for g in big.sorted(uncovered)],
        "passed": not outside and not uncovered,
    }


def lift_ca(emb: SubgroupEmbedding, ca: CellularAutomaton) -> CellularAutomaton:
    """Same alphabet and local rule, neighborhood read inside ``G``."""
    if ca.group != emb.sub:
        raise PreconditionError("the CA does not live on the embedded subgroup", reason="neighborhood-not-in-H")
    S = tuple(emb.embed(s) for s in ca.neighborhood)
    return CellularAutomaton(
        f"{ca.name}@{emb.big.descriptor}", emb.big, ca.alphabet, S,
        rule=ca.rule, vector_rule=ca.vector_rule, table=ca.table,
    )


@register_background("coset-pullback")
@dataclass(frozen=True, eq=False)
class CosetPullback:
    """``x' = x o pi``: every coset carries a copy of the ``H``-configuration."""

    emb: SubgroupEmbedding
    config: Configuration

    def value(self, ctx: Group, g) -> str:
        return self.config.value_at(project_pi(self.emb, g))

    def __eq__(self, other):
        return (
            isinstance(other, CosetPullback)
            and other.emb.descriptor == self.emb.descriptor
            and other.config.structurally_equal(self.config)
        )

    def to_json(self, ctx: Group) -> dict:
        sub = "z-as-a" if isinstance(self.emb.sub, Integers) else self.emb.sub.descriptor
        return {"kind": "coset-pullback", "sub": sub, "config": self.config.to_json()}

    @classmethod
    def from_json(cls, ctx: Group, data: Mapping, alphabet):
        emb = SubgroupEmbedding(ctx, parse_sub(data["sub"]))
        return cls(emb, Configuration.from_json(emb.sub, data["config"]))


def parse_sub(text: str) -> Group:
    if text in ("z-as-a", "z"):
        return Integers()
    return parse_group(text)


def pullback_config(emb: SubgroupEmbedding, x: Configuration) -> Configuration:
    return Configuration(emb.big, Pattern(x.alphabet, {}), CosetPullback(emb, x))


def coset_restriction(emb: SubgroupEmbedding, x: Configuration, f, region: Iterable) -> Configuration:
    """``(f^-1 x)|_H`` on a finite ``H``-region, over ``H``'s coordinates."""
    mul = emb.big._mul
    cells = {h: x.value_at(mul(f, emb.embed(h))) for h in region}
    return Configuration(emb.sub, Pattern(x.alphabet, cells), Uniform(x.alphabet[0]))


def transplant(emb: SubgroupEmbedding, x: Configuration, f_from, f_to, region: Iterable, onto: Configuration) -> Configuration:
    """``onto`` overwritten so that its coset ``f_to H`` copies ``x``'s coset ``f_from H`` on ``region``."""
    mul = emb.big._mul
    cells = {mul(f_to, emb.embed(h)): x.value_at(mul(f_from, emb.embed(h))) for h in region}
    return onto.with_cells(cells)


def _coset_frames(emb, ca_G, x, f, window_H, T):
    mul = emb.big._mul
    cells = [mul(f, emb.embed(h)) for h in window_H]
    res = evolve(ca_G, x, cells, T)
    return [[res.frames[t][g] for g in cells] for t in range(T + 1)]


def check_parallel_dynamics(
    emb: SubgroupEmbedding,
    ca: CellularAutomaton,
    x: Configuration,
    T: int,
    window_radius: int,
    reps_radius: int = 2,
) -> dict:
    """``(f^-1 Phi_G^t(x))|_H = Phi_H^t((f^-1 x)|_H)`` on ``B_H(window_radius)`` for each rep ``f``.

    ``f`` = identity is the plain restriction identity.
    """
    ca_G = lift_ca(emb, ca)
    window = emb.sub.ball(window_radius)
    region = dependency_region(emb.sub, window, ca.neighborhood, T)
    per_rep = []
    for f in coset_reps(emb, reps_radius):
        g_frames = _coset_frames(emb, ca_G, x, f, window, T)
        y = coset_restriction(emb, x, f, region)
        h_res = evolve(ca, y, window, T)
        bad = [
            (t, h) for t in range(T + 1) for j, h in enumerate(window)
            if g_frames[t][j] != h_res.frames[t][h]
        ]
        per_rep.append({
            "rep": emb.big.format(f),
            "violations": len(bad),
            "first": None if not bad else {"time": bad[0][0], "cell": emb.sub.format(bad[0][1])},
        })
    violations = sum(r["violations"] for r in per_rep)
    return {
        "embedding": emb.descriptor,
        "ca": ca.name,
        "horizon": T,
        "window_radius": window_radius,
        "reps_radius": reps_radius,
        "reps": len(per_rep),
        "h_dependency_size": len(region),
        "violations": violations,
        "per_rep": per_rep,
        "passed": violations == 0,
    }


def check_coset_transfer(
    emb: SubgroupEmbedding,
    ca: CellularAutomaton,
    x1: Configuration,
    f1,
    x2: Configuration,
    f2,
    T: int,
    window_radius: int,
) -> dict:
    """If ``x1`` on ``f1 H`` matches ``x2`` on ``f2 H`` (on the dependency region), so do their orbits."""
    ca_G = lift_ca(emb, ca)
    window = emb.sub.ball(window_radius)
    region = dependency_region(emb.sub, window, ca.neighborhood, T)
    mul = emb.big._mul
    hyp = all(
        x1.value_at(mul(f1, emb.embed(h))) == x2.value_at(mul(f2, emb.embed(h))) for h in region
    )
    if not hyp:
        raise PreconditionError("the two cosets do not carry the same H-configuration", reason="coset-mismatch")
    a = _coset_frames(emb, ca_G, x1, f1, window, T)
    b = _coset_frames(emb, ca_G, x2, f2, window, T)
    violations = sum(a[t][j] != b[t][j] for t in range(T + 1) for j in range(len(window)))
    return {"horizon": T, "window_radius": window_radius, "violations": violations, "passed": violations == 0}
