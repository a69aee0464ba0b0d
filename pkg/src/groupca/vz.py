"""Spine machinery for virtually-Z groups.

``G`` has a finite-index subgroup ``H`` with an isomorphism ``phi: H -> Z``
and a fundamental domain ``F`` of right-coset representatives containing
the identity.  Every ``g`` splits uniquely as ``g = z f`` and ``p(g) =
phi(z)`` projects ``G`` onto the integer spine.  Sections are preimages
of finite intervals; blocking words whose region is a long enough section
cut the dynamics into independent left and right arms, which is what lets
blocking words be glued and repeated periodically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .blocking import (
    DEFAULT_ENUMERATION_CAP,
    EXHAUSTIVE,
    BlockingQuery,
    Exhaustive,
    Sampled,
    extend_restrict,
    search_blocking,
    translate_blocking,
    verify_blocking,
)
from .engine import CellularAutomaton, Cone
from .errors import CapExceeded, GroupCAError, HypothesisNotEstablished, PreconditionError, UsageError
from .groups import DirectProduct, Group, InfiniteDihedral, Integers
from .patterns import Configuration, Pattern, register_background


class VZStructure:
    """Decomposition data ``(H, phi, F)`` for one of the shipped families."""

    def __init__(self, ctx: Group):
        self.ctx = ctx
        if isinstance(ctx, Integers):
            if not ctx.standard:
                raise UsageError("virtually-Z structure needs the standard generators of Z")
            self.domain = (0,)
        elif isinstance(ctx, DirectProduct):
            self.domain = tuple((0, j) for j in range(ctx.m))
        elif isinstance(ctx, InfiniteDihedral):
            self.domain = ((0, 0), (0, 1))
        else:
            raise UsageError(f"{ctx.descriptor} is not a supported virtually-Z group")

    def __eq__(self, other):
        return isinstance(other, VZStructure) and other.ctx == self.ctx

    def __hash__(self):
        return hash(("vz", self.ctx))

    def in_H(self, g) -> bool:
        if isinstance(self.ctx, Integers):
            return True
        return g[1] == 0

    def phi(self, h) -> int:
        if not self.in_H(h):
            raise PreconditionError(f"{self.ctx.format(h)} is not in H")
        return h if isinstance(self.ctx, Integers) else h[0]

    def phi_inv(self, n: int):
        return n if isinstance(self.ctx, Integers) else (n, 0)

    def decompose(self, g):
        """The unique ``(z, f)`` in ``H x F`` with ``g = z f``."""
        ctx = self.ctx
        for f in self.domain:
            z = ctx._mul(g, ctx._inv(f))
            if self.in_H(z):
                return z, f
        raise AssertionError(f"no decomposition for {g!r}")

    def project_p(self, g) -> int:
        return self.phi(self.decompose(g)[0])

    def vertebra(self, k: int) -> tuple:
        z = self.phi_inv(k)
        return tuple(self.ctx._mul(z, f) for f in self.domain)

    def section_elements(self, a: int, b: int) -> tuple:
        return tuple(g for k in range(a, b + 1) for g in self.vertebra(k))

    def section_of(self, region: Iterable) -> "Section | None":
        """The section equal to ``region``, if it is one."""
        region = set(region)
        if not region:
            return None
        ps = [self.project_p(g) for g in region]
        sec = Section(min(ps), max(ps))
        if set(sec.elements(self)) == region:
            return sec
        return None

    def impact_at(self, s, k: int) -> int:
        ctx = self.ctx
        return max(abs(self.project_p(ctx._mul(g, s)) - self.project_p(g)) for g in self.vertebra(k))

    def impact(self, s) -> int:
        """``max |p(g s) - p(g)|`` over the 0-th vertebra (the same on every vertebra)."""
        self.ctx.check(s)
        return self.impact_at(s, 0)

    def delta(self, ca: CellularAutomaton) -> int:
        return max(self.impact(s) for s in ca.neighborhood)


@dataclass(frozen=True)
class Section:
    a: int
    b: int

    def __post_init__(self):
        if self.a > self.b:
            raise PreconditionError(f"empty section [{self.a}, {self.b}]")

    @property
    def length(self) -> int:
        return self.b - self.a + 1

    def contains(self, vz: VZStructure, g) -> bool:
        return self.a <= vz.project_p(g) <= self.b

    def elements(self, vz: VZStructure) -> tuple:
        return vz.section_elements(self.a, self.b)


def section_translate(vz: VZStructure, h, sec: Section) -> Section:
    """``h V_[a,b] = V_[phi(h)+a, phi(h)+b]`` for ``h`` in ``H``."""
    n = vz.phi(vz.ctx.check(h))
    return Section(sec.a + n, sec.b + n)


def delta(vz: VZStructure, ca: CellularAutomaton) -> int:
    return vz.delta(ca)


def impact(vz: VZStructure, s) -> int:
    return vz.impact(s)


def project_p(vz: VZStructure, g) -> int:
    return vz.project_p(g)


def vertebra(vz: VZStructure, k: int) -> tuple:
    return vz.vertebra(k)


# --- periodic configurations ------------------------------------------------


@register_background("periodic-vz")
@dataclass(frozen=True, eq=False)
class PeriodicVZ:
    """``x = u o m`` with ``m(g) = phi^-1(p(g) mod n+1) phi^-1(p(g))^-1 g``."""

    vz: VZStructure
    word: Pattern
    n: int

    def fold(self, g):
        vz, ctx = self.vz, self.vz.ctx
        p = vz.project_p(g)
        return ctx._mul(ctx._mul(vz.phi_inv(p % (self.n + 1)), ctx._inv(vz.phi_inv(p))), g)

    def value(self, ctx: Group, g) -> str:
        return self.word.cells[self.fold(g)]

    def __eq__(self, other):
        return (
            isinstance(other, PeriodicVZ)
            and (self.vz, self.word, self.n) == (other.vz, other.word, other.n)
        )

    def to_json(self, ctx: Group) -> dict:
        return {"kind": "periodic-vz", "n": self.n, "word": self.word.to_json(ctx)["cells"]}

    @classmethod
    def from_json(cls, ctx: Group, data: Mapping, alphabet):
        word = Pattern(alphabet, {ctx.parse(k): str(v) for k, v in data["word"].items()})
        return cls(VZStructure(ctx), word, int(data["n"]))


def periodic_config_from_word(vz: VZStructure, u: Pattern) -> Configuration:
    """Configuration covered by translated copies of ``u`` along the spine.

    ``u`` must be supported exactly on a section ``V_[0,n]``.
    """
    sec = vz.section_of(u.support)
    if sec is None or sec.a != 0:
        raise PreconditionError("periodic word must be supported exactly on V_[0,n]", reason="support-mismatch")
    return Configuration(vz.ctx, Pattern(u.alphabet, {}), PeriodicVZ(vz, u, sec.b))


def normalize_word(vz: VZStructure, q: BlockingQuery) -> BlockingQuery:
    """Translate so the support starts at vertebra 0 and extend it to ``V_[0,n]``.

    Cells added by the extension take the first alphabet symbol.
    """
    ps = [vz.project_p(g) for g in q.support]
    lo, hi = min(ps), max(ps)
    moved = translate_blocking(vz.ctx, vz.phi_inv(-lo), q)
    cells = {g: moved.word.alphabet[0] for g in vz.section_elements(0, hi - lo)}
    cells.update(moved.word.cells)
    return extend_restrict(moved, Pattern(moved.word.alphabet, cells), moved.region)


# --- disconnection and gluing -----------------------------------------------


def _require_section(vz: VZStructure, region, what: str) -> Section:
    sec = vz.section_of(region)
    if sec is None:
        raise PreconditionError(f"{what} is not a section", reason="not-a-section")
    return sec


def _require_blocking(ca, q, mode, cap, what):
    c = verify_blocking(ca, q, mode, cap)
    if not c.blocking:
        raise PreconditionError(f"{what} is not blocking at horizon {q.horizon}", reason="not-blocking")
    return c


def check_disconnect(
    vz: VZStructure,
    ca: CellularAutomaton,
    q: BlockingQuery,
    T: int | None = None,
    width: int = 1,
    mode=EXHAUSTIVE,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> dict:
    """Left and right arms of a blocked section evolve independently.

    For configurations carrying ``u`` on ``L`` and agreeing on one arm,
    frames must agree on a ``width``-vertebrae window of that arm for every
    ``t <= T``.  Exhaustive mode enumerates all exterior assignments of the
    window's dependency cone and groups them by their values on the arm.
    """
    ctx = vz.ctx
    T = q.horizon if T is None else T
    sec = _require_section(vz, q.region, "blocked region")
    d = vz.delta(ca)
    if sec.length < d:
        raise PreconditionError(f"section length {sec.length} is below delta {d}", reason="section-too-short")
    _require_blocking(ca, q, EXHAUSTIVE if isinstance(mode, Exhaustive) else mode, cap, "word")

    idx = ca.alphabet._index
    k = len(ca.alphabet)
    arms = {}
    for side in ("+", "-"):
        lo, hi = (sec.b + 1, sec.b + width) if side == "+" else (sec.a - width, sec.a - 1)
        cone = Cone(ctx, ca.neighborhood, vz.section_elements(lo, hi), T)
        base = np.zeros(len(cone), dtype=np.uint8)
        for g, s in q.word.cells.items():
            if g in cone.index:
                base[cone.index[g]] = idx[s]
        open_cells = ctx.sorted(g for g in cone.elements if g not in q.word.cells)
        on_arm = (lambda g: vz.project_p(g) > sec.b) if side == "+" else (lambda g: vz.project_p(g) < sec.a)
        shared = [g for g in open_cells if on_arm(g)]
        free = [g for g in open_cells if not on_arm(g)]
        order = np.array([cone.index[g] for g in shared + free], dtype=np.int64)
        m = len(order)

        def simulate(rows):
            states = np.broadcast_to(base, (len(rows), len(cone))).copy()
            if m:
                states[:, order] = rows
            return cone.run(ca, states)

        checked = 0
        violations = 0
        first = None
        if isinstance(mode, Exhaustive):
            total = k**m
            if total > cap:
                raise CapExceeded(f"{total} arm assignments exceed the cap {cap}; use sampled mode")
            block = k ** len(free)
            powers = np.array([k ** (m - 1 - j) for j in range(m)], dtype=np.int64)
            step = max(block, (1 << 15) // block * block)
            for start in range(0, total, step):
                codes = np.arange(start, min(total, start + step), dtype=np.int64)
                rows = ((codes[:, None] // powers) % k).astype(np.uint8)
                frames = simulate(rows)
                heads = codes - codes % block
                uniq, inverse = np.unique(heads, return_inverse=True)
                ref = simulate(((uniq[:, None] // powers) % k).astype(np.uint8))
                bad = (frames != ref[:, inverse, :]).any(axis=(0, 2))
                checked += len(codes)
                violations += int(bad.sum())
                if bad.any() and first is None:
                    first = int(codes[np.argmax(bad)])
        else:
            rng = np.random.default_rng(mode.seed)
            xs = rng.integers(0, k, size=(mode.trials, m), dtype=np.uint8)
            ys = xs.copy()
            ys[:, len(shared):] = rng.integers(0, k, size=(mode.trials, len(free)), dtype=np.uint8)
            bad = (simulate(xs) != simulate(ys)).any(axis=(0, 2))
            checked = mode.trials
            violations = int(bad.sum())
            if bad.any():
                first = int(np.argmax(bad))
        arms[side] = {
            "window": [lo, hi],
            "dependency_size": len(cone),
            "shared_cells": len(shared),
            "free_cells": len(free),
            "checked": checked,
            "violations": violations,
            "first_violation": first,
        }
    total_violations = sum(a["violations"] for a in arms.values())
    return {
        "delta": d,
        "section": [sec.a, sec.b],
        "horizon": T,
        "mode": mode.to_json(),
        "arms": arms,
        "violations": total_violations,
        "passed": total_violations == 0,
    }


def glue(
    vz: VZStructure,
    ca: CellularAutomaton,
    q1: BlockingQuery,
    q2: BlockingQuery,
    filler: Configuration,
    mode=EXHAUSTIVE,
    cap: int = DEFAULT_ENUMERATION_CAP,
    verify: bool = True,
) -> BlockingQuery:
    """Glue two section-blocking words into one blocking ``V_[a1, b2]``.

    Requires supports ``L_i = V_[p_i, q_i]`` and regions ``V_i = V_[a_i, b_i]``
    with ``p_i <= a_i <= b_i <= q_i``, ``q_1 < p_2`` and ``l(V_i) >= delta``.
    The glued word is ``filler`` on ``V_[p1, q2]``; ``filler`` must carry
    both words.
    """
    if q1.horizon != q2.horizon:
        raise PreconditionError("glued words must share a horizon", reason="horizon-mismatch")
    L1 = _require_section(vz, q1.support, "support of the first word")
    L2 = _require_section(vz, q2.support, "support of the second word")
    V1 = _require_section(vz, q1.region, "region of the first word")
    V2 = _require_section(vz, q2.region, "region of the second word")
    for L, V in ((L1, V1), (L2, V2)):
        if not L.a <= V.a <= V.b <= L.b:
            raise PreconditionError(f"need p <= a <= b <= q, got L={L} V={V}", reason="ordering")
    if not L1.b < L2.a:
        raise PreconditionError(f"need q1 < p2, got q1={L1.b} p2={L2.a}", reason="ordering")
    d = vz.delta(ca)
    if V1.length < d or V2.length < d:
        raise PreconditionError(f"blocked sections must have length >= delta={d}", reason="section-too-short")
    for q in (q1, q2):
        for g, s in q.word.cells.items():
            if filler.value_at(g) != s:
                raise PreconditionError(f"filler disagrees with a glued word at {vz.ctx.format(g)}", reason="filler")
    _require_blocking(ca, q1, mode, cap, "first word")
    _require_blocking(ca, q2, mode, cap, "second word")
    word = filler.materialize(vz.section_elements(L1.a, L2.b))
    glued = BlockingQuery(word, frozenset(vz.section_elements(V1.a, V2.b)), q1.horizon)
    if verify:
        c = verify_blocking(ca, glued, mode, cap)
        if not c.blocking:
            raise GroupCAError(f"glued word is not blocking: {c.counterexample}", reason="glue-failed")
    return glued


# --- equicontinuity points --------------------------------------------------


def _subsections(lo: int, hi: int, min_len: int):
    for length in range(hi - lo + 1, min_len - 1, -1):
        for a in range(lo, hi - length + 2):
            yield a, a + length - 1


def find_arm_word(
    vz: VZStructure,
    ca: CellularAutomaton,
    x: Configuration,
    k: int,
    side: str,
    T: int,
    max_width: int = 6,
    search_span: int = 12,
    mode=EXHAUSTIVE,
    cap: int = DEFAULT_ENUMERATION_CAP,
):
    """First subword of ``x`` beyond vertebra ``+-k`` blocking a section longer than delta.

    Returns ``(query, certificate)`` or None.
    """
    d = vz.delta(ca)
    for offset in range(1, search_span + 1):
        edge = k + offset
        for width in range(d + 1, max_width + 1):
            lo, hi = (edge, edge + width - 1) if side == "+" else (-edge - width + 1, -edge)
            word = x.materialize(vz.section_elements(lo, hi))
            for a, b in _subsections(lo, hi, d + 1):
                q = BlockingQuery(word, frozenset(vz.section_elements(a, b)), T)
                try:
                    c = verify_blocking(ca, q, mode, cap)
                except CapExceeded:
                    continue
                if c.blocking:
                    return q, c
    return None


def equicontinuity_witness_check(
    vz: VZStructure,
    ca: CellularAutomaton,
    x: Configuration,
    k: int,
    T: int,
    max_width: int = 6,
    search_span: int = 12,
    mode=EXHAUSTIVE,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> dict:
    """Finite-scale check that ``x`` is an equicontinuity point at precision ``2**-k``.

    Hypothesis: blocking subwords of ``x`` beyond ``-k`` and ``+k`` whose
    regions are sections longer than delta.  Conclusion: gluing them gives
    a word ``x|_L`` whose region contains ``ball(k)``, and every ``y`` that
    agrees with ``x`` on ``ball(p)`` (``L`` inside ``ball(p)``) has the
    same frames as ``x`` on ``ball(k)`` up to ``T``.
    """
    ctx = vz.ctx
    d = vz.delta(ca)
    left = find_arm_word(vz, ca, x, k, "-", T, max_width, search_span, mode, cap)
    right = find_arm_word(vz, ca, x, k, "+", T, max_width, search_span, mode, cap)
    if left is None or right is None:
        missing = [s for s, w in (("left", left), ("right", right)) if w is None]
        raise HypothesisNotEstablished(
            f"no blocking word found on the {' and '.join(missing)} arm(s) within the search bounds"
        )
    glued = glue(vz, ca, left[0], right[0], x, mode, cap, verify=False)
    glued_cert = verify_blocking(ca, glued, mode, cap)
    ball_k = ctx.ball(k)
    ball_in_region = set(ball_k) <= glued.region
    radius = max(abs(vz.project_p(g)) for g in glued.support) + 1
    support_in_ball = all(ctx.norm(g) <= radius for g in glued.support)
    conclusion = BlockingQuery(x.materialize(ctx.ball(radius)), frozenset(ball_k), T)
    conclusion_cert = verify_blocking(ca, conclusion, mode, cap)
    violations = 0 if conclusion_cert.blocking else 1
    passed = glued_cert.blocking and ball_in_region and support_in_ball and conclusion_cert.blocking
    return {
        "k": k,
        "epsilon": 2.0**-k,
        "horizon": T,
        "delta": d,
        "left": left[1].to_json(ctx),
        "right": right[1].to_json(ctx),
        "glued": glued_cert.to_json(ctx),
        "ball_in_region": ball_in_region,
        "agreement_radius": radius,
        "support_in_ball": support_in_ball,
        "conclusion": conclusion_cert.to_json(ctx),
        "violations": violations,
        "passed": passed,
    }


def _random_element(ctx: Group, rng: random.Random, max_len: int):
    g = ctx.identity()
    for _ in range(rng.randint(0, max_len)):
        g = ctx._mul(g, rng.choice(ctx.generators))
    return g


def check_periodicity(vz: VZStructure, x: Configuration, samples: int = 1000, seed: int = 0) -> dict:
    """``x(h g) = x(g)`` for ``h = phi^-1(n+1)`` on random ``g``, and ``x|_L = u``."""
    bg = x.background
    if not isinstance(bg, PeriodicVZ):
        raise PreconditionError("configuration is not periodic along the spine")
    ctx = vz.ctx
    h = vz.phi_inv(bg.n + 1)
    rng = random.Random(seed)
    failures = 0
    for _ in range(samples):
        g = _random_element(ctx, rng, 60)
        if x.value_at(ctx._mul(h, g)) != x.value_at(g):
            failures += 1
    restriction_ok = all(x.value_at(g) == s for g, s in bg.word.cells.items())
    return {"samples": samples, "seed": seed, "period": bg.n + 1, "failures": failures,
            "restriction_ok": restriction_ok, "passed": failures == 0 and restriction_ok}


def largest_central_section(vz: VZStructure, region: Iterable) -> Section | None:
    """Longest section ``V_[a,b]`` inside ``region`` that contains vertebra 0."""
    region = set(region)
    full = lambda j: all(g in region for g in vz.vertebra(j))
    if not full(0):
        return None
    a = b = 0
    while full(a - 1):
        a -= 1
    while full(b + 1):
        b += 1
    return Section(a, b)


def equicontinuity_pipeline(
    vz: VZStructure,
    ca: CellularAutomaton,
    k: int,
    max_support_radius: int,
    T: int,
    witness_k: int | None = None,
    witness_T: int | None = None,
    samples: int = 1000,
    seed: int = 0,
    mode=EXHAUSTIVE,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> dict:
    """Blocking word -> periodic configuration -> equicontinuity witness."""
    ctx = vz.ctx
    witness_k = k if witness_k is None else witness_k
    witness_T = T if witness_T is None else witness_T
    q = search_blocking(ca, k, max_support_radius, T, mode, cap)
    if q is None:
        raise HypothesisNotEstablished(f"no ball({k})-blocking word within radius {max_support_radius}")
    sec = largest_central_section(vz, q.region)
    d = vz.delta(ca)
    if sec is None or sec.length < d:
        raise HypothesisNotEstablished("blocked region contains no section of length >= delta")
    q = extend_restrict(q, q.word, sec.elements(vz))
    normal = normalize_word(vz, q)
    x = periodic_config_from_word(vz, normal.word)
    periodicity = check_periodicity(vz, x, samples, seed)
    witness = equicontinuity_witness_check(vz, ca, x, witness_k, witness_T, mode=mode, cap=cap)
    return {
        "search": {"k": k, "max_support_radius": max_support_radius, "horizon": T,
                   "word": q.to_json(ctx)},
        "normalized": normal.to_json(ctx),
        "configuration": x.to_json(),
        "periodicity": periodicity,
        "witness": witness,
        "passed": periodicity["passed"] and witness["passed"],
    }
