"""The obstacle automaton on the free group.

Binary cells behave like XOR with every binary neighbor; ``ι`` and ``β``
cells form obstacles that survive only while they stay *blocked*.  The
automaton is not sensitive (obstacles shield their interior) yet has no
equicontinuity point (a binary cell anywhere lets far-away perturbations
travel inward).  The experiments here check both facts at finite scale.

Besides the eager cone engine, :class:`LazyFreeBlock` evaluates cells on
demand.  It tracks the class of each cell (binary, ``ι`` or ``β``), which
evolves on its own, and only computes binary values when asked; that is
what makes long horizons around an obstacle affordable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .engine import CellularAutomaton, evolve
from .errors import PreconditionError, UsageError
from .groups import FreeGroup, Group
from .patterns import Alphabet, Configuration, Pattern, Random, Uniform, cantor_distance

INTERIOR = "ι"
BOUNDARY = "β"
FREE_ALPHABET = Alphabet(("0", "1", INTERIOR, BOUNDARY))
BINARY_SYMBOLS = ("0", "1")
_I, _B = 2, 3  # alphabet indices of ι and β
BIN = -1  # class of a binary cell


def _require_free(ctx) -> FreeGroup:
    if not isinstance(ctx, FreeGroup):
        raise UsageError("the obstacle automaton lives on a free group", reason="unknown-ca")
    return ctx


# --- predicates straight from the definitions ---------------------------------


def _is_binary(s) -> bool:
    return s in BINARY_SYMBOLS


def classify_free(cfg: Configuration, g) -> bool:
    """``c_g`` binary and at least two binary neighbors."""
    ctx = cfg.ctx
    if not _is_binary(cfg.value_at(g)):
        return False
    return sum(_is_binary(cfg.value_at(ctx._mul(g, e))) for e in ctx.generators) >= 2


def classify_blocked(cfg: Configuration, g) -> bool:
    ctx = cfg.ctx
    c = cfg.value_at(g)
    nbrs = [ctx._mul(g, e) for e in ctx.generators]
    if c == INTERIOR:
        return all(cfg.value_at(h) in (INTERIOR, BOUNDARY) for h in nbrs)
    if c == BOUNDARY:
        inner = [h for h in nbrs if cfg.value_at(h) == INTERIOR]
        return len(inner) == 1 and all(classify_free(cfg, h) for h in nbrs if h != inner[0])
    return False


def rule_F(cfg: Configuration, g) -> str:
    """One step of the automaton at ``g``."""
    ctx = cfg.ctx
    c = cfg.value_at(g)
    if _is_binary(c):
        total = int(c)
        for e in ctx.generators:
            v = cfg.value_at(ctx._mul(g, e))
            if _is_binary(v):
                total += int(v)
        return str(total % 2)
    if classify_blocked(cfg, g):
        return c
    return "0"


def nonzero_set(cfg: Configuration, region: Iterable) -> frozenset:
    """Cells of ``region`` whose state is not binary."""
    return frozenset(g for g in region if not _is_binary(cfg.value_at(g)))


def xor_overlay(x1: Configuration, x2: Configuration, region: Iterable) -> Pattern:
    cells = {}
    for g in region:
        a, b = x1.value_at(g), x2.value_at(g)
        if not (_is_binary(a) and _is_binary(b)):
            raise PreconditionError(f"non-binary cell at {x1.ctx.format(g)}", reason="non-binary")
        cells[g] = str((int(a) + int(b)) % 2)
    return Pattern(FREE_ALPHABET, cells)


def obstacle_config(n: int, d: int = 2, ctx: FreeGroup | None = None) -> Configuration:
    """``ι`` on ``ball(n-2)``, ``β`` on the sphere of radius ``n-1``, 0 elsewhere."""
    if n < 2:
        raise PreconditionError(f"obstacle radius must be at least 2, got {n}", reason="obstacle-radius")
    ctx = ctx or FreeGroup(d)
    cells = {g: (INTERIOR if len(g) <= n - 2 else BOUNDARY) for g in ctx.ball(n - 1)}
    return Configuration(ctx, Pattern(FREE_ALPHABET, cells), Uniform("0"))


# --- the automaton as a radius-2 vector rule -----------------------------------


def _neighbor_layout(ctx: FreeGroup):
    S = ctx.ball(2)
    pos = {g: i for i, g in enumerate(S)}
    E = ctx.generators
    first = np.array([pos[e] for e in E])
    second = np.array([[pos[ctx._mul(e, f)] for f in E] for e in E])
    return S, first, second


def _vector_step(arr: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    c = arr[..., 0]
    nb = arr[..., first]
    nb_bin = nb < 2
    total = (c + np.where(nb_bin, nb, 0).sum(axis=-1)) % 2
    # freeness of each neighbor from its own neighbors (radius 2)
    nb_free = nb_bin & ((arr[..., second] < 2).sum(axis=-1) >= 2)
    is_i = nb == _I
    blocked_i = (c == _I) & (~nb_bin).all(axis=-1)
    blocked_b = (c == _B) & (is_i.sum(axis=-1) == 1) & (is_i | nb_free).all(axis=-1)
    out = np.where(c < 2, total, np.where(blocked_i | blocked_b, c, 0))
    return out.astype(np.uint8)


def freeblock_ca(group: Group | None = None) -> CellularAutomaton:
    ctx = _require_free(group or FreeGroup(2))
    S, first, second = _neighbor_layout(ctx)

    def vector_rule(arr):
        return _vector_step(np.asarray(arr), first, second)

    def rule(indices):
        return int(vector_rule(np.asarray(indices, dtype=np.uint8)[None, :])[0])

    return CellularAutomaton("freeblock", ctx, FREE_ALPHABET, S, rule=rule, vector_rule=vector_rule)


# --- lazy evaluation ----------------------------------------------------------


class LazyFreeBlock:
    """Memoized on-demand evaluation of ``F^t(c)`` cell by cell.

    The class of a cell (binary, ``ι``, ``β``) at time ``t+1`` depends only
    on classes at time ``t``, and a binary cell stays binary, so class
    queries stop as soon as they reach binary cells.  Binary values are
    computed from the previous frame's binary neighbors.
    """

    def __init__(self, cfg: Configuration):
        self.cfg = cfg
        self.ctx = _require_free(cfg.ctx)
        self._idx = FREE_ALPHABET._index
        self._init: dict = {}
        self._cls: dict = {}
        self._val: dict = {}
        self._nbrs: dict = {}

    def neighbors(self, g) -> tuple:
        out = self._nbrs.get(g)
        if out is None:
            mul = self.ctx._mul
            out = self._nbrs[g] = tuple(mul(g, e) for e in self.ctx.generators)
        return out

    def initial(self, g) -> int:
        v = self._init.get(g)
        if v is None:
            v = self._init[g] = self._idx[self.cfg.value_at(g)]
        return v

    def cls(self, t: int, g) -> int:
        v0 = self.initial(g)
        if v0 < 2:
            return BIN
        if t == 0:
            return v0
        key = (t, g)
        out = self._cls.get(key)
        if out is None:
            # walk forward from the latest cached time to avoid deep recursion
            s = t - 1
            while s > 0 and (s, g) not in self._cls:
                s -= 1
            for u in range(s, t):
                prev = self.cls(u, g)
                self._cls[(u + 1, g)] = BIN if prev == BIN or not self.blocked(u, g) else prev
            out = self._cls[key]
        return out

    def free(self, t: int, g) -> bool:
        if self.cls(t, g) != BIN:
            return False
        count = 0
        for h in self.neighbors(g):
            if self.cls(t, h) == BIN:
                count += 1
                if count >= 2:
                    return True
        return False

    def blocked(self, t: int, g) -> bool:
        c = self.cls(t, g)
        if c == _I:
            return all(self.cls(t, h) != BIN for h in self.neighbors(g))
        if c == _B:
            inner = 0
            for h in self.neighbors(g):
                if self.cls(t, h) == _I:
                    inner += 1
                    if inner > 1:
                        return False
                elif not self.free(t, h):
                    return False
            return inner == 1
        return False

    def state(self, t: int, g) -> int:
        """Alphabet index of ``F^t(c)_g``."""
        c = self.cls(t, g)
        if c != BIN:
            return c
        if t == 0:
            return self.initial(g)
        if self.cls(t - 1, g) != BIN:
            return 0
        key = (t, g)
        out = self._val.get(key)
        if out is None:
            total = self.state(t - 1, g)
            for h in self.neighbors(g):
                if self.cls(t - 1, h) == BIN:
                    total += self.state(t - 1, h)
            out = self._val[key] = total % 2
        return out

    def symbol(self, t: int, g) -> str:
        return FREE_ALPHABET[self.state(t, g)]

    def frame(self, t: int, window: Iterable) -> Pattern:
        return Pattern(FREE_ALPHABET, {g: self.symbol(t, g) for g in window})

    def nonzero(self, t: int, region: Iterable) -> frozenset:
        return frozenset(g for g in region if self.cls(t, g) != BIN)


# --- experiments --------------------------------------------------------------


def _trial_exterior(ctx, obstacle: Configuration, agree_radius: int, seed: int, symbols) -> Configuration:
    base = obstacle.materialize(ctx.ball(agree_radius))
    return Configuration(ctx, base, Random(seed, tuple(symbols)))


def experiment_nonsensitivity(
    n: int,
    T: int,
    trials: int = 100,
    seed: int = 0,
    d: int = 2,
    agree_radius: int | None = None,
    exterior_symbols: Sequence[str] = FREE_ALPHABET.symbols,
    exteriors: Sequence[Configuration] | None = None,
    fixed_point_radius: int | None = None,
) -> dict:
    """Perturb the obstacle outside ``ball(agree_radius)`` and watch ``ball(n-1)``.

    Trial ``j`` uses a pseudo-random exterior seeded by ``seed + j`` over
    ``exterior_symbols``; explicit ``exteriors`` replace the random ones and
    must agree with the obstacle on ``ball(agree_radius)``.  Also checks
    that one step fixes the obstacle on ``ball(fixed_point_radius)``
    (default ``n+2``).
    """
    ctx = FreeGroup(d)
    agree_radius = n if agree_radius is None else agree_radius
    c = obstacle_config(n, ctx=ctx)
    agree_ball = ctx.ball(agree_radius)
    if exteriors is not None:
        for y in exteriors:
            if any(y.value_at(g) != c.value_at(g) for g in agree_ball):
                raise PreconditionError(
                    f"perturbed configuration differs from the obstacle inside ball({agree_radius})",
                    reason="perturbation-inside-ball",
                )
        perturbed = list(exteriors)
    else:
        perturbed = [_trial_exterior(ctx, c, agree_radius, seed + j, exterior_symbols) for j in range(trials)]

    window = ctx.ball(n - 1)
    ref = LazyFreeBlock(c)
    ref_frames = [[ref.state(t, g) for g in window] for t in range(T + 1)]
    results = []
    for j, y in enumerate(perturbed):
        lazy = LazyFreeBlock(y)
        first = None
        for t in range(T + 1):
            for g, want in zip(window, ref_frames[t]):
                if lazy.state(t, g) != want:
                    first = {"time": t, "cell": ctx.format(g),
                             "reference": FREE_ALPHABET[want], "perturbed": lazy.symbol(t, g)}
                    break
            if first is not None:
                break
        bound = cantor_distance(ctx, c, y, agree_radius + 1)
        results.append({
            "trial": j,
            "seed": seed + j if exteriors is None else None,
            "initial_distance": bound.to_json(),
            "frames_agree": first is None,
            "first_disagreement": first,
        })

    radius = n + 2 if fixed_point_radius is None else fixed_point_radius
    step = evolve(freeblock_ca(ctx), c, ctx.ball(radius), 1)
    fixed = all(step.frames[1][g] == c.value_at(g) for g in step.window)
    violations = sum(not r["frames_agree"] for r in results)
    return {
        "n": n,
        "d": d,
        "horizon": T,
        "agree_radius": agree_radius,
        "exterior_symbols": list(exterior_symbols),
        "window_radius": n - 1,
        "frame_distance_bound": 2.0 ** -n,
        "trials": len(results),
        "violations": violations,
        "fixed_point": {"radius": radius, "holds": fixed},
        "per_trial": results,
        "passed": violations == 0 and fixed,
    }


def experiment_uniform_interior(n: int, d: int = 2, cap: int | None = None) -> dict:
    """Uniform ``ι`` keeps ``ι`` at the origin; one 0 at distance ``n`` reaches it in ``n`` steps."""
    if n < 2:
        raise PreconditionError(f"uniform-interior experiment needs n >= 2, got {n}", reason="radius-too-small")
    ctx = FreeGroup(d)
    ca = freeblock_ca(ctx)
    flip = ctx.sphere(n)[0]
    c = Configuration.uniform(ctx, FREE_ALPHABET, INTERIOR)
    cn = c.with_cells({flip: "0"})
    origin = ctx.identity()
    a = evolve(ca, c, [origin], n, cap)
    b = evolve(ca, cn, [origin], n, cap)
    va, vb = a.frames[n][origin], b.frames[n][origin]
    return {
        "n": n,
        "d": d,
        "flip": ctx.format(flip),
        "dependency_size": b.dependency_size,
        "uniform_at_origin": va,
        "flipped_at_origin": vb,
        "uniform_is_interior": va == INTERIOR,
        "flipped_is_binary": _is_binary(vb),
        "passed": va == INTERIOR and _is_binary(vb),
    }


@dataclass(frozen=True)
class PropagationSpec:
    """Seed configuration ``c``, a cell ``g`` binary in ``F^t(c)``, cut radius ``n``, path length ``i``.

    ``flip`` overrides the derived perturbation position; it must lie
    outside ``ball(n)``.
    """

    c: Configuration
    g: object
    t: int
    n: int
    i: int
    flip: object = None
    settle_limit: int = 64


def _stabilization_time(lazy: LazyFreeBlock, region, limit: int):
    prev = lazy.nonzero(0, region)
    history = [len(prev)]
    for t in range(limit):
        nxt = lazy.nonzero(t + 1, region)
        history.append(len(nxt))
        if nxt == prev:
            return t, prev, history
        prev = nxt
    raise PreconditionError(f"nonzero set did not stabilize within {limit} steps", reason="no-stabilization")


def _outward_path(ctx, g, length: int, avoid: frozenset) -> list:
    path = [g]
    for _ in range(length):
        cur = path[-1]
        outward = sorted(
            h for h in (ctx._mul(cur, e) for e in ctx.generators)
            if len(h) == len(cur) + 1 and h not in avoid
        )
        if not outward:
            raise PreconditionError(f"no free outward neighbor at {ctx.format(cur)}", reason="no-path")
        path.append(outward[0])
    return path


def experiment_propagation(spec: PropagationSpec, cap: int | None = None) -> dict:
    """A far perturbation walks inward along a free path, one cell per step."""
    c = spec.c
    ctx = _require_free(c.ctx)
    g = ctx.check(spec.g)
    if spec.i < 1:
        raise PreconditionError("path length must be at least 1", reason="path-length")
    if spec.n <= len(g) + 2 * spec.t:
        raise PreconditionError(
            f"cut radius n={spec.n} must exceed |g| + 2t = {len(g) + 2 * spec.t}", reason="cut-radius"
        )
    if LazyFreeBlock(c).cls(spec.t, g) != BIN:
        raise PreconditionError(
            f"F^{spec.t}(c) is not binary at {ctx.format(g)}", reason="no-binary-cell"
        )
    ball_n = ctx.ball(spec.n)
    d = Configuration(ctx, c.materialize(ball_n), Uniform("0"))
    lazy_d = LazyFreeBlock(d)
    T_star, D, history = _stabilization_time(lazy_d, ball_n, spec.settle_limit)

    path = _outward_path(ctx, g, spec.i, D)
    g_i = path[-1]
    if spec.flip is not None:
        flip = ctx.check(spec.flip)
        if len(flip) <= spec.n:
            raise PreconditionError(
                f"flip position {ctx.format(flip)} lies inside ball({spec.n})", reason="flip-inside-ball"
            )
    else:
        step = g_i[-1]
        flip = ctx._mul(g_i, step * T_star)
    old = d.value_at(flip)
    if not _is_binary(old):
        raise PreconditionError(f"flip position {ctx.format(flip)} is not binary in d", reason="flip-not-binary")
    d2 = d.with_cells({flip: str(1 - int(old))})
    lazy_d2 = LazyFreeBlock(d2)

    horizon = T_star + spec.i
    stable = all(
        lazy_d.nonzero(t, ball_n) == D and lazy_d2.nonzero(t, ball_n) == D
        for t in range(T_star, horizon + 2)
    )
    path_free = all(lazy_d.free(t, h) for t in range(T_star, horizon + 1) for h in path)

    window = ctx.ball(len(g_i))
    ca = freeblock_ca(ctx)
    ra = evolve(ca, d, window, horizon, cap)
    rb = evolve(ca, d2, window, horizon, cap)
    schedule = []
    ok = True
    for k in range(spec.i + 1):
        t = T_star + k
        diff = [h for h in ra.window if ra.frames[t][h] != rb.frames[t][h]]
        closest = []
        if diff:
            m = min(len(h) for h in diff)
            closest = ctx.sorted(h for h in diff if len(h) == m)
        expected = path[spec.i - k]
        hit = closest == [expected]
        ok &= hit
        schedule.append({
            "time": t,
            "expected": ctx.format(expected),
            "closest": [ctx.format(h) for h in closest],
            "matches": hit,
        })
    reaches = ra.frames[horizon][g] != rb.frames[horizon][g]
    return {
        "g": ctx.format(g),
        "t": spec.t,
        "n": spec.n,
        "i": spec.i,
        "stabilization_time": T_star,
        "nonzero_history": history,
        "nonzero_size": len(D),
        "stable_after": stable,
        "path": [ctx.format(h) for h in path],
        "path_rule": "least outward neighbor outside the stabilized nonzero set",
        "path_free": path_free,
        "flip": ctx.format(flip),
        "flip_norm": len(flip),
        "flip_derived": spec.flip is None,
        "dependency_size": ra.dependency_size,
        "schedule": schedule,
        "reaches_g_at": horizon if reaches else None,
        "passed": stable and path_free and ok and reaches,
    }


def to_dot(ctx: FreeGroup, frame: Pattern, name: str = "ball") -> str:
    """Graphviz rendering of a frame on a ball: one node per cell, one edge per generator step."""
    ids = {g: f"n{j}" for j, g in enumerate(ctx.sorted(frame.cells))}
    lines = [f"graph {name} {{"]
    for g, node in ids.items():
        lines.append(f'  {node} [label="{ctx.format(g) or "1"}:{frame.cells[g]}"];')
    for g, node in ids.items():
        if g:
            parent = g[:-1]
            lines.append(f"  {ids[parent]} -- {node};")
    lines.append("}")
    return "\n".join(lines) + "\n"
