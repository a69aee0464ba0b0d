"""Independent reference computations used to cross-check the library.

Nothing here calls into the code paths it is used to check: norms come
from a plain BFS over the Cayley graph, free-group words are reduced with
a stack, automata are stepped cell by cell from dictionaries.
"""

import itertools
from collections import deque


def bfs_norms(group, radius):
    """Word norms by breadth-first search using only ``multiply``."""
    e = group.identity()
    dist = {e: 0}
    queue = deque([e])
    while queue:
        g = queue.popleft()
        if dist[g] == radius:
            continue
        for s in group.generators:
            h = group.multiply(g, s)
            if h not in dist:
                dist[h] = dist[g] + 1
                queue.append(h)
    return dist


def free_reduce(word):
    out = []
    for ch in word:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def step_dict(cells, neighborhood, mul, rule, default, targets=None):
    """One synchronous step of a CA stored sparsely as a dict (cells outside read ``default``)."""
    out = {}
    for g in cells if targets is None else targets:
        out[g] = rule(tuple(cells.get(mul(g, s), default) for s in neighborhood))
    return out


def xor_z_orbit(initial, steps, lo, hi):
    """XOR of the two neighbors on Z, computed on a padded list; frames on [lo, hi]."""
    pad = steps + 1
    left = lo - pad
    row = [initial.get(i, 0) for i in range(left, hi + pad + 1)]
    frames = [row[pad:pad + hi - lo + 1]]
    for _ in range(steps):
        row = [0] + [row[i - 1] ^ row[i + 1] for i in range(1, len(row) - 1)] + [0]
        frames.append(row[pad:pad + hi - lo + 1])
    return frames


def brute_blocking_z(rule, alphabet_size, radius, word, region, T):
    """Blocking check on Z by enumerating every exterior of the cone, cell by cell.

    ``word`` maps positions to symbol indices.  Returns True when every
    exterior yields the same frames on ``region`` for ``t <= T``.
    """
    lo = min([*region, *word]) - radius * T
    hi = max([*region, *word]) + radius * T
    cells = list(range(lo, hi + 1))
    free = [c for c in cells if c not in word]
    ref = None
    for combo in itertools.product(range(alphabet_size), repeat=len(free)):
        state = dict(word)
        state.update(zip(free, combo))
        frames = [tuple(state[c] for c in region)]
        for t in range(T):
            state = {
                c: rule(tuple(state[c + d] for d in range(-radius, radius + 1)))
                for c in cells
                if lo + radius * (t + 1) <= c <= hi - radius * (t + 1)
            }
            frames.append(tuple(state[c] for c in region))
        if ref is None:
            ref = frames
        elif frames != ref:
            return False
    return True


def coset_split_sweep(g, sub_letters="aA"):
    """Minimal-norm member of ``g<a>`` found by trying every power ``a^j`` with ``|j| <= |g|``."""
    best = None
    for j in range(-len(g), len(g) + 1):
        cand = free_reduce(g + ("A" * j if j >= 0 else "a" * -j))
        if best is None or (len(cand), cand) < (len(best[0]), best[0]):
            best = (cand, j)
    return best


def free_neighbors(g, letters):
    return [free_reduce(g + e) for e in letters]


def free_step_naive(values, letters, default="0"):
    """One step of the obstacle automaton from its definition, on a dict of words."""

    def val(h):
        return values.get(h, default)

    def binary(s):
        return s in ("0", "1")

    def free(h):
        return binary(val(h)) and sum(binary(val(x)) for x in free_neighbors(h, letters)) >= 2

    def blocked(h):
        c = val(h)
        nb = free_neighbors(h, letters)
        if c == "ι":
            return all(val(x) in ("ι", "β") for x in nb)
        if c == "β":
            inner = [x for x in nb if val(x) == "ι"]
            return len(inner) == 1 and all(free(x) for x in nb if x != inner[0])
        return False

    out = {}
    for g in values:
        c = val(g)
        if binary(c):
            out[g] = str((int(c) + sum(int(val(x)) for x in free_neighbors(g, letters) if binary(val(x)))) % 2)
        elif blocked(g):
            out[g] = c
        else:
            out[g] = "0"
    return out
