"""``groupca`` command line: one subcommand per module, JSON in and out.

Exit codes: 0 verdict computed, 2 usage, 3 cap exceeded, 4 precondition
failed, 5 malformed input.  Errors go to stderr as a JSON object with a
machine-readable ``reason``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .blocking import (
    DEFAULT_ENUMERATION_CAP,
    BlockingQuery,
    parse_mode,
    sensitivity_probe,
    verify_blocking,
)
from .engine import builtin, ca_from_json, evolve
from .errors import GroupCAError, ParseError, UsageError
from .groups import element_cap, parse_group
from .patterns import Configuration, Pattern, Random, load_json


def version_hash() -> str:
    h = hashlib.sha256(__version__.encode())
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        # prefix matching would let the global --cap swallow a subcommand's --ca
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message, reason="bad-arguments")


def _json_arg(text: str):
    """Inline JSON if it looks like JSON, else a path to a JSON file."""
    s = text.strip()
    if s[:1] in "{[":
        try:
            return json.loads(s)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed inline JSON: {exc}")
    if not os.path.exists(s):
        raise ParseError(f"no such file: {s}", reason="missing-file")
    return load_json(s)


def _load_ca(group, spec: str):
    if os.path.exists(spec) or spec.strip()[:1] == "{":
        return ca_from_json(group, _json_arg(spec))
    return builtin(spec, group)


def _region(group, spec: str):
    """``ball:R``, ``sphere:R`` or a JSON list of elements."""
    s = spec.strip()
    for prefix, fn in (("ball:", group.ball), ("sphere:", group.sphere)):
        if s.startswith(prefix):
            try:
                r = int(s[len(prefix):])
            except ValueError:
                raise UsageError(f"bad radius in {spec!r}")
            return list(fn(r))
    data = _json_arg(s)
    if not isinstance(data, list):
        raise ParseError("region must be a JSON list of elements")
    return [group.parse(str(x)) for x in data]


def _config(group, spec: str | None, alphabet, seed: int):
    if spec is None:
        return Configuration(group, Pattern(alphabet, {}), Random(seed, alphabet.symbols))
    return Configuration.from_json(group, _json_arg(spec))


# --- subcommands --------------------------------------------------------------


def cmd_evolve(args):
    group = parse_group(args.group)
    ca = _load_ca(group, args.ca)
    cfg = _config(group, args.config, ca.alphabet, args.seed)
    window = f"ball:{args.window_radius}" if args.window_radius is not None else args.window
    res = evolve(ca, cfg, _region(group, window), args.steps, args.cap_elems)
    return {
        "group": group.descriptor,
        "ca": ca.name,
        "dependency_size": res.dependency_size,
        "frames": [f.to_json(group)["cells"] for f in res.frames],
    }


def cmd_verify_blocking(args):
    group = parse_group(args.group)
    ca = _load_ca(group, args.ca)
    if args.query:
        q = BlockingQuery.from_json(group, _json_arg(args.query))
    elif args.word and args.region and args.horizon is not None:
        q = BlockingQuery.from_json(group, _json_arg(args.word), _region(group, args.region), args.horizon)
    else:
        raise UsageError("verify-blocking needs --query, or --word with --region and --horizon")
    c = verify_blocking(ca, q, parse_mode(args.mode), args.cap, prune=not args.no_prune, threads=args.threads)
    return {"group": group.descriptor, "ca": ca.name, "certificate": c.to_json(group)}


def cmd_search_blocking(args):
    group = parse_group(args.group)
    ca = _load_ca(group, args.ca)
    rep = sensitivity_probe(ca, args.k, args.max_radius, args.steps, parse_mode(args.mode), args.cap)
    return {"group": group.descriptor, "ca": ca.name, "probe": rep}


def cmd_impact(args):
    from .vz import VZStructure

    group = parse_group(args.group)
    vz = VZStructure(group)
    out = {"group": group.descriptor}
    if args.s:
        rows = {}
        for text in args.s:
            s = group.parse(text)
            rows[group.format(s)] = {
                "impact": vz.impact(s),
                "per_vertebra": {str(k): vz.impact_at(s, k) for k in range(-args.span, args.span + 1)},
            }
        out["impact"] = rows
    if args.ca:
        ca = _load_ca(group, args.ca)
        out["ca"] = ca.name
        out["delta"] = vz.delta(ca)
    if "impact" not in out and "delta" not in out:
        raise UsageError("impact needs --s or --ca")
    return out


def cmd_glue(args):
    from .vz import VZStructure, glue

    group = parse_group(args.group)
    ca = _load_ca(group, args.ca)
    vz = VZStructure(group)
    q1 = BlockingQuery.from_json(group, _json_arg(args.q1))
    q2 = BlockingQuery.from_json(group, _json_arg(args.q2))
    filler = Configuration.from_json(group, _json_arg(args.filler))
    mode = parse_mode(args.mode)
    glued = glue(vz, ca, q1, q2, filler, mode, args.cap, verify=False)
    c = verify_blocking(ca, glued, mode, args.cap, threads=args.threads)
    return {"group": group.descriptor, "ca": ca.name, "glued": glued.to_json(group), "certificate": c.to_json(group)}


def cmd_equicontinuity(args):
    from .vz import VZStructure, equicontinuity_pipeline, equicontinuity_witness_check

    group = parse_group(args.group)
    ca = _load_ca(group, args.ca)
    vz = VZStructure(group)
    mode = parse_mode(args.mode)
    if args.config:
        x = Configuration.from_json(group, _json_arg(args.config))
        rep = equicontinuity_witness_check(
            vz, ca, x, args.k, args.steps, args.max_width, args.search_span, mode, args.cap
        )
    else:
        rep = equicontinuity_pipeline(
            vz, ca, args.k, args.max_radius, args.steps, samples=args.samples, seed=args.seed,
            mode=mode, cap=args.cap,
        )
    return {"group": group.descriptor, "ca": ca.name, "report": rep}


def cmd_lift_check(args):
    from .lift import SubgroupEmbedding, check_parallel_dynamics, parse_sub

    big = parse_group(args.big)
    sub = parse_sub(args.sub)
    emb = SubgroupEmbedding(big, sub)
    ca = _load_ca(sub, args.ca)
    x = _config(big, args.config, ca.alphabet, args.seed)
    rep = check_parallel_dynamics(emb, ca, x, args.steps, args.window, args.reps_radius)
    return {"embedding": emb.descriptor, "ca": ca.name, "report": rep}


def cmd_rectangles(args):
    from .lift import SubgroupEmbedding, check_rectangle_inclusions, lambda_of, parse_sub

    emb = SubgroupEmbedding(parse_group(args.big), parse_sub(args.sub))
    reports = [check_rectangle_inclusions(emb, k, l) for k in range(args.k + 1) for l in range(args.l + 1)]
    return {
        "embedding": emb.descriptor,
        "lambda": {str(k): lambda_of(emb, k) for k in range(args.k + 1)},
        "inclusions": reports,
        "passed": all(r["passed"] for r in reports),
    }


def cmd_counterexample(args):
    from . import freeca

    d = args.rank
    if args.experiment == "obstacle":
        symbols = ("0", "1") if args.exterior == "binary" else freeca.FREE_ALPHABET.symbols
        rep = freeca.experiment_nonsensitivity(
            args.n, args.steps, args.trials, args.seed, d, args.agree_radius, symbols
        )
        dot_cfg = freeca.obstacle_config(args.n, d)
    elif args.experiment == "uniform-interior":
        rep = freeca.experiment_uniform_interior(args.n, d, args.cap_elems)
        dot_cfg = None
    else:
        from .groups import FreeGroup

        ctx = FreeGroup(d)
        if args.medium == "uniform-0":
            c = Configuration.uniform(ctx, freeca.FREE_ALPHABET, "0")
        elif args.medium.startswith("obstacle:"):
            c = freeca.obstacle_config(int(args.medium.split(":", 1)[1]), ctx=ctx)
        else:
            raise UsageError(f"unknown medium {args.medium!r}")
        flip = ctx.parse(args.flip) if args.flip is not None else None
        spec = freeca.PropagationSpec(c, ctx.parse(args.g), args.t, args.n, args.i, flip)
        rep = freeca.experiment_propagation(spec, args.cap_elems)
        dot_cfg = c
    if args.dump_dot and dot_cfg is not None:
        ctx = dot_cfg.ctx
        frame = dot_cfg.materialize(ctx.ball(args.n + 1))
        Path(args.dump_dot).write_text(freeca.to_dot(ctx, frame), encoding="utf-8")
    return {"experiment": args.experiment, "report": rep}


# --- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="groupca", description="Cellular automata on finitely generated groups.")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP, help="enumeration cap")
    p.add_argument("--cap-elems", type=int, default=None, help="element cap for balls and cones")
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, ca=True):
        sp.add_argument("--group", default="z")
        if ca:
            sp.add_argument("--ca", required=True, help="built-in name, rule JSON file or inline JSON")
        sp.add_argument("--mode", default="exhaustive", help="exhaustive or sampled:N:SEED")

    sp = sub.add_parser("evolve")
    common(sp)
    sp.add_argument("--config")
    sp.add_argument("--window", default="ball:3")
    sp.add_argument("--window-radius", type=int, default=None, help="shorthand for --window ball:R")
    sp.add_argument("--steps", type=int, default=4)
    sp.set_defaults(fn=cmd_evolve)

    sp = sub.add_parser("verify-blocking")
    common(sp)
    sp.add_argument("--query", help="word, region and horizon in one JSON object")
    sp.add_argument("--word", help="pattern JSON")
    sp.add_argument("--region", help="JSON list of elements, or ball:R")
    sp.add_argument("--horizon", type=int, default=None)
    sp.add_argument("--no-prune", action="store_true")
    sp.set_defaults(fn=cmd_verify_blocking)

    sp = sub.add_parser("search-blocking")
    common(sp)
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--max-radius", type=int, default=4)
    sp.add_argument("--steps", type=int, default=8)
    sp.set_defaults(fn=cmd_search_blocking)

    sp = sub.add_parser("impact")
    sp.add_argument("--group", default="z")
    sp.add_argument("--s", action="append", help="neighborhood element (repeatable)")
    sp.add_argument("--ca")
    sp.add_argument("--span", type=int, default=5, help="vertebrae -span..span in the per-vertebra table")
    sp.set_defaults(fn=cmd_impact)

    sp = sub.add_parser("glue")
    common(sp)
    sp.add_argument("--q1", required=True)
    sp.add_argument("--q2", required=True)
    sp.add_argument("--filler", required=True)
    sp.set_defaults(fn=cmd_glue)

    sp = sub.add_parser("equicontinuity-check")
    common(sp)
    sp.add_argument("--config", help="configuration to certify; omit to build one from a blocking word")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--steps", type=int, default=8)
    sp.add_argument("--max-radius", type=int, default=4)
    sp.add_argument("--max-width", type=int, default=6)
    sp.add_argument("--search-span", type=int, default=12)
    sp.add_argument("--samples", type=int, default=1000)
    sp.set_defaults(fn=cmd_equicontinuity)

    sp = sub.add_parser("lift-check")
    sp.add_argument("--big", default="free:2")
    sp.add_argument("--sub", default="z-as-a")
    sp.add_argument("--ca", required=True)
    sp.add_argument("--config")
    sp.add_argument("--steps", type=int, default=4)
    sp.add_argument("--window", type=int, default=5)
    sp.add_argument("--reps-radius", type=int, default=2)
    sp.set_defaults(fn=cmd_lift_check)

    sp = sub.add_parser("rectangles")
    sp.add_argument("--big", default="free:2")
    sp.add_argument("--sub", default="z-as-a")
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--l", type=int, default=4)
    sp.set_defaults(fn=cmd_rectangles)

    sp = sub.add_parser("counterexample")
    sp.add_argument("--experiment", required=True, choices=["obstacle", "uniform-interior", "propagation"])
    sp.add_argument("--rank", type=int, default=2)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--agree-radius", type=int, default=None)
    sp.add_argument("--exterior", choices=["full", "binary"], default="full")
    sp.add_argument("--medium", default="uniform-0", help="uniform-0 or obstacle:M")
    sp.add_argument("--g", default="1")
    sp.add_argument("--t", type=int, default=0)
    sp.add_argument("--i", type=int, default=2)
    sp.add_argument("--flip", default=None)
    sp.add_argument("--dump-dot", default=None)
    sp.set_defaults(fn=cmd_counterexample)
    return p


def _emit_error(exc: GroupCAError) -> int:
    payload = {"error": str(exc), "reason": exc.reason, "exit_code": exc.exit_code}
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return exc.exit_code


def run(argv=None) -> tuple[int, dict | None]:
    argv = list(sys.argv[1:] if argv is None else argv)
    saved_cap = os.environ.get("GROUPCA_CAP_ELEMS")
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required", reason="bad-arguments")
        if args.cap_elems is not None:
            os.environ["GROUPCA_CAP_ELEMS"] = str(args.cap_elems)
        start = time.perf_counter()
        result = args.fn(args)
        report = {
            "command": ["groupca", *argv],
            "version": __version__,
            "version_hash": version_hash(),
            "seed": args.seed,
            "caps": {"elements": element_cap(), "enumeration": args.cap},
            "threads": args.threads,
            "result": result,
            "wall_clock_s": round(time.perf_counter() - start, 6),
        }
    except GroupCAError as exc:
        return _emit_error(exc), None
    finally:
        # keep --cap-elems scoped to this run when called in-process
        if saved_cap is None:
            os.environ.pop("GROUPCA_CAP_ELEMS", None)
        else:
            os.environ["GROUPCA_CAP_ELEMS"] = saved_cap
    text = json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0, report


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
