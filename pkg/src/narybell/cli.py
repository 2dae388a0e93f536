"""Command-line entry point: ``narybell <subcommand> ...``.

Every subcommand prints a report (JSON or text). The ``result`` part of a
report depends only on the arguments and the seed; wall-clock timings are
kept in a separate ``timings`` field.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import atlas, polytope, quantum, symmetry, wiring
from .lp import LPError
from .scenario import BellFunctional, Scenario, ScenarioError, is_nonsignaling, ns_cg_hrep

SCHEMA = "narybell.report/1"

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2
EXIT_GEOMETRY = 3
EXIT_NONCONVERGENCE = 4

log = logging.getLogger("narybell")


class UsageError(Exception):
    pass


class NonConvergence(Exception):
    pass


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _scenario(text: str | None, flag: str) -> Scenario:
    if not text:
        raise UsageError(f"{flag} is required")
    try:
        return Scenario.parse(text)
    except (ScenarioError, ValueError) as exc:
        raise UsageError(f"{flag}: {exc}") from exc


class Cache:
    """Polytope files keyed by the job that produced them."""

    def __init__(self, root: str | None):
        self.root = Path(root) if root else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
        self.events: list[str] = []

    def _path(self, key: str) -> Path | None:
        return self.root / f"{_sha(key.encode())[:24]}.txt" if self.root else None

    def get_or_build(self, key: str, build, write):
        path = self._path(key)
        if path is not None and path.exists():
            self.events.append(f"hit {key}")
            return polytope.read_polytope(path)
        obj = build()
        if path is not None:
            write(path, obj)
            self.events.append(f"store {key}")
        return obj


def _polytope_vertices(args, cache: Cache, target: Scenario):
    """Generating points of the requested polytope in CG coordinates of ``target``."""
    if args.base and args.nary:
        raise UsageError("--base and --nary are mutually exclusive")
    if args.base:
        base = _scenario(args.base, "--base")
        key = f"V restricted {base}->{target}"
        return key, cache.get_or_build(key, lambda: wiring.restricted_vertices(base, target), polytope.write_vrep)
    if args.nary:
        if args.nary < 2:
            raise UsageError("--nary must be at least 2")
        key = f"V nary {args.nary} {target}"
        return key, cache.get_or_build(
            key, lambda: wiring.nary_support_vertices(target, args.nary), polytope.write_vrep
        )
    key = f"V ns {target}"
    return key, cache.get_or_build(key, lambda: polytope.vertices_from_hrep(ns_cg_hrep(target)), polytope.write_vrep)


def _facets(args, cache: Cache, target: Scenario):
    vkey, v = _polytope_vertices(args, cache, target)
    hkey = "H" + vkey[1:]
    h = cache.get_or_build(hkey, lambda: polytope.facets_from_vrep(v), polytope.write_hrep)
    return v, h


def cmd_facets(args, cache: Cache) -> dict:
    target = _scenario(args.target, "--target")
    if args.dry_run:
        if not args.base:
            raise UsageError("--dry-run needs --base")
        base = _scenario(args.base, "--base")
        return {
            "target": str(target),
            "base": str(base),
            "wirings_alice": wiring.wiring_count(base, target, "A"),
            "wirings_bob": wiring.wiring_count(base, target, "B"),
            "sample": [str(w) for w in wiring.enumerate_wirings(base, target, "A", limit=args.limit)],
        }
    v, h = _facets(args, cache, target)
    if args.output:
        polytope.write_hrep(args.output, h)
    return {
        "target": str(target),
        "base": args.base,
        "nary": args.nary,
        "points": len(v),
        "facets": h.n_facets,
        "equalities": len(h.equalities),
        "hrep_sha256": _sha(polytope.canonical_bytes(h)),
    }


def cmd_classify(args, cache: Cache) -> dict:
    target = _scenario(args.target, "--target")
    _, h = _facets(args, cache, target)
    out = {"target": str(target), "base": args.base, "nary": args.nary, "facets": h.n_facets}
    for label, swap in (("with_party_swap", True), ("without_party_swap", False)):
        if args.no_swap and swap:
            continue
        rep = symmetry.orbit_report(h, target, swap)
        out[label] = {
            "orbits": len(rep),
            "non_face_orbits": sum(not r["face_of_ns"] for r in rep),
            "report": rep,
        }
    return out


def _functional(args) -> BellFunctional:
    name = args.functional
    if not name:
        raise UsageError("--functional is required")
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        return BellFunctional.from_json(json.loads(path.read_text()))
    try:
        return atlas.named_functional(name, args.n)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from exc


def cmd_lp_bound(args, cache: Cache) -> dict:
    f = _functional(args)
    target = _scenario(args.target, "--target") if args.target else f.scenario
    if target != f.scenario:
        raise UsageError(f"functional lives on {f.scenario}, not {target}")
    h, c = f.cg_form()
    shift = f.bound - c
    if args.base or args.nary:
        _, v = _polytope_vertices(args, cache, target)
        value = polytope.lp_max(h, v).value + shift
        over = "restricted" if args.base else f"nary:{args.nary}"
    else:
        value = polytope.lp_max(h, ns_cg_hrep(target)).value + shift
        over = "nonsignaling"
    return {
        "functional": f.name,
        "scenario": str(target),
        "polytope": over,
        "max": str(value),
        "bound": str(f.bound),
        "violates_bound": value > f.bound,
    }


def cmd_certify(args, cache: Cache) -> dict:
    if args.n is None or args.n < 3:
        raise UsageError("--n must be at least 3")
    rep = atlas.certificate_report(args.n)
    if args.lp:
        rep["lp_max"] = str(atlas.nary_bound_by_lp(args.n))
    return rep


def _model(args) -> quantum.QuantumModel:
    name = args.model
    if not name:
        raise UsageError("--model is required")
    if name == "paper-ia":
        return quantum.paper_model_Ia()
    if name == "paper-ib":
        return quantum.paper_model_Ib(args.n or 3, args.branch)
    if name == "reference-ic":
        return quantum.reference_model_Ic()
    if name == "reference-ic-orthogonal":
        return quantum.reference_model_Ic(orthogonal=True)
    path = Path(name)
    if path.exists():
        return quantum.QuantumModel.load(path)
    raise UsageError(f"unknown model {name!r}")


_MODEL_FUNCTIONAL = {"paper-ia": "ia", "paper-ib": "ib", "reference-ic": "ic", "reference-ic-orthogonal": "ic"}


def cmd_quantum(args, cache: Cache) -> dict:
    m = _model(args)
    if not args.functional:
        args.functional = _MODEL_FUNCTIONAL.get(args.model)
        if args.functional == "ib" and args.n is None:
            args.n = m.dA
    f = _functional(args)
    p = quantum.born_probabilities(m, f.scenario)
    value = float(f.evaluate(p))
    out = {
        "model": m.name or args.model,
        "functional": f.name,
        "value": round(value, 12),
        "bound": str(f.bound),
        "normalization_residual": float(p.normalization_residual()),
        "signaling_residual": float(p.signaling_residual()),
        "nonsignaling": is_nonsignaling(p, 1e-12),
    }
    if value > float(f.bound):
        out["visibility_maximally_mixed"] = round(quantum.critical_visibility(f, m), 12)
        out["visibility_uniform_outcomes"] = round(quantum.critical_visibility(f, m, noise="uniform_outcomes"), 12)
    return out


def cmd_seesaw(args, cache: Cache) -> dict:
    f = _functional(args)
    dA, dB = args.dims
    ortho = tuple(args.alice_orthogonal) if args.alice_orthogonal else None
    res = quantum.seesaw(
        f, dA, dB, restarts=args.restarts, seed=args.seed, threads=args.threads,
        rank_one=args.rank_one, alice_orthogonal=ortho, max_sweeps=args.max_sweeps,
    )
    if args.save_model:
        res.model.save(args.save_model)
    out = {
        "functional": f.name,
        "dims": [dA, dB],
        "restarts": args.restarts,
        "seed": args.seed,
        "value": round(res.value, 12),
        "best_restart": res.restart,
        "converged": res.converged,
        "sweeps": len(res.history),
        "model_sha256": _sha(json.dumps(res.model.to_json(), sort_keys=True).encode()),
    }
    if not res.converged:
        raise NonConvergence(out)
    return out


def cmd_visibility(args, cache: Cache) -> dict:
    m = _model(args)
    if not args.functional:
        args.functional = _MODEL_FUNCTIONAL.get(args.model)
        if args.functional == "ib" and args.n is None:
            args.n = m.dA
    f = _functional(args)
    bound = Fraction(args.bound) if args.bound is not None else f.bound
    out = {
        "functional": f.name,
        "model": m.name or args.model,
        "noise": args.noise,
        "bound": str(bound),
        "visibility": round(quantum.critical_visibility(f, m, bound, args.noise), 12),
    }
    if args.reoptimize:
        if args.noise != "maximally_mixed_state":
            raise UsageError("--reoptimize applies to the maximally mixed noise only")
        out["visibility_reoptimized"] = round(
            quantum.reoptimized_visibility(f, m, bound, restarts=args.restarts, seed=args.seed), 6
        )
    return out


COMMANDS = {
    "facets": cmd_facets,
    "classify": cmd_classify,
    "lp-bound": cmd_lp_bound,
    "certify-nary": cmd_certify,
    "quantum": cmd_quantum,
    "seesaw": cmd_seesaw,
    "visibility": cmd_visibility,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="text")
    common.add_argument("--cache", metavar="DIR", help="directory for cached polytope files")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    poly = argparse.ArgumentParser(add_help=False)
    poly.add_argument("--target", help='scenario such as "[3,3|3,3]"')
    poly.add_argument("--base", help="base scenario of a restricted polytope")
    poly.add_argument("--nary", type=int, metavar="K", help="support restriction to K outcomes")

    func = argparse.ArgumentParser(add_help=False)
    func.add_argument("--functional", help="ia, ib, ic or a functional JSON file")
    func.add_argument("--n", type=int, help="size parameter of I_b^(n)")

    p = argparse.ArgumentParser(prog="narybell", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("facets", parents=[common, poly], help="facet enumeration")
    s.add_argument("--output", help="write the facets in the H file format")
    s.add_argument("--dry-run", action="store_true", help="only count wirings")
    s.add_argument("--limit", type=int, default=5, help="wirings listed in a dry run")

    s = sub.add_parser("classify", parents=[common, poly], help="orbit report with face-of-NS flags")
    s.add_argument("--no-swap", action="store_true", help="skip the classification with party swap")

    sub.add_parser("lp-bound", parents=[common, poly, func], help="maximum of a functional over a polytope")

    s = sub.add_parser("certify-nary", parents=[common], help="exact certificate for I_b^(n) <= n-2")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--lp", action="store_true", help="also maximize over the (n-1)-ary polytope")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="paper-ia, paper-ib, reference-ic, reference-ic-orthogonal or a JSON file")
    model.add_argument("--branch", choices=("plus", "minus"), default="plus")

    sub.add_parser("quantum", parents=[common, func, model], help="evaluate a quantum model")

    s = sub.add_parser("seesaw", parents=[common, func], help="see-saw lower bound")
    s.add_argument("--dims", type=int, nargs=2, default=(3, 3), metavar=("DA", "DB"))
    s.add_argument("--restarts", type=int, default=20)
    s.add_argument("--rank-one", action="store_true", help="rank-one projectors for binary settings")
    s.add_argument("--alice-orthogonal", type=int, nargs=2, metavar=("X0", "X1"))
    s.add_argument("--max-sweeps", type=int, default=5000, help="sweep cap per restart")
    s.add_argument("--save-model", help="write the best model as JSON")

    s = sub.add_parser("visibility", parents=[common, func, model], help="critical visibility")
    s.add_argument("--noise", choices=quantum.NOISE_MODES, default="maximally_mixed_state")
    s.add_argument("--bound", help="override the functional's bound")
    s.add_argument("--reoptimize", action="store_true", help="also re-optimize measurements")
    s.add_argument("--restarts", type=int, default=0)
    return p


def _input_hashes(args) -> dict:
    spec = {k: v for k, v in sorted(vars(args).items()) if k not in ("format", "threads", "verbose", "cache", "output")}
    out = {"job": _sha(json.dumps(spec, sort_keys=True, default=str).encode())}
    for attr in ("functional", "model"):
        val = getattr(args, attr, None)
        if val and Path(val).exists():
            out[attr] = _sha(Path(val).read_bytes())
    return out


def _text(result: dict, indent: str = "") -> str:
    lines = []
    for k, v in result.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.append(_text(v, indent + "  "))
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"{indent}{k}: {len(v)} entries")
        else:
            lines.append(f"{indent}{k}: {v}")
    return "\n".join(lines)


def _summary(command: str, result: dict) -> str | None:
    if command == "facets" and "facets" in result:
        return f"facets: {result['facets']}"
    if command == "certify-nary":
        verdict = "PASS" if result["pass"] else "FAIL"
        return f"max_zeta = {result['max_zeta']}, bound = {result['bound']}, {verdict}"
    if command == "quantum":
        return f"{result['functional']} = {result['value']:.6f}"
    return None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cache = Cache(args.cache)
    start = time.perf_counter()
    status = EXIT_OK
    try:
        result = COMMANDS[args.command](args, cache)
        if args.command == "certify-nary" and not result["pass"]:
            status = EXIT_FAILED_CHECK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (polytope.GeometryError, LPError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (quantum.ModelError, quantum.NotViolatedError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergence as exc:
        result = exc.args[0]
        status = EXIT_NONCONVERGENCE
    report = {
        "schema": SCHEMA,
        "command": args.command,
        "inputs": _input_hashes(args),
        "result": result,
        "result_sha256": _sha(json.dumps(result, sort_keys=True, default=str).encode()),
        "cache": cache.events,
        "timings": {"total_seconds": round(time.perf_counter() - start, 3)},
    }
    if args.format == "json":
        print(json.dumps(report, indent=2, default=str))
    else:
        line = _summary(args.command, result)
        if line:
            print(line)
        print(_text(result))
    return status


if __name__ == "__main__":
    sys.exit(main())
