"""
Command line entry point: solve, gen, contract, analyze, verify, trace

Exit codes: 0 when the answer is true (or a command succeeds), 1 when it is
false (or a verification suite fails), 2 on any error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from app.config import settings
from app.exceptions import FchcError
from app.models.schemas import SolveDocument
from app.services.corpus import random_corpus, write_corpus
from app.services.graph import contract_triangles, parse_instance, serialize
from app.services.hybrid import SpaceModel
from app.services.solve_service import DEFAULT_ANALYZE_NS, SolveService, parse_c_grid
from app.services.verify import SUITES, run_suite
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

EXIT_TRUE = 0
EXIT_FALSE = 1
EXIT_ERROR = 2


def _read_graph(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _model(path: Optional[str]) -> Optional[SpaceModel]:
    return SpaceModel.load(Path(path)) if path else None


def _emit(text: str, out: Optional[str] = None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _print_solve(doc: SolveDocument, as_json: bool, timings: bool) -> None:
    if as_json:
        _emit(doc.to_json(exclude=None if timings else {"timings"}))
        return
    st = doc.stats
    lines = [
        f"verdict: {'true' if doc.verdict else 'false'}",
        f"n={doc.n} m={doc.m} s={doc.s} mode={doc.mode}",
        f"nodes={st.nodes} depth={st.depth} tau_sum={st.tau_sum}",
    ]
    if st.r is not None:
        lines.append(f"r={st.r} t={st.t} grover_estimate={st.grover_estimate}")
    if doc.mode == "hybrid":
        lines.append(
            f"budget={st.budget} s_tilde={st.s_tilde} handoff_depth={st.handoff_depth} "
            f"quantum_calls={st.quantum_calls} refused={st.refused_handoffs}"
        )
    if st.oracle is not None:
        lines.append(f"oracle: {'true' if st.oracle else 'false'}")
    _emit("\n".join(lines))


def cmd_solve(args: argparse.Namespace) -> int:
    if args.mode == "hybrid" and args.c is None:
        raise ValueError("--mode hybrid requires --c")
    service = SolveService(model=_model(args.model), threads=args.threads)
    doc = service.solve_text(
        _read_graph(args.graph),
        mode=args.mode,
        c=args.c,
        oracle_check=args.oracle_check,
        backend=args.backend,
    )
    _print_solve(doc, args.json, not args.no_timings)
    return EXIT_TRUE if doc.verdict else EXIT_FALSE


def cmd_gen(args: argparse.Namespace) -> int:
    graphs = random_corpus(
        args.n,
        args.count,
        seed=args.seed,
        triangle_free=args.triangle_free,
        unique=args.unique,
    )
    if not graphs:
        logger.warning(f"no graph generated for n={args.n}")
        return EXIT_FALSE
    if args.out:
        for path in write_corpus(graphs, Path(args.out), f"cubic_n{args.n}_s{args.seed}"):
            logger.info(f"wrote {path}")
    else:
        sys.stdout.write("\n".join(serialize(g) for g in graphs))
    return EXIT_TRUE


def cmd_contract(args: argparse.Namespace) -> int:
    g = contract_triangles(parse_instance(_read_graph(args.graph)).g)
    sys.stdout.write(serialize(g))
    return EXIT_TRUE


def cmd_analyze(args: argparse.Namespace) -> int:
    service = SolveService(model=_model(args.model))
    corpus = service.calibration_corpus(args.seed) if args.calibrate else None
    ns = [int(n) for n in args.ns.split(",")] if args.ns else DEFAULT_ANALYZE_NS
    doc = service.analyze(parse_c_grid(args.c_grid), ns, calibrate_on=corpus)
    if args.save_model:
        service.model.save(Path(args.save_model))
        logger.info(f"model written to {args.save_model}")
    _emit(doc.to_json(), args.out)
    return EXIT_TRUE


def cmd_verify(args: argparse.Namespace) -> int:
    kwargs = {}
    if args.suite == "hybrid" and args.model:
        kwargs["model"] = _model(args.model)
    report = run_suite(args.suite, **kwargs)
    _emit(report.model_dump_json(indent=2))
    return EXIT_TRUE if report.passed else EXIT_FALSE


def cmd_trace(args: argparse.Namespace) -> int:
    doc = SolveService.trace(parse_instance(_read_graph(args.graph)))
    if not args.emit_schedule:
        doc.schedule = []
    _emit(doc.to_json())
    return EXIT_TRUE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybrid-fchc",
        description="Forced cubic Hamiltonian cycle solvers and the hybrid crossover analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="decide one instance")
    p.add_argument("--graph", required=True, help="instance file, '-' for stdin")
    p.add_argument("--mode", choices=["classical", "nonrecursive", "hybrid"], default="classical")
    p.add_argument("--c", type=float, default=None, help="qubit fraction for --mode hybrid")
    p.add_argument("--backend", choices=["classical", "reversible"], default="classical")
    p.add_argument("--model", default=None, help="space model JSON written by analyze --save-model")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--oracle-check", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--no-timings", action="store_true", help="omit timings from --json output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="seeded random cubic graphs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", default=None, help="directory; stdout when omitted")
    p.add_argument("--triangle-free", action="store_true")
    p.add_argument("--unique", action="store_true", help="drop isomorphic duplicates")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("contract", help="contract triangles")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_contract)

    p = sub.add_parser("analyze", help="speedup and threshold tables")
    p.add_argument("--c-grid", default="0.01:0.5:50")
    p.add_argument("--ns", default=None, help="comma separated n values")
    p.add_argument("--model", default=None)
    p.add_argument("--calibrate", action="store_true", help="fit the model on a generated corpus first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-model", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("--suite", choices=sorted(SUITES), required=True)
    p.add_argument("--model", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", help="set-generation schedule and witness cases")
    p.add_argument("--graph", required=True)
    p.add_argument("--emit-schedule", action="store_true")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FchcError, ValueError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    except Exception:
        logger.exception(f"{args.command} crashed")
        if settings.DEBUG:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
