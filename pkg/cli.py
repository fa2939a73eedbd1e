#!/usr/bin/env python3
"""
diagrank - low-rank PSD plus diagonal decompositions from the command line.

Exit codes: 0 feasible / pass, 1 infeasible / fail, 2 unknown, 3 input or format error,
4 other library error, 130 interrupted.
"""

import argparse
import dataclasses
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.text import Text

import decompose
import oracle
import reductions
import reporter
import settings as settings_module
from catalog import CATALOG, get_instance, list_instances
from charsys import KINDS, P2
from decompose import AUTO, ROUTES, Decomposition, Feasible, Infeasible, Instance, SolveResult, solve, verify
from errors import DiagrankError, FormatError, InstanceError
from formats import (content_hash, decomposition_to_dict, encode_scalar, format_coloring, format_edge_list,
                     instance_from_matrix_text, instance_to_dict, load_decomposition, load_instance,
                     load_polysystem, parse_coloring, parse_partial_matrix, parse_vector, read_graph, read_text,
                     report_to_dict, result_to_dict, write_json)
from oracle import brute_force_3color, check_perturbation_lemmas, rank_probe, small_completion_search
from reductions import (appendix_p2tilde_instance, build_Bbar, build_p1_instance, build_p2_instance,
                        build_p3_instance, chain_system, extend_coloring_to_supergraph, lift_robust_coloring,
                        peeters_supergraph, reduce_p3_to_p2, robustify)
from settings import Settings, load_settings
from symcore import EXACT, FLOAT, MODES

console = Console(stderr=True)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_UNKNOWN = 2
EXIT_INPUT = 3
EXIT_ERROR = 4
EXIT_INTERRUPTED = 130

INPUT_ERRORS = (FormatError, InstanceError, OSError)


def print_banner():
    """Print the diagrank banner."""
    banner_text = Text()
    banner_text.append("diagrank", style="bold blue")
    banner_text.append(" - low-rank PSD plus diagonal decompositions", style="white")

    console.print(Panel(
        banner_text,
        title="[bold green]diagrank[/bold green]",
        subtitle="[italic]P1 / P2 / P3 solvers and reductions[/italic]",
        border_style="blue"
    ))


def set_quiet(quiet: bool) -> None:
    for module in (sys.modules[__name__], decompose, oracle, reductions, reporter, settings_module):
        module.console.quiet = quiet


# -- helpers -----------------------------------------------------------------------------

def jsonable(value: Any) -> Any:
    """Make compiler parameters and reports safe for json.dumps."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return encode_scalar(value)


def emit(doc: Any, out: Optional[str]) -> None:
    """JSON to --out, or to stdout."""
    text = write_json(jsonable(doc), out)
    if out:
        console.print(f"[green]Wrote {out}[/green]")
    else:
        sys.stdout.write(text)


def emit_text(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        console.print(f"[green]Wrote {out}[/green]")
    else:
        sys.stdout.write(text)


def with_mode(inst: Instance, mode: Optional[str]) -> Instance:
    if mode is None or inst.A.mode == mode:
        return inst
    A = inst.A.to_float() if mode == FLOAT else inst.A.to_exact()
    return dataclasses.replace(inst, A=A)


def is_matrix_file(source: str) -> bool:
    return not (source in CATALOG and not os.path.exists(source)) and not source.endswith(".json")


def resolve_instance(source: str, kind: Optional[str] = None, rank: Optional[int] = None,
                     mode: Optional[str] = None) -> Instance:
    """
    A catalog name, an instance JSON file or a plain matrix file (with --kind; '*' marks
    the free entries of a (P3) matrix).
    """
    if not is_matrix_file(source):
        inst = get_instance(source) if source in CATALOG and not os.path.exists(source) else load_instance(source)
    else:
        inst = instance_from_matrix_text(read_text(source), kind or P2, 1, mode or EXACT)
        if rank is None:
            raise FormatError("A plain matrix file needs --rank")
    if rank is not None:
        inst = inst.with_rank(rank)
    return with_mode(inst, mode)


def resolve_settings(args: argparse.Namespace, **overrides: Any) -> Settings:
    base = load_settings(args.config) if getattr(args, "config", None) else load_settings()
    return base.with_overrides(**overrides)


def witness_path(args: argparse.Namespace) -> str:
    if args.witness_out:
        return args.witness_out
    if args.out:
        stem, _ = os.path.splitext(args.out)
        return f"{stem}.witness.json"
    raise FormatError("--emit-witness needs --out or --witness-out")


def exit_code(result: SolveResult) -> int:
    if isinstance(result, Feasible):
        return EXIT_OK
    if isinstance(result, Infeasible):
        return EXIT_FAIL
    return EXIT_UNKNOWN


def maybe_report(doc: Dict[str, Any], path: Optional[str], source: str) -> None:
    if path:
        reporter.render_report(jsonable(doc), path, source=source)


# -- decompose / verify ------------------------------------------------------------------

def cmd_decompose(args: argparse.Namespace) -> int:
    inst = resolve_instance(args.instance, args.kind, args.rank, args.mode)
    config = resolve_settings(args, threads=args.threads, seed=args.seed, max_vars=args.budget,
                              rank=args.tol, psd=args.tol)
    budget = config.budget
    console.print(f"[blue]Instance: {inst.kind}, n = {inst.n}, target rank {inst.r}, "
                  f"{inst.A.mode} mode[/blue]")
    console.print(f"[blue]Seed: {budget.seed}[/blue]")

    result = solve(inst, budget, show_progress=not (args.no_progress or args.quiet), route=args.route)

    doc = result_to_dict(result, inst, seed=budget.seed, mode=inst.A.mode)
    if isinstance(result, Feasible):
        d = result.decomposition.d
        if d is not None:
            console.print(f"[green]Feasible at rank {result.rank}: d = "
                          f"[{', '.join(str(encode_scalar(x)) for x in d)}][/green]")
        else:
            console.print(f"[green]Feasible at rank {result.rank}[/green]")
    elif isinstance(result, Infeasible):
        console.print(f"[red]Infeasible at rank {inst.r} ({len(result.certificates)} certificates)[/red]")
    else:
        console.print(f"[yellow]Unknown at rank {inst.r}: search incomplete[/yellow]")
    emit(doc, args.out)
    maybe_report(doc, args.report_html, args.instance)
    return exit_code(result)


def cmd_verify(args: argparse.Namespace) -> int:
    # The witness refers to the instance as saved; --rank only changes the target checked.
    base = resolve_instance(args.instance, args.kind, args.rank if is_matrix_file(args.instance) else None)
    dec = load_decomposition(args.decomposition, base)
    inst = base.with_rank(args.rank) if args.rank is not None else base
    config = resolve_settings(args, rank=args.tol, psd=args.tol)
    report = verify(inst, dec, tol=config.tolerances.rank, equilibrate_first=args.equilibrate)

    doc = {"instance": content_hash(inst), "kind": inst.kind, "n": inst.n, "r": inst.r,
           **report_to_dict(report)}
    if report.passed:
        console.print(f"[green]PASS: PSD of rank {report.rank} <= {inst.r}[/green]")
    else:
        console.print("[red]FAIL[/red]")
        for message in report.messages:
            console.print(f"  [red]{escape(message)}[/red]")
    emit(doc, args.out)
    maybe_report(doc, args.report_html, args.decomposition)
    return EXIT_OK if report.passed else EXIT_FAIL


# -- reduce ------------------------------------------------------------------------------

def _write_compiled(args: argparse.Namespace, inst: Instance, params: Dict[str, Any],
                    witness: Optional[Decomposition]) -> int:
    console.print(f"[blue]Compiled {inst.kind} instance: {inst.n}x{inst.n}, rank {inst.r}[/blue]")
    doc = instance_to_dict(inst)
    doc["provenance"] = jsonable({**inst.provenance, "params": params})
    emit(doc, args.out)
    if witness is not None:
        path = witness_path(args)
        write_json(jsonable(decomposition_to_dict(witness, inst)), path)
        console.print(f"[green]Wrote witness {path}[/green]")
    return EXIT_OK


def _coloring(args: argparse.Namespace) -> Optional[Dict[int, int]]:
    return parse_coloring(read_text(args.emit_witness)) if args.emit_witness else None


def cmd_reduce_graph(args: argparse.Namespace) -> int:
    G = read_graph(args.graph)
    coloring = _coloring(args)
    if args.target == "peeters":
        H = peeters_supergraph(G)
        lifted = extend_coloring_to_supergraph(H, coloring) if coloring is not None else None
    else:
        H = robustify(G, args.c)
        lifted = lift_robust_coloring(G, coloring, args.c) if coloring is not None else None
    console.print(f"[blue]{args.target}: {G.number_of_nodes()} -> {H.number_of_nodes()} vertices, "
                  f"{H.number_of_edges()} edges[/blue]")
    emit_text(format_edge_list(H), args.out)
    if lifted is not None:
        path = args.witness_out or (f"{os.path.splitext(args.out)[0]}.coloring" if args.out else None)
        if path is None:
            raise FormatError("--emit-witness needs --out or --witness-out")
        emit_text(format_coloring(lifted), path)
    return EXIT_OK


def cmd_reduce_build(args: argparse.Namespace) -> int:
    builders = {"p3": build_p3_instance, "p1": build_p1_instance, "p2": build_p2_instance}
    compiled = builders[args.target](read_graph(args.graph), peeters=not args.no_peeters, mode=args.mode)
    coloring = _coloring(args)
    witness = compiled.witness.forward(coloring) if coloring is not None else None
    return _write_compiled(args, compiled.instance, compiled.params, witness)


def cmd_reduce_p3_to_p2(args: argparse.Namespace) -> int:
    source = resolve_instance(args.instance)
    compiled = reduce_p3_to_p2(source)
    witness = None
    if args.emit_witness:
        witness = compiled.witness.forward(load_decomposition(args.emit_witness, source))
    return _write_compiled(args, compiled.instance, compiled.params, witness)


def cmd_reduce_shitov(args: argparse.Namespace) -> int:
    compilation = build_Bbar(load_polysystem(args.system))
    inst = compilation.to_instance()
    witness = None
    if args.emit_witness:
        witness = compilation.witness.forward(parse_vector(read_text(args.emit_witness)))
    return _write_compiled(args, inst, compilation.params, witness)


def cmd_reduce_appendix(args: argparse.Namespace) -> int:
    config = resolve_settings(args, s=args.s, eps0=args.eps0, phat=args.phat)
    params = config.reductions
    compiled = appendix_p2tilde_instance(read_graph(args.graph), args.eps, phat=params.phat, s=params.s,
                                         eps0=params.eps0, peeters=args.peeters, robust_c=args.robust_c,
                                         mode=args.mode, strict=not args.no_strict)
    for check in compiled.params["validator"]:
        colour = "green" if check["ok"] else "yellow"
        console.print(f"  [{colour}]{check['name']}: {check['lhs']:.3e} <= {check['rhs']:.3e}[/{colour}]")
    coloring = _coloring(args)
    witness = compiled.witness.forward(coloring) if coloring is not None else None
    return _write_compiled(args, compiled.instance, compiled.params, witness)


def cmd_reduce_chain(args: argparse.Namespace) -> int:
    emit_text(chain_system(args.length).to_text(), args.out)
    return EXIT_OK


# -- oracle ------------------------------------------------------------------------------

def cmd_oracle_color(args: argparse.Namespace) -> int:
    config = resolve_settings(args, coloring_cap=args.cap)
    G = read_graph(args.graph)
    result = brute_force_3color(G, cap=config.reductions.coloring_cap)
    doc = {"vertices": G.number_of_nodes(), "edges": G.number_of_edges(), "colorable": result.colorable,
           "nodes_visited": result.nodes_visited,
           "coloring": [result.coloring[v] + 1 for v in sorted(result.coloring)] if result.coloring else None}
    if result.colorable:
        console.print("[green]3-colorable[/green]")
    else:
        console.print("[red]not 3-colorable[/red]")
    emit(doc, args.out)
    return EXIT_OK if result.colorable else EXIT_FAIL


def cmd_oracle_probe(args: argparse.Namespace) -> int:
    inst = resolve_instance(args.instance, args.kind, args.rank)
    console.print(f"[blue]Seed: {args.seed}[/blue]")
    report = rank_probe(inst, inst.r, trials=args.trials, seed=args.seed, max_rank=args.max_rank,
                        threads=args.threads, box=args.box, show_progress=not (args.no_progress or args.quiet))
    doc = {"instance": content_hash(inst), **report.to_dict()}
    if report.verified_at_target:
        console.print(f"[green]Verified at rank {report.best_rank_found} (evidence only)[/green]")
    elif report.best_rank_found is not None:
        console.print(f"[yellow]Best verified rank {report.best_rank_found} > target {inst.r} "
                      f"(evidence only)[/yellow]")
    else:
        console.print("[yellow]No sample verified (evidence only)[/yellow]")
    emit(doc, args.out)
    maybe_report(doc, args.report_html, args.instance)
    return EXIT_OK if report.verified_at_target and not report.violations else EXIT_FAIL


def cmd_oracle_lemmas(args: argparse.Namespace) -> int:
    console.print(f"[blue]Seed: {args.seed}[/blue]")
    report = check_perturbation_lemmas(trials=args.trials, seed=args.seed)
    for name, stats in report.lemmas.items():
        colour = "green" if stats.violations == 0 else "red"
        console.print(f"  [{colour}]{name}: {stats.violations}/{stats.trials} violations, "
                      f"worst ratio {stats.worst_ratio:.3g}[/{colour}]")
    doc = report.to_dict()
    emit(doc, args.out)
    maybe_report(doc, args.report_html, "lemmas")
    return EXIT_OK if report.violations == 0 else EXIT_FAIL


def cmd_oracle_complete(args: argparse.Namespace) -> int:
    pm = parse_partial_matrix(read_text(args.matrix))
    result = small_completion_search(pm, args.rank, tol=args.tol)
    doc = {"rank": result.rank, "psd": result.psd, "target_rank": args.rank, "refined": result.refined,
           "entries": [{"i": i + 1, "j": j + 1, "value": encode_scalar(v)}
                       for (i, j), v in sorted(result.entries.items())],
           "matrix": [[encode_scalar(x) for x in row] for row in result.matrix.array]}
    ok = result.psd and result.rank <= args.rank
    if ok:
        console.print(f"[green]PSD completion of rank {result.rank}[/green]")
    else:
        console.print(f"[yellow]Best completion: rank {result.rank}, psd = {result.psd}[/yellow]")
    emit(doc, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_catalog(args: argparse.Namespace) -> int:
    for entry in list_instances():
        console.print(f"[bold]{entry['name']}[/bold] ({entry['kind']}): {entry['note']}")
    emit(list_instances(), args.out)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------------

def _add_output(parser: argparse.ArgumentParser, html: bool = True) -> None:
    parser.add_argument('--out', help='Output file (default: stdout)')
    if html:
        parser.add_argument('--report-html', metavar='PATH', help='Also render an HTML report')


def _add_instance(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('instance', help='Instance JSON, catalog name, or plain matrix file')
    parser.add_argument('--kind', choices=KINDS, help='Problem kind of a plain matrix file (default: P2)')
    parser.add_argument('--rank', type=int, help='Target rank (overrides the instance)')


def _add_witness(parser: argparse.ArgumentParser, what: str) -> None:
    parser.add_argument('--emit-witness', metavar='CERT', help=f'{what}; writes the forward-mapped witness')
    parser.add_argument('--witness-out', metavar='PATH', help='Witness file (default: next to --out)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diagrank",
        description="diagrank - low-rank PSD plus diagonal decompositions",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli.py decompose example1 --rank 3
  python cli.py decompose matrix.txt --kind P1 --rank 2 --mode float --out result.json
  python cli.py verify inst.json dec.json
  python cli.py reduce p1 k3.edges --emit-witness k3.coloring --out k3.json
  python cli.py reduce chain 3
  python cli.py oracle color k4.edges

Exit codes:
  0 feasible / pass, 1 infeasible / fail, 2 unknown, 3 input error,
  4 other error, 130 interrupted
        """
    )
    parser.add_argument('--config', help='Settings file (default: diagrank.cfg)')
    parser.add_argument('--quiet', action='store_true', help='Silence console output')
    parser.add_argument('--no-progress', action='store_true', help='Hide progress bars')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('decompose', help='Solve (P1), (P2) or (P3)')
    _add_instance(p)
    p.add_argument('--mode', choices=MODES, help='Arithmetic mode (default: the instance\'s)')
    p.add_argument('--tol', type=float, help='Rank and PSD tolerance (float mode)')
    p.add_argument('--budget', type=int, help='Variable cap of the polynomial solver')
    p.add_argument('--threads', type=int, help='Parallel index-set workers')
    p.add_argument('--seed', type=int, help='Seed for the numeric starts')
    p.add_argument('--route', choices=ROUTES, default=AUTO, help='(P3) route (default: auto)')
    _add_output(p)
    p.set_defaults(func=cmd_decompose)

    p = commands.add_parser('verify', help='Verify a decomposition file')
    _add_instance(p)
    p.add_argument('decomposition', help='Decomposition JSON')
    p.add_argument('--tol', type=float, help='Float-mode tolerance')
    p.add_argument('--equilibrate', action='store_true', help='Jacobi-scale before the rank test')
    _add_output(p)
    p.set_defaults(func=cmd_verify)

    p = commands.add_parser('reduce', help='Compile graphs and systems into instances')
    targets = p.add_subparsers(dest='target', required=True)

    t = targets.add_parser('peeters', help='Peeters supergraph of a graph')
    t.add_argument('graph')
    _add_witness(t, 'Coloring of the graph')
    t.add_argument('--out', help='Edge-list output (default: stdout)')
    t.set_defaults(func=cmd_reduce_graph)

    t = targets.add_parser('robustify', help='Replace each vertex by a 3-partite gadget')
    t.add_argument('graph')
    t.add_argument('-c', type=int, default=1, help='Robustness parameter (default: 1)')
    _add_witness(t, 'Coloring of the graph')
    t.add_argument('--out', help='Edge-list output (default: stdout)')
    t.set_defaults(func=cmd_reduce_graph)

    for name, text in (('p3', 'rank-3 completion instance'), ('p1', '(P1) incidence instance'),
                       ('p2', '(P2) incidence instance')):
        t = targets.add_parser(name, help=f'Graph to {text}')
        t.add_argument('graph')
        t.add_argument('--no-peeters', action='store_true', help='Skip the Peeters stage')
        t.add_argument('--mode', choices=MODES, default=EXACT)
        _add_witness(t, 'Coloring of the graph')
        t.add_argument('--out', help='Instance output (default: stdout)')
        t.set_defaults(func=cmd_reduce_build)

    t = targets.add_parser('p3-to-p2', help='(P3) instance to (P2) at rank 2m + r')
    t.add_argument('instance')
    _add_witness(t, 'Decomposition (fill L) of the (P3) instance')
    t.add_argument('--out', help='Instance output (default: stdout)')
    t.set_defaults(func=cmd_reduce_p3_to_p2)

    t = targets.add_parser('shitov', help='Polynomial system to a rank-3 completion instance')
    t.add_argument('system', help='Polynomial system text file')
    _add_witness(t, 'Real solution vector')
    t.add_argument('--out', help='Instance output (default: stdout)')
    t.set_defaults(func=cmd_reduce_shitov)

    t = targets.add_parser('appendix-p2tilde', help='Graph to a perturbed (P2) instance')
    t.add_argument('graph')
    t.add_argument('--eps', type=float, required=True, help='Perturbation budget')
    t.add_argument('--s', type=float, help='Scale of the large entries')
    t.add_argument('--eps0', type=float, help='Bound constant for eps')
    t.add_argument('--phat', type=float, help='Entry bound of the input matrix')
    t.add_argument('--peeters', action='store_true', help='Apply the Peeters stage')
    t.add_argument('--robust-c', type=int, help='Apply robustify with this parameter')
    t.add_argument('--mode', choices=MODES, default=EXACT)
    t.add_argument('--no-strict', action='store_true', help='Warn instead of failing on violated bounds')
    _add_witness(t, 'Coloring of the graph')
    t.add_argument('--out', help='Instance output (default: stdout)')
    t.set_defaults(func=cmd_reduce_appendix)

    t = targets.add_parser('chain', help='Write the repeated-squaring polynomial system')
    t.add_argument('length', type=int)
    t.add_argument('--out', help='System output (default: stdout)')
    t.set_defaults(func=cmd_reduce_chain)

    p = commands.add_parser('oracle', help='Brute-force and randomized checks')
    checks = p.add_subparsers(dest='check', required=True)

    o = checks.add_parser('color', help='Exhaustive 3-coloring')
    o.add_argument('graph')
    o.add_argument('--cap', type=int, help='Largest graph to search')
    o.add_argument('--out', help='Report output (default: stdout)')
    o.set_defaults(func=cmd_oracle_color)

    o = checks.add_parser('probe', help='Randomized rank probe (evidence only)')
    _add_instance(o)
    o.add_argument('--trials', type=int, default=1000)
    o.add_argument('--seed', type=int, default=0)
    o.add_argument('--threads', type=int, default=1)
    o.add_argument('--max-rank', type=int)
    o.add_argument('--box', type=float, default=10.0, help='Range of the random starts')
    _add_output(o)
    o.set_defaults(func=cmd_oracle_probe)

    o = checks.add_parser('lemmas', help='Sampled perturbation-lemma checks')
    o.add_argument('--trials', type=int, default=100)
    o.add_argument('--seed', type=int, default=0)
    _add_output(o)
    o.set_defaults(func=cmd_oracle_lemmas)

    o = checks.add_parser('complete', help='Grid search for a low-rank PSD completion')
    o.add_argument('matrix', help='Matrix file with * for unspecified entries')
    o.add_argument('--rank', type=int, required=True)
    o.add_argument('--tol', type=float, default=1e-9)
    o.add_argument('--out', help='Report output (default: stdout)')
    o.set_defaults(func=cmd_oracle_complete)

    p = commands.add_parser('catalog', help='List the built-in instances')
    p.add_argument('--out', help='Output (default: stdout)')
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    set_quiet(args.quiet)
    print_banner()

    try:
        return args.func(args)
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        return EXIT_INTERRUPTED
    except INPUT_ERRORS as e:
        console.print(f"[red]Error: {escape(str(e))}[/red]")
        return EXIT_INPUT
    except (DiagrankError, ValueError) as e:
        console.print(f"[red]Error: {escape(str(e))}[/red]")
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
