"""
Command-line front end.

Subcommands: generate, oracle, run-exact, run-approx, run-densest, audit, sweep.
Exit codes: 0 success, 2 validation error, 3 divergence/overflow, 4 I/O.
"""

import argparse
import json
import logging
import sys
from fractions import Fraction

from .audit import (
    AUDIT_KINDS,
    audit_alpha,
    audit_counter_sensitivity,
    audit_protocol_stream_discrepancy,
)
from .config import COUNTER_KINDS, MEMORY_MODES, NOISE_MODES, setup_global_logging
from .core_approx import LABEL_RULES, run_approx_core
from .core_exact import estimates_frame, run_exact_core
from .counting import CounterConfig
from .densest import DENSEST_MODES, densest_report, run_densest
from .errors import EXIT_OK, InvalidInputError, LdpCoreError, exit_code_for
from .generators import FAMILIES, generate
from .graph_core import brute_force_densest, exact_coreness, read_edge_list, vertices, write_edge_list
from .local_sim import RunConfig
from .sweep import PROTOCOLS, ExperimentSpec, cmd_sweep, fit_log2_scaling

logger = logging.getLogger(__name__)

BRUTE_FORCE_REPORT_MAX_N = 20


def _counter_kind(value: str) -> str:
    """CLI spells counter kinds with hyphens (binary-tree); the library with underscores."""
    kind = value.replace('-', '_')
    if kind not in COUNTER_KINDS:
        raise argparse.ArgumentTypeError(f"unknown counter {value!r}; choose from binary-tree, sparse-vector, exact-debug")
    return kind


def _int_list(value: str):
    try:
        return tuple(int(x) for x in value.split(',') if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def _float_list(value: str):
    try:
        return tuple(float(x) for x in value.split(',') if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}")


def _name_list(value: str):
    return tuple(x.strip() for x in value.split(',') if x.strip())


def _format_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def _add_protocol_flags(parser, approx: bool = False):
    parser.add_argument('--graph', required=True, help='Edge-list file ("u v" per line, optional "n <count>" header)')
    parser.add_argument('--epsilon', type=float, default=1.0, help='Total privacy budget (default 1.0)')
    parser.add_argument('--eta', type=float, default=1.0 if approx else None,
                        help='Approximation slack of the approximate protocol (default 1.0)')
    parser.add_argument('--counter', type=_counter_kind, default='binary_tree',
                        help='binary-tree | sparse-vector | exact-debug (default binary-tree)')
    parser.add_argument('--memory', choices=MEMORY_MODES, default='memoryful', help='User memory mode')
    parser.add_argument('--seed', type=int, default=0, help='Master seed (u64)')
    parser.add_argument('--noise', choices=NOISE_MODES, default='laplace', help='"disabled" runs the noise-free debug mode')
    parser.add_argument('--assert-private', action='store_true', help='Refuse any setting that is not private')
    parser.add_argument('--max-rounds', type=int, default=None, help='Abort with exit code 3 beyond this many rounds')
    parser.add_argument('--phase-rounds', type=int, default=None, help='Rounds per phase of the approximate protocol')
    parser.add_argument('--label-rule', choices=LABEL_RULES, default='threshold',
                        help='Estimate of a vertex deleted in phase phi: (2+eta)^phi or (2+eta)^(phi-1)')


def _run_config(args) -> RunConfig:
    return RunConfig(
        epsilon=args.epsilon,
        memory_mode=args.memory,
        counter=args.counter,
        eta=args.eta,
        seed=args.seed,
        max_rounds=args.max_rounds,
        noise=args.noise,
        private=args.assert_private,
        phase_rounds=args.phase_rounds,
        label_rule=args.label_rule,
    )


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def cmd_generate(args):
    g = generate(args.family, args.n, args.seed, p=args.p, d=args.d, X=args.x, Q=args.q)
    write_edge_list(g, args.out)


def cmd_oracle(args):
    """Print the exact coreness vector, k* and (for small graphs) rho* with its witness."""
    g = read_edge_list(args.graph)
    core = exact_coreness(g)
    verts = vertices(g)
    k_star = max((core[v] for v in verts), default=0)
    parts = [f"k={','.join(str(core[v]) for v in verts)}", f"k*={k_star}"]
    witness = None
    if len(verts) <= BRUTE_FORCE_REPORT_MAX_N and verts:
        witness, rho_star = brute_force_densest(g)
        parts.append(f"rho*={_format_rational(rho_star)}")
    print('; '.join(parts))
    if witness is not None:
        print(f"witness={','.join(str(v) for v in sorted(witness))}")


def _write_estimates(g, est, tr, args):
    if args.transcript:
        tr.write(args.transcript)
    frame = estimates_frame(g, est)
    if args.out:
        try:
            frame.to_csv(args.out, index=False)
        except OSError as e:
            raise OSError(f"Cannot write estimates CSV {args.out}: {e}") from e
        logger.info(f"Wrote {len(frame)} estimates to {args.out}")
    else:
        frame.to_csv(sys.stdout, index=False)


def cmd_run_exact(args):
    g = read_edge_list(args.graph)
    est, tr = run_exact_core(g, _run_config(args))
    _write_estimates(g, est, tr, args)


def cmd_run_approx(args):
    g = read_edge_list(args.graph)
    est, tr = run_approx_core(g, _run_config(args))
    _write_estimates(g, est, tr, args)


def cmd_run_densest(args):
    g = read_edge_list(args.graph)
    result = run_densest(g, _run_config(args), mode=args.mode)
    _print_json(densest_report(g, result))


def cmd_audit(args):
    if args.kind == 'counter-sensitivity':
        cfg = CounterConfig(T=args.T, epsilon=args.epsilon, kind='binary_tree')
        stream_len = args.stream_len if args.stream_len is not None else args.T
        report = audit_counter_sensitivity(cfg, stream_len, args.trials, args.seed)
    else:
        if not args.graph:
            raise InvalidInputError(f"audit {args.kind} needs --graph")
        g = read_edge_list(args.graph)
        cfg = _run_config(args)
        if args.kind == 'stream-discrepancy':
            if args.edge is None or len(args.edge) != 2:
                raise InvalidInputError("audit stream-discrepancy needs --edge u,v")
            report = audit_protocol_stream_discrepancy(g, tuple(args.edge), cfg, protocol=args.protocol)
        else:
            report = audit_alpha(g, cfg, args.trials, protocol=args.protocol, beta=args.beta)
    _print_json(report.to_dict())
    return report


def cmd_sweep_args(args):
    spec = ExperimentSpec(
        sizes=args.sizes,
        family=args.family,
        epsilons=args.epsilons,
        eta=args.eta,
        counter=args.counter,
        memory=args.memory,
        trials=args.trials,
        seed=args.seed,
        out=args.out,
        protocols=args.protocols,
        noise=args.noise,
        p=args.p,
        avg_degree=args.avg_degree,
        d=args.d,
        phase_rounds=args.phase_rounds,
        timing=not args.no_timing,
    )
    df = cmd_sweep(spec, xlsx=args.xlsx)
    if args.fit:
        for protocol in spec.protocols:
            fit = fit_log2_scaling(df, protocol=protocol)
            print(f"{protocol}: max_err ~ {fit.slope:.4f} * ln(n)^2 + {fit.intercept:.4f} (R^2={fit.r_squared:.3f})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ldp_core',
        description='Locally differentially private core decomposition and densest subgraph simulator',
    )
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', help='Write a generated graph as an edge list')
    p.add_argument('--family', choices=FAMILIES, required=True)
    p.add_argument('--n', type=int, required=True, help='Vertex count (query-graph: length of X and Q)')
    p.add_argument('--p', type=float, default=0.1, help='Edge probability for gnp')
    p.add_argument('--d', type=int, default=3, help='Degree for regular')
    p.add_argument('--x', default='', help='query-graph X as a 0/1 string')
    p.add_argument('--q', default='', help='query-graph Q as a 0/1 string')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('oracle', help='Print exact coreness, k* and rho* (n <= 20)')
    p.add_argument('--graph', required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser('run-exact', help='Run the exact protocol; CSV vertex,k_true,k_est,round')
    _add_protocol_flags(p)
    p.add_argument('--transcript', default=None, help='Dump the transcript as JSON lines')
    p.add_argument('--out', default=None, help='CSV path (default stdout)')
    p.set_defaults(func=cmd_run_exact)

    p = sub.add_parser('run-approx', help='Run the (2+eta)-approximate protocol; CSV adds a phase column')
    _add_protocol_flags(p, approx=True)
    p.add_argument('--transcript', default=None, help='Dump the transcript as JSON lines')
    p.add_argument('--out', default=None, help='CSV path (default stdout)')
    p.set_defaults(func=cmd_run_approx)

    p = sub.add_parser('run-densest', help='Densest subgraph from coreness estimates; JSON report')
    _add_protocol_flags(p, approx=True)
    p.add_argument('--mode', choices=DENSEST_MODES, default='exact')
    p.set_defaults(func=cmd_run_densest)

    p = sub.add_parser('audit', help='Sensitivity and accuracy audits; JSON report')
    p.add_argument('kind', choices=AUDIT_KINDS)
    p.add_argument('--graph', default=None, help='Edge-list file (stream-discrepancy, alpha)')
    p.add_argument('--epsilon', type=float, default=1.0)
    p.add_argument('--eta', type=float, default=1.0)
    p.add_argument('--counter', type=_counter_kind, default='binary_tree')
    p.add_argument('--memory', choices=MEMORY_MODES, default='memoryful')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--noise', choices=NOISE_MODES, default='laplace')
    p.add_argument('--assert-private', action='store_true')
    p.add_argument('--max-rounds', type=int, default=None)
    p.add_argument('--phase-rounds', type=int, default=None)
    p.add_argument('--label-rule', choices=LABEL_RULES, default='threshold')
    p.add_argument('--protocol', choices=PROTOCOLS, default='exact')
    p.add_argument('--edge', type=_int_list, default=None, help='stream-discrepancy: edge to toggle, "u,v"')
    p.add_argument('--T', type=int, default=1024, help='counter-sensitivity: horizon')
    p.add_argument('--stream-len', type=int, default=None, help='counter-sensitivity: stream length (default T)')
    p.add_argument('--trials', type=int, default=100)
    p.add_argument('--beta', type=float, default=None, help='alpha: failure probability (default 1/n^2)')
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser('sweep', help='Run a grid of protocol runs and write the sweep CSV')
    p.add_argument('--sizes', type=_int_list, required=True, help='Comma-separated n values')
    p.add_argument('--family', choices=FAMILIES, default='gnp')
    p.add_argument('--p', type=float, default=None, help='gnp edge probability (default avg-degree/(n-1))')
    p.add_argument('--avg-degree', type=float, default=8.0)
    p.add_argument('--d', type=int, default=8, help='Degree for regular')
    p.add_argument('--epsilons', type=_float_list, default=(1.0,))
    p.add_argument('--eta', type=float, default=1.0)
    p.add_argument('--counter', type=_counter_kind, default='binary_tree')
    p.add_argument('--memory', choices=MEMORY_MODES, default='memoryful')
    p.add_argument('--protocols', type=_name_list, default=('exact',), help='exact,approx')
    p.add_argument('--noise', choices=NOISE_MODES, default='laplace')
    p.add_argument('--phase-rounds', type=int, default=None)
    p.add_argument('--trials', type=int, default=1)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True, help='Sweep CSV path')
    p.add_argument('--xlsx', default=None, help='Also write a formatted workbook')
    p.add_argument('--fit', action='store_true', help='Print the ln(n)^2 fit over per-n medians')
    p.add_argument('--no-timing', action='store_true', help='Write ms=0 so reruns are byte-identical')
    p.set_defaults(func=cmd_sweep_args)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_global_logging(level=getattr(logging, args.log_level))
    try:
        args.func(args)
    except (LdpCoreError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
