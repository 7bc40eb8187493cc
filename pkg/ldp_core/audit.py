"""
Deterministic sensitivity audits and measurement harnesses.

Privacy is checked structurally rather than by estimating epsilon from
samples: the audits confirm that neighboring inputs move exactly the
quantities the noise is calibrated for, and that the configured scales are
the ones the calibration asks for. Accuracy is checked per run through the
observed noisy-degree error alpha_obs.
"""

import logging
import math
import os
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core_approx import build_schedule, run_approx_core
from .core_exact import (
    EstimateVector,
    MemoryfulUser,
    counter_prefix,
    predicted_alpha,
    privacy_budget,
    run_exact_core,
    upper_set_min_degrees,
)
from .counting import (
    CounterConfig,
    bt_state_from_history,
    make_counter,
    sum_bin,
    sv_error_bound,
    tree_height,
    tree_node_values,
    validate_counter_config,
)
from .dp_noise import tail_radius
from .errors import CorruptTranscriptError, InvalidInputError
from .generators import neighboring_pair
from .graph_core import Graph, exact_coreness, max_degree, vertices
from .local_sim import RunConfig, Transcript, transcript_replay_user_view, user_inputs

logger = logging.getLogger(__name__)

AUDIT_KINDS = ('counter-sensitivity', 'stream-discrepancy', 'alpha')

# share of trials that must stay under the predicted bound in audit_alpha
ALPHA_PASS_RATE = 0.95


class AuditReport(NamedTuple):
    kind: str
    passed: bool
    details: dict

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'pass': self.passed, 'details': self.details}


def dyadic_ancestors(t: int, stream_len: int, T: int) -> set:
    """
    (level, epoch) of every node materialized within `stream_len` steps whose
    block contains step t; a node of level j closes at a step whose lowest set
    bit is j, so its epoch is odd.
    """
    nodes = set()
    for j in range(tree_height(T) + 1):
        epoch = -(-t // (1 << j))
        if epoch % 2 == 1 and epoch << j <= stream_len:
            nodes.add((j, epoch))
    return nodes


def node_differences(stream_a: Sequence[int], stream_b: Sequence[int], T: int) -> Dict[Tuple[int, int], int]:
    """Nodes whose true values differ between the two streams, with the difference."""
    values_a = tree_node_values(stream_a, T)
    values_b = tree_node_values(stream_b, T)
    diffs = {}
    for key in set(values_a) | set(values_b):
        delta = values_a.get(key, 0) - values_b.get(key, 0)
        if delta:
            diffs[key] = delta
    return diffs


def audit_counter_sensitivity(cfg: CounterConfig, stream_len: int, trials: int, seed: int) -> AuditReport:
    """
    Replay random neighboring stream pairs through the binary-tree node
    computation; pass iff every pair differs on at most h + 1 nodes, each by
    exactly 1, and those nodes are the materialized ancestors of the changed step.
    """
    validate_counter_config(cfg)
    if not 1 <= stream_len <= cfg.T:
        raise InvalidInputError(f"stream_len must lie in 1..T={cfg.T}, got {stream_len}")
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    h = tree_height(cfg.T)
    max_nodes = 0
    max_delta = 0
    failures = 0
    for _ in range(trials):
        stream = rng.integers(0, 4, size=stream_len)
        t = int(rng.integers(1, stream_len + 1))
        neighbor = stream.copy()
        if neighbor[t - 1] == 0 or rng.random() < 0.5:
            neighbor[t - 1] += 1
        else:
            neighbor[t - 1] -= 1
        diffs = node_differences(stream.tolist(), neighbor.tolist(), cfg.T)
        max_nodes = max(max_nodes, len(diffs))
        max_delta = max(max_delta, max((abs(x) for x in diffs.values()), default=0))
        if (len(diffs) > h + 1 or any(abs(x) != 1 for x in diffs.values())
                or set(diffs) != dyadic_ancestors(t, stream_len, cfg.T)):
            failures += 1
    details = {
        'T': cfg.T,
        'h': h,
        'stream_len': stream_len,
        'trials': trials,
        'max_differing_nodes': max_nodes,
        'max_node_difference': max_delta,
        'failures': failures,
    }
    passed = failures == 0 and max_nodes <= h + 1 and max_delta <= 1
    logger.info(f"Counter sensitivity audit: {trials} pairs, max {max_nodes} differing nodes (h+1={h + 1}), pass={passed}")
    return AuditReport(kind='counter-sensitivity', passed=passed, details=details)


def _run(g: Graph, cfg: RunConfig, protocol: str):
    if protocol == 'exact':
        return run_exact_core(g, cfg)
    if protocol == 'approx':
        return run_approx_core(g, cfg)
    raise InvalidInputError(f"Unknown protocol {protocol!r}; choose exact or approx")


def first_divergence(tr_a: Transcript, tr_b: Transcript) -> Optional[int]:
    """First round whose deleted sets differ, or None."""
    for r_a, r_b in zip(tr_a.rounds, tr_b.rounds):
        if r_a.S != r_b.S:
            return r_a.t
    if len(tr_a) != len(tr_b):
        return min(len(tr_a), len(tr_b)) + 1
    return None


def audit_protocol_stream_discrepancy(g: Graph, edge: Tuple[int, int], cfg: RunConfig, protocol: str = 'exact') -> AuditReport:
    """
    Run the protocol on g and on g with `edge` toggled, with coupled noise,
    and compare what every user inserts before the first divergent round.
    Non-endpoints must insert identical streams. Each endpoint's initial degree
    differs by one and at most one later element differs, by one, at the step
    that follows the deletion of the other endpoint.
    """
    u, v = edge
    g_a, g_b = neighboring_pair(g, u, v)
    _, tr_a = _run(g_a, cfg, protocol)
    _, tr_b = _run(g_b, cfg, protocol)
    diverged = first_divergence(tr_a, tr_b)
    horizon = diverged if diverged is not None else len(tr_a) + 1
    deleted_in = {}
    for r in tr_a.rounds[:horizon - 1]:
        for w in r.S:
            deleted_in[w] = r.t

    def acted_until(w):
        # inputs built from the shared deleted sets only
        return min(deleted_in.get(w, horizon), horizon) + 1

    non_endpoint_mismatches = 0
    for w in vertices(g_a):
        if w in (u, v):
            continue
        upto = acted_until(w)
        if user_inputs(tr_a, g_a.adjacency[w], upto) != user_inputs(tr_b, g_b.adjacency[w], upto):
            non_endpoint_mismatches += 1

    endpoints = {}
    endpoints_ok = True
    for w, other in ((u, v), (v, u)):
        upto = acted_until(w)
        inputs_a = user_inputs(tr_a, g_a.adjacency[w], upto)
        inputs_b = user_inputs(tr_b, g_b.adjacency[w], upto)
        diffs = [(step, a - b) for step, (a, b) in enumerate(zip(inputs_a, inputs_b)) if a != b]
        initial = [d for step, d in diffs if step == 0]
        changes = [(step, d) for step, d in diffs if step > 0]
        ok = len(initial) == 1 and abs(initial[0]) == 1 and len(changes) <= 1
        for step, d in changes:
            # counter step s inserts |N_w & S_s|; it can only differ if `other` is in S_s
            ok = ok and abs(d) == 1 and deleted_in.get(other) == step
        endpoints_ok = endpoints_ok and ok
        endpoints[str(w)] = {'initial_difference': initial[0] if initial else 0, 'change_differences': changes, 'ok': ok}

    details = {
        'edge': [u, v],
        'divergence_round': diverged,
        'compared_rounds': horizon - 1,
        'non_endpoint_mismatches': non_endpoint_mismatches,
        'endpoints': endpoints,
    }
    passed = non_endpoint_mismatches == 0 and endpoints_ok
    logger.info(f"Stream discrepancy audit on edge ({u}, {v}): divergence at {diverged}, pass={passed}")
    return AuditReport(kind='stream-discrepancy', passed=passed, details=details)


def measure_alpha_obs(tr: Transcript, g: Graph) -> float:
    """
    Largest |noisy degree - true degree| over every message of the run; true
    degrees are rebuilt from g and the deleted sets.
    """
    if tr.n != g.n:
        raise CorruptTranscriptError(f"Transcript has n={tr.n} but the graph has n={g.n}")
    current = [len(nbrs) for nbrs in g.adjacency]
    alive = set(vertices(g))
    alpha = 0.0
    for rnd in tr.rounds:
        unknown = set(rnd.msgs) - alive
        if unknown:
            raise CorruptTranscriptError(f"Round {rnd.t}: messages from {sorted(unknown)} which are not alive in the graph")
        for w, msg in rnd.msgs.items():
            alpha = max(alpha, abs(msg - current[w]))
        for w in rnd.S:
            alive.discard(w)
            for x in g.adjacency[w]:
                current[x] -= 1
    return alpha


def check_robustness_chain(g: Graph, est: EstimateVector, tr: Transcript) -> AuditReport:
    """
    Zero-tolerance check of the robustness guarantee of the exact protocol:
    with alpha = measure_alpha_obs, every |k~(v) - k(v)| <= alpha and every
    G[{u : k~(u) >= k~(v)}] has min induced degree >= k~(v) - alpha.
    """
    alpha = measure_alpha_obs(tr, g)
    core = exact_coreness(g)
    verts = vertices(g)
    worst = max((abs(est.values[v] - core[v]) for v in verts), default=0.0)
    estimate_ok = all(abs(est.values[v] - core[v]) <= alpha for v in verts)
    witness_ok = all(low >= value - alpha for value, low in upper_set_min_degrees(g, est).items())
    details = {'alpha_obs': alpha, 'max_err': worst, 'estimate_clause': estimate_ok, 'witness_clause': witness_ok}
    return AuditReport(kind='robustness-chain', passed=estimate_ok and witness_ok, details=details)


def predicted_alpha_for(g: Graph, cfg: RunConfig, T: int, beta: float) -> float:
    """Predicted noisy-degree error for the counter kind of cfg at horizon T."""
    if cfg.noise == 'disabled':
        return 0.0
    initial = tail_radius(privacy_budget(cfg, T).initial_scale, beta)
    if cfg.counter == 'binary_tree':
        return predicted_alpha(T, cfg.epsilon, beta)
    if cfg.counter == 'sparse_vector':
        return sv_error_bound(T, max(1, max_degree(g)), beta, cfg.epsilon / 2) + initial
    return initial


def audit_alpha(g: Graph, cfg: RunConfig, trials: int, protocol: str = 'exact', beta: Optional[float] = None) -> AuditReport:
    """
    Compare alpha_obs over `trials` seeded runs (seeds cfg.seed, cfg.seed+1, ...)
    against the predicted bound with beta = 1/n^2 by default; pass iff at
    least 95% of the runs stay under it.
    """
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    n = len(vertices(g))
    if protocol == 'approx':
        T = build_schedule(max(2, n), cfg.eta, cfg.phase_rounds, cfg.label_rule).total_rounds
    else:
        T = max(1, n)
    beta = beta if beta is not None else 1.0 / max(2, n) ** 2
    bound = predicted_alpha_for(g, cfg, T, beta)
    observed = []
    for i in range(trials):
        _, tr = _run(g, cfg._replace(seed=cfg.seed + i), protocol)
        observed.append(measure_alpha_obs(tr, g))
    within = sum(1 for a in observed if a <= bound)
    details = {
        'n': n,
        'T': T,
        'beta': beta,
        'predicted': bound,
        'alpha_obs': observed,
        'median_alpha_obs': float(np.median(observed)),
        'within_bound': within,
        'trials': trials,
    }
    passed = within >= math.ceil(ALPHA_PASS_RATE * trials)
    logger.info(f"Alpha audit ({protocol}, {cfg.counter}): {within}/{trials} runs within {bound:.2f}")
    return AuditReport(kind='alpha', passed=passed, details=details)


def audit_noise_calibration(cfg: RunConfig, n: int) -> AuditReport:
    """
    Compare the scales the users actually draw from against the calibration:
    4/epsilon on initial degrees, epsilon/2 per counter and (h+1)/(epsilon/2)
    per tree node at horizon T = n.
    """
    T = max(1, n)
    expected = {
        'initial_scale': 4 / cfg.epsilon,
        'counter_epsilon': cfg.epsilon / 2,
        'node_scale': (tree_height(T) + 1) / (cfg.epsilon / 2),
    }
    user = MemoryfulUser(cfg._replace(noise='laplace', counter='binary_tree'), T)
    counter = make_counter(user.counter_cfg, user.master, counter_prefix(0))
    configured = {
        'initial_scale': user.initial_noise.scale,
        'counter_epsilon': user.counter_cfg.epsilon,
        'node_scale': counter.noise.scale,
    }
    mismatches = [k for k in expected if not math.isclose(expected[k], configured[k], rel_tol=1e-12)]
    ledger = privacy_budget(cfg, T)
    details = {
        'expected': expected,
        'configured': configured,
        'mismatches': mismatches,
        'total_epsilon': ledger.initial_epsilon + ledger.counter_epsilon,
    }
    passed = not mismatches and math.isclose(details['total_epsilon'], cfg.epsilon)
    return AuditReport(kind='noise-calibration', passed=passed, details=details)


def audit_memoryless_replay(g: Graph, tr: Transcript, cfg: RunConfig, horizon: Optional[int] = None) -> AuditReport:
    """
    For every vertex of a memoryless run, rebuild its tree state from the
    transcript alone, through the last round it sent (its deletion round), and
    check that the rebuilt release reproduces every noisy degree the server
    recorded from it there, and that the true node sums match.

    Parameters:
        horizon (int | None): counter horizon of the run; n for the exact
            protocol (the default), Phi * R for the approximate one
    """
    n = len(vertices(g))
    T = max(1, n) if horizon is None else horizon
    if T < 1:
        raise InvalidInputError(f"Counter horizon must be >= 1, got {T}")
    counter_cfg = CounterConfig(T=T, epsilon=cfg.epsilon / 2, kind='binary_tree', beta=cfg.beta)
    deleted_in = {w: r.t for r in tr.rounds for w in r.S}
    checked = 0
    mismatched: List[int] = []
    for v in vertices(g):
        last = deleted_in.get(v, len(tr))
        if last < 2:
            continue
        view = transcript_replay_user_view(tr, v, g.adjacency[v], last)
        final = tr.round(last)
        if v not in final.nodes:
            raise CorruptTranscriptError(f"Round {last} carries no node message from vertex {v} (memoryful transcript?)")
        stream = view.inputs[1:] + [len(set(g.adjacency[v]) & tr.round(last - 1).S)]
        state = bt_state_from_history(stream, view.outputs + [final.nodes[v][1]], counter_cfg)
        rebuilt = tr.round(1).msgs[v] - sum_bin(state.alpha_hat, state.t)
        truth = tree_node_values(stream, T)
        levels_ok = all(
            state.alpha[j] == truth[(j, state.t >> j)]
            for j in range(state.h + 1) if state.t >> j & 1
        )
        checked += 1
        if rebuilt != final.msgs[v] or not levels_ok:
            mismatched.append(v)
    if mismatched:
        logger.warning(f"Memoryless replay mismatched {len(mismatched)} vertices: {mismatched[:10]}")
    details = {'checked_vertices': checked, 'mismatched': mismatched, 'horizon': T}
    return AuditReport(kind='memoryless-replay', passed=not mismatched, details=details)


def replay_transcript_file(path: str, n: Optional[int] = None) -> Transcript:
    """Load a JSON-lines transcript; n defaults to 1 + the largest vertex id seen."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Transcript file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.readlines()
    if n is None:
        tr = Transcript.from_jsonl(lines, n=0)
        ids = [v for r in tr.rounds for v in r.msgs]
        tr.n = 1 + max(ids, default=-1)
        logger.info(f"Replayed {len(tr)} rounds from {path} (n inferred as {tr.n})")
        return tr
    tr = Transcript.from_jsonl(lines, n=n)
    logger.info(f"Replayed {len(tr)} rounds from {path}")
    return tr
