"""
Exact coreness estimation in the local model.

The server runs a noisy Matula-Beck peeling loop: it keeps a running level d,
raises it to the smallest noisy degree it receives, and deletes every alive
vertex whose noisy degree is at most d; each deleted vertex is estimated at d.

Each user v sends d~_1(v) = |N_v| + Lap(4/epsilon) in round 1 and afterwards
d~_1(v) minus the release of its own epsilon/2 continual counter, into which it
inserts the number of neighbors deleted in the previous round.
"""

import logging
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Tuple

import pandas as pd

from .config import ESTIMATE_CSV_FIELDS
from .counting import CounterConfig, bt_error_bound, lowest_set_bit, make_counter, node_label, node_scale
from .dp_noise import NoiseSource, derive, laplace_scale, make_noise_source, noise_label, sample_laplace, tail_radius
from .errors import InvalidInputError, ProtocolViolationError, StreamOverflowError
from .graph_core import Graph, exact_coreness, min_induced_degree, vertices
from .local_sim import RunConfig, Transcript, Wire, run_protocol, validate_run_config

logger = logging.getLogger(__name__)

# Lap(4/epsilon) on the initial degree vector: l1-sensitivity 2 at budget epsilon/2
INITIAL_DEGREE_SENSITIVITY = 2.0


class EstimateVector(NamedTuple):
    values: Tuple[float, ...]
    round_assigned: Tuple[int, ...]
    # phase of deletion; None for the exact protocol
    phase: Optional[Tuple[int, ...]] = None


class BudgetLedger(NamedTuple):
    total: float
    initial_epsilon: float
    initial_scale: float
    counter_epsilon: float
    counter_horizon: int
    node_scale: float


def privacy_budget(cfg: RunConfig, T: int) -> BudgetLedger:
    """
    Split of the run budget: epsilon/2 for the noisy initial degrees and
    epsilon/2 for every per-user counter of horizon T.
    """
    initial_epsilon = cfg.epsilon / 2
    counter_epsilon = cfg.epsilon / 2
    return BudgetLedger(
        total=cfg.epsilon,
        initial_epsilon=initial_epsilon,
        initial_scale=laplace_scale(INITIAL_DEGREE_SENSITIVITY, initial_epsilon),
        counter_epsilon=counter_epsilon,
        counter_horizon=T,
        node_scale=node_scale(T, counter_epsilon),
    )


def predicted_alpha(n: int, epsilon: float, beta: float) -> float:
    """Bound on one noisy degree: counter error at T = n plus the initial Laplace tail."""
    return bt_error_bound(n, beta, epsilon / 2) + tail_radius(laplace_scale(INITIAL_DEGREE_SENSITIVITY, epsilon / 2), beta)


def check_messages(alive: FrozenSet[int], msgs: Dict[int, float]):
    missing = alive - set(msgs)
    if missing:
        raise ProtocolViolationError(f"Missing messages from alive vertices {sorted(missing)}")
    extra = set(msgs) - alive
    if extra:
        raise ProtocolViolationError(f"Messages from vertices that are not alive: {sorted(extra)}")


def exact_server_step(d: float, alive: Iterable[int], msgs: Dict[int, float]) -> Tuple[float, FrozenSet[int]]:
    """
    One server round: d' = max(d, min message) and S_t = alive vertices whose
    message is at most d'. The minimizer is always deleted.
    """
    alive = frozenset(alive)
    if not alive:
        raise InvalidInputError("exact_server_step needs at least one alive vertex")
    check_messages(alive, msgs)
    d_new = max(d, min(msgs[v] for v in alive))
    return d_new, frozenset(v for v in alive if msgs[v] <= d_new)


def initial_degree_message(v: int, neighbors: Iterable[int], noise: NoiseSource) -> float:
    """d~_1(v) = |N_v| + Lap(4/epsilon); the draw is labelled by v alone."""
    return len(tuple(neighbors)) + sample_laplace(noise, noise_label('initial', v))


def exact_user_step(v: int, N_v: Iterable[int], S_prev: Optional[FrozenSet[int]], counter, d1: float) -> float:
    """
    Message of an alive user. Round 1 (S_prev is None) sends d1; later rounds
    insert |N_v & S_prev| into the counter and send d1 minus its release.
    """
    if S_prev is None:
        return d1
    if v in S_prev:
        raise ProtocolViolationError(f"Vertex {v} was deleted and cannot send another message")
    x = sum(1 for w in N_v if w in S_prev)
    return d1 - counter.insert(x)


def counter_prefix(v: int) -> str:
    return noise_label('counter', v)


class MemoryfulUser:
    """All users of a memoryful run; each entry of `counters` belongs to one vertex."""

    def __init__(self, cfg: RunConfig, T: int):
        ledger = privacy_budget(cfg, T)
        self.master = make_noise_source(cfg.seed, cfg.noise)
        self.initial_noise = derive(self.master, ledger.initial_scale)
        self.counter_cfg = CounterConfig(T=T, epsilon=ledger.counter_epsilon, kind=cfg.counter, beta=cfg.beta)
        self.initial = {}
        self.counters = {}

    def message(self, v: int, neighbors, t: int, transcript: Transcript) -> Wire:
        if t == 1:
            self.initial[v] = initial_degree_message(v, neighbors, self.initial_noise)
            self.counters[v] = make_counter(self.counter_cfg, self.master, counter_prefix(v))
            return Wire(self.initial[v])
        s_prev = transcript.round(t - 1).S
        return Wire(exact_user_step(v, neighbors, s_prev, self.counters[v], self.initial[v]))


class MemorylessUser:
    """
    Users that keep nothing between rounds. At round t >= 2 the counter step is
    t - 1 and the node to release sits at level i = lowest set bit of t - 1; the
    user rebuilds the 2**i inputs of that node from the deleted sets in the
    transcript, adds the node's Laplace draw and sends (i, node).
    """

    def __init__(self, cfg: RunConfig, T: int):
        if cfg.counter == 'sparse_vector':
            raise InvalidInputError("The sparse_vector counter has no memoryless form")
        ledger = privacy_budget(cfg, T)
        master = make_noise_source(cfg.seed, cfg.noise)
        self.T = T
        self.initial_noise = derive(master, ledger.initial_scale)
        if cfg.counter == 'exact_debug':
            self.node_noise = make_noise_source(cfg.seed, 'disabled')
        else:
            self.node_noise = derive(master, ledger.node_scale)

    def message(self, v: int, neighbors, t: int, transcript: Transcript) -> Wire:
        if t == 1:
            return Wire(initial_degree_message(v, neighbors, self.initial_noise))
        step = t - 1
        if step > self.T:
            raise StreamOverflowError(f"Counter {counter_prefix(v)!r} received insert {step} beyond horizon T={self.T}")
        i = lowest_set_bit(step)
        nbrs = frozenset(neighbors)
        alpha = sum(len(nbrs & transcript.round(s).S) for s in range(step - (1 << i) + 1, step + 1))
        node = alpha + sample_laplace(self.node_noise, node_label(counter_prefix(v), i, step))
        return Wire(node, level=i)


def make_user(cfg: RunConfig, T: int):
    if cfg.memory_mode == 'memoryless':
        return MemorylessUser(cfg, T)
    return MemoryfulUser(cfg, T)


class ExactServer:
    def __init__(self, g: Graph):
        self.alive = frozenset(vertices(g))
        self.d = 0.0
        self.values = [0.0] * g.n
        self.rounds = [0] * g.n

    def step(self, t: int, msgs: Dict[int, float]):
        self.d, s_t = exact_server_step(self.d, self.alive, msgs)
        for v in s_t:
            self.values[v] = self.d
            self.rounds[v] = t
        self.alive = self.alive - s_t
        logger.debug(f"Round {t}: deleted {len(s_t)} vertices, d={self.d:.3f}")
        return s_t, not self.alive

    def output(self) -> EstimateVector:
        return EstimateVector(values=tuple(self.values), round_assigned=tuple(self.rounds))


def run_exact_core(g: Graph, cfg: RunConfig) -> Tuple[EstimateVector, Transcript]:
    """
    Run the exact protocol on g.

    Parameters:
        g (Graph): private input
        cfg (RunConfig): epsilon, counter kind, memory mode, seed and noise mode

    Returns:
        tuple: (EstimateVector, Transcript); at most n rounds
    """
    validate_run_config(cfg)
    n = len(vertices(g))
    T = max(1, n)
    if cfg.max_rounds is None:
        cfg = cfg._replace(max_rounds=T)
    user = make_user(cfg, T)
    server = ExactServer(g)
    logger.info(f"Exact protocol on n={n}: epsilon={cfg.epsilon}, counter={cfg.counter}, memory={cfg.memory_mode}, noise={cfg.noise}")
    tr, est = run_protocol(g, cfg, server, user, counter_horizon=T)
    return est, tr


def clamped_rounded(est: EstimateVector) -> List[int]:
    """Display view max(0, round(k~)); accuracy checks use the raw values."""
    return [max(0, int(round(x))) for x in est.values]


def estimates_frame(g: Graph, est: EstimateVector) -> pd.DataFrame:
    """One row per vertex with the true coreness next to the estimate."""
    if len(est.values) != g.n:
        raise InvalidInputError(f"Estimate vector has {len(est.values)} entries for a graph on {g.n} vertices")
    core = exact_coreness(g)
    verts = vertices(g)
    columns = {
        'vertex': verts,
        'k_true': [core[v] for v in verts],
        'k_est': [est.values[v] for v in verts],
        'round': [est.round_assigned[v] for v in verts],
    }
    fields = list(ESTIMATE_CSV_FIELDS)
    if est.phase is not None:
        columns['phase'] = [est.phase[v] for v in verts]
        fields.append('phase')
    return pd.DataFrame(columns, columns=fields)


def max_error(g: Graph, est: EstimateVector) -> float:
    core = exact_coreness(g)
    return max((abs(est.values[v] - core[v]) for v in vertices(g)), default=0.0)


def upper_set_min_degrees(g: Graph, est: EstimateVector) -> Dict[float, int]:
    """
    For every distinct estimate k, the minimum induced degree of G[U] with
    U = {u : k~(u) >= k}.
    """
    verts = vertices(g)
    by_value = sorted({est.values[v] for v in verts}, reverse=True)
    members = set()
    result = {}
    order = sorted(verts, key=lambda v: -est.values[v])
    pos = 0
    for value in by_value:
        while pos < len(order) and est.values[order[pos]] >= value:
            members.add(order[pos])
            pos += 1
        result[value] = min_induced_degree(g, members)
    return result
