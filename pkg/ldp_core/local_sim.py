"""
Round-based engine for local-model protocols.

Each round every alive user sends one wire message, the server turns the wire
messages into noisy degrees, decides the deleted set S_t and the engine appends
the round to the transcript. Users never share state with each other; the
transcript is the only thing they can read besides their own neighborhood.

Memory modes:
    memoryful   a user keeps its counter between rounds and sends d~_t(v)
    memoryless  a user keeps only (v, N_v); from round 2 on it recomputes the
                single tree node of the current step from the transcript and
                sends that node; the server rebuilds d~_t(v) from the nodes
"""

import json
import logging
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Tuple

from .config import COUNTER_KINDS, DEFAULT_BETA, MEMORY_MODES, NOISE_MODES
from .counting import apply_released_node, tree_height
from .errors import (
    CorruptTranscriptError,
    InvalidInputError,
    ProtocolDivergenceError,
    ProtocolViolationError,
)
from .graph_core import Graph, vertices

logger = logging.getLogger(__name__)


class RunConfig(NamedTuple):
    epsilon: float
    memory_mode: str = 'memoryful'
    counter: str = 'binary_tree'
    eta: Optional[float] = None
    seed: int = 0
    max_rounds: Optional[int] = None
    noise: str = 'laplace'
    private: bool = False
    beta: float = DEFAULT_BETA
    phase_rounds: Optional[int] = None
    label_rule: str = 'threshold'


def validate_run_config(cfg: RunConfig, approx: bool = False) -> RunConfig:
    if not cfg.epsilon > 0:
        raise InvalidInputError(f"epsilon must be positive, got {cfg.epsilon}")
    if cfg.memory_mode not in MEMORY_MODES:
        raise InvalidInputError(f"Unknown memory mode {cfg.memory_mode!r}; choose from {', '.join(MEMORY_MODES)}")
    if cfg.counter not in COUNTER_KINDS:
        raise InvalidInputError(f"Unknown counter kind {cfg.counter!r}; choose from {', '.join(COUNTER_KINDS)}")
    if cfg.noise not in NOISE_MODES:
        raise InvalidInputError(f"Unknown noise mode {cfg.noise!r}; choose from {', '.join(NOISE_MODES)}")
    if cfg.private and cfg.noise == 'disabled':
        raise InvalidInputError("Noise cannot be disabled in a run flagged private")
    if cfg.private and cfg.counter == 'exact_debug':
        raise InvalidInputError("The exact_debug counter is refused in a run flagged private")
    if cfg.memory_mode == 'memoryless' and cfg.counter == 'sparse_vector':
        raise InvalidInputError("The sparse_vector counter keeps a secret threshold between rounds and has no memoryless form")
    if cfg.max_rounds is not None and cfg.max_rounds < 1:
        raise InvalidInputError(f"max_rounds must be >= 1, got {cfg.max_rounds}")
    if approx and not (cfg.eta is not None and cfg.eta > 0):
        raise InvalidInputError(f"eta must be positive for the approximate protocol, got {cfg.eta}")
    if cfg.phase_rounds is not None and cfg.phase_rounds < 1:
        raise InvalidInputError(f"phase_rounds must be >= 1, got {cfg.phase_rounds}")
    if cfg.label_rule not in ('threshold', 'previous'):
        raise InvalidInputError(f"Unknown label rule {cfg.label_rule!r}; choose threshold or previous")
    return cfg


class Wire(NamedTuple):
    """What a user puts on the wire: a noisy degree, or a tree node and its level."""
    value: float
    level: Optional[int] = None


class Round(NamedTuple):
    t: int
    msgs: Dict[int, float]
    S: FrozenSet[int]
    nodes: Dict[int, Tuple[int, float]]


class UserView(NamedTuple):
    inputs: List[int]
    outputs: List[float]


class Transcript:
    """
    Append-only record of a run. msgs are the noisy degrees the server acted
    on; nodes are the memoryless wire payloads (empty in memoryful runs).
    """

    def __init__(self, n: int):
        self.n = n
        self.rounds: List[Round] = []
        self._deleted = set()

    def __len__(self):
        return len(self.rounds)

    def deleted(self) -> FrozenSet[int]:
        return frozenset(self._deleted)

    def round(self, t: int) -> Round:
        return self.rounds[t - 1]

    def append(self, rnd: Round):
        if rnd.t != len(self.rounds) + 1:
            raise CorruptTranscriptError(f"Round {rnd.t} appended after {len(self.rounds)} rounds")
        senders = set(rnd.msgs)
        if senders & self._deleted:
            raise CorruptTranscriptError(f"Round {rnd.t}: deleted vertices {sorted(senders & self._deleted)} sent messages")
        if not rnd.S <= senders:
            raise CorruptTranscriptError(f"Round {rnd.t}: S contains vertices {sorted(rnd.S - senders)} that did not send")
        self.rounds.append(rnd)
        self._deleted |= rnd.S

    def public_view(self) -> List[Tuple[int, Dict[int, float], Tuple[int, ...]]]:
        """(t, msgs, sorted S) per round; equal across memory modes under coupled noise."""
        return [(r.t, dict(r.msgs), tuple(sorted(r.S))) for r in self.rounds]

    def to_jsonl(self) -> str:
        lines = []
        for r in self.rounds:
            record = {
                't': r.t,
                'msgs': {str(v): r.msgs[v] for v in sorted(r.msgs)},
                'S': sorted(r.S),
            }
            if r.nodes:
                record['nodes'] = {str(v): [r.nodes[v][0], r.nodes[v][1]] for v in sorted(r.nodes)}
            lines.append(json.dumps(record))
        return '\n'.join(lines) + ('\n' if lines else '')

    def write(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_jsonl())
        logger.info(f"Wrote transcript with {len(self.rounds)} rounds to {path}")

    @classmethod
    def from_jsonl(cls, lines: Iterable[str], n: int) -> 'Transcript':
        tr = cls(n)
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                rnd = Round(
                    t=int(record['t']),
                    msgs={int(v): float(x) for v, x in record['msgs'].items()},
                    S=frozenset(int(v) for v in record['S']),
                    nodes={int(v): (int(p[0]), float(p[1])) for v, p in record.get('nodes', {}).items()},
                )
            except (ValueError, KeyError, TypeError, IndexError) as e:
                raise CorruptTranscriptError(f"Transcript line {line_no}: {e}")
            tr.append(rnd)
        return tr


class NoisyDegreeDecoder:
    """
    Server-side translation of wire messages into noisy degrees. A round-1
    message is d~_1(v). Later memoryless messages carry the node released at
    counter step t - 1; the server keeps the public node levels per user and
    reports d~_t(v) = d~_1(v) - (sum of the nodes at the set bits of t - 1).
    """

    def __init__(self, counter_horizon: int):
        self.initial = {}
        self.levels = {}
        self.depth = tree_height(counter_horizon) + 1

    def decode(self, v: int, t: int, wire: Wire) -> float:
        if t == 1:
            if wire.level is not None:
                raise ProtocolViolationError(f"Vertex {v} sent a tree node in round 1")
            self.initial[v] = wire.value
            return wire.value
        if wire.level is None:
            return wire.value
        step = t - 1
        expected = (step & -step).bit_length() - 1
        if wire.level != expected:
            raise ProtocolViolationError(f"Vertex {v} sent level {wire.level} in round {t}, expected {expected}")
        levels = self.levels.get(v, (0.0,) * self.depth)
        levels, release = apply_released_node(levels, step, wire.value)
        self.levels[v] = levels
        return self.initial[v] - release


def run_protocol(g: Graph, cfg: RunConfig, server, user, counter_horizon: int) -> Tuple[Transcript, object]:
    """
    Drive user and server steps until the server ends the interaction.

    Parameters:
        g (Graph): private input, one neighborhood per user
        cfg (RunConfig): run parameters; cfg.max_rounds must be set
        server: object with step(t, msgs) -> (S_t, done) and output()
        user: object with message(v, neighbors, t, transcript) -> Wire
        counter_horizon (int): T of the per-user counters (sizes the decoder)

    Returns:
        tuple: (Transcript, server output)
    """
    if cfg.max_rounds is None or cfg.max_rounds < 1:
        raise InvalidInputError(f"run_protocol needs max_rounds >= 1, got {cfg.max_rounds}")
    transcript = Transcript(g.n)
    decoder = NoisyDegreeDecoder(counter_horizon)
    alive = set(vertices(g))
    t = 0
    while alive:
        t += 1
        if t > cfg.max_rounds:
            raise ProtocolDivergenceError(f"Protocol still running after max_rounds={cfg.max_rounds} with {len(alive)} users alive")
        msgs = {}
        nodes = {}
        # user steps are independent within a round; ordered by id for determinism
        for v in sorted(alive):
            wire = user.message(v, g.adjacency[v], t, transcript)
            if wire.level is not None:
                nodes[v] = (wire.level, wire.value)
            msgs[v] = decoder.decode(v, t, wire)
        s_t, done = server.step(t, msgs)
        s_t = frozenset(s_t)
        transcript.append(Round(t=t, msgs=msgs, S=s_t, nodes=nodes))
        alive -= s_t
        logger.debug(f"Round {t}: {len(s_t)} deleted, {len(alive)} alive")
        if done:
            break
    if alive:
        raise ProtocolViolationError(f"Server ended the interaction with {len(alive)} users never deleted")
    logger.info(f"Protocol finished after {t} rounds on n={g.n}")
    return transcript, server.output()


def user_inputs(tr: Transcript, neighbors: Iterable[int], upto: int) -> List[int]:
    """(|N_v|, |N_v & S_1|, ..., |N_v & S_{upto-2}|): what the user inserted before round `upto`."""
    nbrs = frozenset(neighbors)
    inputs = [len(nbrs)]
    inputs.extend(len(nbrs & tr.rounds[r - 1].S) for r in range(1, upto - 1))
    return inputs


def transcript_replay_user_view(tr: Transcript, v: int, neighbors: Iterable[int], upto: int) -> UserView:
    """
    What user v can rebuild before acting in round `upto`: its inputs
    (|N_v|, |N_v & S_1|, ..., |N_v & S_{upto-2}|) and the node values it
    released in rounds 2..upto-1. The counter stream is inputs[1:].
    """
    if upto < 1 or upto > len(tr.rounds) + 1:
        raise InvalidInputError(f"Round {upto} is outside the transcript (1..{len(tr.rounds) + 1})")
    for r in tr.rounds[:upto - 1]:
        if v in r.S:
            raise InvalidInputError(f"Vertex {v} was deleted in round {r.t} and is not alive at round {upto}")
    inputs = user_inputs(tr, neighbors, upto)
    outputs = []
    for r in range(2, upto):
        rnd = tr.rounds[r - 1]
        if v not in rnd.nodes:
            raise CorruptTranscriptError(f"Round {r} carries no node message from vertex {v} (memoryful transcript?)")
        outputs.append(rnd.nodes[v][1])
    return UserView(inputs=inputs, outputs=outputs)


def true_degree_at(g: Graph, tr: Transcript, v: int, t: int) -> int:
    """|N_v| minus the neighbors deleted before round t."""
    gone = set()
    for r in tr.rounds[:t - 1]:
        gone |= r.S
    return sum(1 for w in g.adjacency[v] if w not in gone)
