"""
(2+eta)-approximate coreness estimation in the local model.

Rounds are grouped into Phi phases of R rounds. During phase phi the server
deletes every alive vertex whose noisy degree is at most (2+eta)**phi and labels
it with the phase's estimate. Users are the same as in the exact protocol, with
counters sized to the total number of rounds T = Phi * R.
"""

import logging
import math
from typing import Dict, NamedTuple, Optional, Tuple

from .core_exact import EstimateVector, check_messages, make_user
from .errors import InvalidInputError
from .graph_core import Graph, vertices
from .local_sim import RunConfig, Transcript, run_protocol, validate_run_config

logger = logging.getLogger(__name__)

LABEL_RULES = ('threshold', 'previous')


class PhaseSchedule(NamedTuple):
    eta: float
    Phi: int
    R: int
    thresholds: Tuple[float, ...]
    labels: Tuple[float, ...]

    @property
    def total_rounds(self) -> int:
        return self.Phi * self.R

    @property
    def final_label(self) -> float:
        return self.labels[-1]

    def phase_of(self, t: int) -> int:
        """1-based phase of round t."""
        return (t - 1) // self.R + 1


def _ceil_log(x: float, base: float) -> int:
    value = math.log(x) / math.log(base)
    nearest = round(value)
    # exact powers must not round up through float error
    if abs(value - nearest) < 1e-9:
        return int(nearest)
    return math.ceil(value)


def build_schedule(n: int, eta: float, phase_rounds: Optional[int] = None, label_rule: str = 'threshold') -> PhaseSchedule:
    """
    Phase schedule for n vertices.

    Parameters:
        n (int): vertex count, at least 2
        eta (float): approximation slack, positive
        phase_rounds (int | None): rounds per phase; defaults to ceil(log_{1+eta} n)
        label_rule (str): 'threshold' labels phase phi with (2+eta)**phi,
            'previous' with (2+eta)**(phi-1)

    Returns:
        PhaseSchedule
    """
    if n < 2:
        raise InvalidInputError(f"build_schedule needs n >= 2, got {n}")
    if not eta > 0:
        raise InvalidInputError(f"eta must be positive, got {eta}")
    if label_rule not in LABEL_RULES:
        raise InvalidInputError(f"Unknown label rule {label_rule!r}; choose from {', '.join(LABEL_RULES)}")
    if phase_rounds is not None and phase_rounds < 1:
        raise InvalidInputError(f"phase_rounds must be >= 1, got {phase_rounds}")
    base = 2.0 + eta
    phi_count = _ceil_log(n, base) + 1
    rounds = phase_rounds if phase_rounds is not None else max(1, _ceil_log(n, 1.0 + eta))
    thresholds = tuple(base ** phi for phi in range(1, phi_count + 1))
    if label_rule == 'threshold':
        labels = thresholds
    else:
        labels = tuple(base ** (phi - 1) for phi in range(1, phi_count + 1))
    return PhaseSchedule(eta=eta, Phi=phi_count, R=rounds, thresholds=thresholds, labels=labels)


class ApproxServer:
    def __init__(self, g: Graph, schedule: PhaseSchedule):
        self.schedule = schedule
        self.alive = frozenset(vertices(g))
        self.values = [0.0] * g.n
        self.rounds = [0] * g.n
        self.phases = [0] * g.n

    def step(self, t: int, msgs: Dict[int, float]):
        check_messages(self.alive, msgs)
        phase = self.schedule.phase_of(t)
        threshold = self.schedule.thresholds[phase - 1]
        s_t = {v for v in self.alive if msgs[v] <= threshold}
        last_round = t >= self.schedule.total_rounds
        for v in s_t:
            self.values[v] = self.schedule.labels[phase - 1]
            self.rounds[v] = t
            self.phases[v] = phase
        if last_round:
            leftovers = self.alive - s_t
            if leftovers:
                logger.warning(f"{len(leftovers)} vertices survived all {self.schedule.Phi} phases; assigning the final label")
            for v in leftovers:
                self.values[v] = self.schedule.final_label
                self.rounds[v] = t
                self.phases[v] = self.schedule.Phi
            s_t |= leftovers
        self.alive = self.alive - s_t
        if t % self.schedule.R == 0:
            logger.debug(f"Phase {phase} done at round {t}: threshold={threshold:.3f}, {len(self.alive)} alive")
        return frozenset(s_t), last_round or not self.alive

    def output(self) -> EstimateVector:
        return EstimateVector(values=tuple(self.values), round_assigned=tuple(self.rounds), phase=tuple(self.phases))


def run_approx_core(g: Graph, cfg: RunConfig) -> Tuple[EstimateVector, Transcript]:
    """
    Run the approximate protocol on g; finishes within Phi * R rounds.
    """
    validate_run_config(cfg, approx=True)
    n = len(vertices(g))
    schedule = build_schedule(max(2, n), cfg.eta, cfg.phase_rounds, cfg.label_rule)
    T = schedule.total_rounds
    if cfg.max_rounds is None:
        cfg = cfg._replace(max_rounds=T)
    user = make_user(cfg, T)
    server = ApproxServer(g, schedule)
    logger.info(f"Approximate protocol on n={n}: eta={cfg.eta}, Phi={schedule.Phi}, R={schedule.R}, counter={cfg.counter}, memory={cfg.memory_mode}")
    tr, est = run_protocol(g, cfg, server, user, counter_horizon=T)
    return est, tr
