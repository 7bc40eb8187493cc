"""
Adaptive continual counting mechanisms.

Three counters share the interface ``insert(x) -> noisy prefix sum``:

- BinaryTreeCounter: the binary tree mechanism. Each step t materializes one
  dyadic node at level i = lowest set bit of t, holding the sum of the last 2**i
  inputs plus Laplace noise; the release is the sum of the noisy nodes at the
  set bits of t. The tree state is a pure function of (inputs, released nodes),
  which is what makes the memoryless variant possible (bt_state_from_history).
- SparseVectorCounter: above-threshold segmentation plus doubling binary trees
  over segment sums, so the error tracks the true count n_t instead of T.
- ExactDebugCounter: true prefix sums, for oracle-equivalence runs only.

Node noise is calibrated to the number of levels an input can touch: a stream
of horizon T has h = ceil(log2 T) and levels 0..h, so one changed element moves
at most h + 1 node values by 1 and each node gets Lap((h + 1) / epsilon).
"""

import logging
import math
from typing import Dict, List, NamedTuple, Sequence, Tuple

from .config import COUNTER_KINDS, DEFAULT_BETA, SPARSE_THRESHOLD_FACTOR
from .dp_noise import NoiseSource, derive, noise_label, sample_laplace, tail_radius
from .errors import CorruptTranscriptError, InvalidInputError, StreamOverflowError

logger = logging.getLogger(__name__)


class CounterConfig(NamedTuple):
    T: int
    epsilon: float
    kind: str = 'binary_tree'
    beta: float = DEFAULT_BETA


def validate_counter_config(cfg: CounterConfig) -> CounterConfig:
    if cfg.T < 1:
        raise InvalidInputError(f"Counter horizon T must be >= 1, got {cfg.T}")
    if not cfg.epsilon > 0:
        raise InvalidInputError(f"Counter epsilon must be positive, got {cfg.epsilon}")
    if cfg.kind not in COUNTER_KINDS:
        raise InvalidInputError(f"Unknown counter kind {cfg.kind!r}; choose from {', '.join(COUNTER_KINDS)}")
    if not 0 < cfg.beta < 1:
        raise InvalidInputError(f"Counter beta must lie in (0, 1), got {cfg.beta}")
    return cfg


class BinaryTreeState(NamedTuple):
    T: int
    h: int
    t: int
    alpha: Tuple[int, ...]
    alpha_hat: Tuple[float, ...]


def tree_height(T: int) -> int:
    """ceil(log2 T); 0 for T = 1."""
    return (T - 1).bit_length()


def node_scale(T: int, epsilon: float) -> float:
    return (tree_height(T) + 1) / epsilon


def lowest_set_bit(t: int) -> int:
    return (t & -t).bit_length() - 1


def bin_levels(t: int) -> List[int]:
    """Positions of the 1-bits of t, ascending."""
    return [j for j in range(t.bit_length()) if t >> j & 1]


def sum_bin(alpha_hat: Sequence[float], t: int) -> float:
    """Release at step t: noisy nodes at the set bits of t, added in ascending level order."""
    total = 0.0
    for j in bin_levels(t):
        total += alpha_hat[j]
    return total


def apply_released_node(alpha_hat: Sequence[float], t: int, node_value: float) -> Tuple[Tuple[float, ...], float]:
    """
    Public half of a tree step: store the node released at step t on its level,
    clear the levels below it and return (levels, release). The server uses this
    to rebuild sums from memoryless node messages.
    """
    i = lowest_set_bit(t)
    levels = list(alpha_hat)
    levels[i] = node_value
    for j in range(i):
        levels[j] = 0.0
    levels = tuple(levels)
    return levels, sum_bin(levels, t)


def node_label(prefix: str, level: int, t: int) -> str:
    # epoch t >> level indexes the dyadic block ending at t on that level
    return noise_label(prefix, 'level', level, 'epoch', t >> level)


def bt_fresh_state(T: int) -> BinaryTreeState:
    h = tree_height(T)
    return BinaryTreeState(T=T, h=h, t=0, alpha=(0,) * (h + 1), alpha_hat=(0.0,) * (h + 1))


def bt_insert(state: BinaryTreeState, x: int, noise: NoiseSource, prefix: str) -> Tuple[BinaryTreeState, float]:
    """
    One binary-tree step.

    Parameters:
        state (BinaryTreeState): state after t - 1 inputs
        x (int): nonnegative stream element
        noise (NoiseSource): source already scaled to the per-node Laplace scale
        prefix (str): label prefix of this counter; node labels append (level, epoch)

    Returns:
        tuple: (new_state, release); the node released this step is
        new_state.alpha_hat[lowest_set_bit(new_state.t)]
    """
    if state.t >= state.T:
        raise StreamOverflowError(f"Counter {prefix!r} received insert {state.t + 1} beyond horizon T={state.T}")
    if x < 0:
        raise InvalidInputError(f"Stream elements must be nonnegative, got {x}")
    t = state.t + 1
    i = lowest_set_bit(t)
    alpha = list(state.alpha)
    # levels below i hold exactly the previous 2**i - 1 inputs
    alpha[i] = int(x) + sum(alpha[:i])
    for j in range(i):
        alpha[j] = 0
    node_value = alpha[i] + sample_laplace(noise, node_label(prefix, i, t))
    alpha_hat, release = apply_released_node(state.alpha_hat, t, node_value)
    return BinaryTreeState(T=state.T, h=state.h, t=t, alpha=tuple(alpha), alpha_hat=alpha_hat), release


def bt_state_from_history(inputs: Sequence[int], node_outputs: Sequence[float], cfg: CounterConfig) -> BinaryTreeState:
    """
    Rebuild the tree state from the inputs inserted so far and the node value
    released at each of those steps; no noise is drawn.
    """
    if len(inputs) != len(node_outputs):
        raise CorruptTranscriptError(f"History has {len(inputs)} inputs but {len(node_outputs)} node outputs")
    if len(inputs) > cfg.T:
        raise CorruptTranscriptError(f"History of length {len(inputs)} exceeds horizon T={cfg.T}")
    state = bt_fresh_state(cfg.T)
    alpha = list(state.alpha)
    alpha_hat = state.alpha_hat
    for t, (x, node_value) in enumerate(zip(inputs, node_outputs), start=1):
        i = lowest_set_bit(t)
        alpha[i] = int(x) + sum(alpha[:i])
        for j in range(i):
            alpha[j] = 0
        alpha_hat, _ = apply_released_node(alpha_hat, t, float(node_value))
    return state._replace(t=len(inputs), alpha=tuple(alpha), alpha_hat=alpha_hat)


def tree_node_values(stream: Sequence[int], T: int) -> Dict[Tuple[int, int], int]:
    """
    True value of every node materialized while consuming `stream`, keyed by
    (level, epoch). Input of the sensitivity audit.
    """
    if len(stream) > T:
        raise StreamOverflowError(f"Stream of length {len(stream)} exceeds horizon T={T}")
    prefix = [0]
    for x in stream:
        prefix.append(prefix[-1] + int(x))
    values = {}
    for t in range(1, len(stream) + 1):
        i = lowest_set_bit(t)
        values[(i, t >> i)] = prefix[t] - prefix[t - (1 << i)]
    return values


def bt_error_bound(t: int, beta: float, epsilon: float, horizon: int = None) -> float:
    """
    Error bound of a binary-tree release at step t holding with probability
    >= 1 - beta: at most m = 1 + ceil(log2 t) nodes are summed, each Lap(b) with
    b the per-node scale of the horizon (t itself when not given), and a union
    bound gives m * b * ln(m / beta).
    """
    if t < 1:
        raise InvalidInputError(f"t must be >= 1, got {t}")
    if not 0 < beta < 1:
        raise InvalidInputError(f"beta must lie in (0, 1), got {beta}")
    if not epsilon > 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    horizon = t if horizon is None else horizon
    m = 1 + tree_height(t)
    return m * tail_radius(node_scale(horizon, epsilon), beta / m)


def sparse_threshold(T: int, epsilon_svt: float, beta: float) -> float:
    return SPARSE_THRESHOLD_FACTOR / epsilon_svt * math.log(2 * T / beta)


def sv_error_bound(T: int, n_t: int, beta: float, epsilon: float) -> float:
    """
    Calibrated bound for the sparse-vector counter: the unreported count since
    the last checkpoint stays below the trigger threshold plus the two
    above-threshold noise tails, and the checkpoint sums carry binary-tree error
    over at most min(n_t, T) segments at budget epsilon / 2.
    """
    epsilon_svt = epsilon / 2
    pending = sparse_threshold(T, epsilon_svt, beta) + tail_radius(4 / epsilon_svt, beta / (2 * T)) \
        + tail_radius(2 / epsilon_svt, beta / (2 * T))
    segments = max(1, min(n_t, T))
    # one tree per doubling block of segments
    trees = tree_height(segments) + 1
    return pending + trees * bt_error_bound(segments, beta / 2, epsilon / 2)


class BinaryTreeCounter:
    kind = 'binary_tree'

    def __init__(self, cfg: CounterConfig, noise: NoiseSource, prefix: str):
        self.cfg = validate_counter_config(cfg)
        self.prefix = prefix
        self.noise = derive(noise, node_scale(cfg.T, cfg.epsilon))
        self.state = bt_fresh_state(cfg.T)
        self.total_true = 0

    @property
    def t(self) -> int:
        return self.state.t

    @property
    def released_node(self) -> Tuple[int, float]:
        """(level, value) of the node released by the last insert."""
        i = lowest_set_bit(self.state.t)
        return i, self.state.alpha_hat[i]

    def insert(self, x: int) -> float:
        self.state, release = bt_insert(self.state, x, self.noise, self.prefix)
        self.total_true += int(x)
        return release


class ExactDebugCounter:
    kind = 'exact_debug'

    def __init__(self, cfg: CounterConfig, noise: NoiseSource = None, prefix: str = ''):
        self.cfg = validate_counter_config(cfg)
        self.prefix = prefix
        self.t = 0
        self.total_true = 0

    def insert(self, x: int) -> float:
        if self.t >= self.cfg.T:
            raise StreamOverflowError(f"Counter {self.prefix!r} received insert {self.t + 1} beyond horizon T={self.cfg.T}")
        self.t += 1
        self.total_true += int(x)
        return float(self.total_true)


class SparseVectorCounter:
    """
    Budget split: epsilon/2 for above-threshold segmentation, epsilon/2 for the
    trees over segment sums. A segment closes when its noisy running count
    crosses the noisy threshold; its true sum becomes the next element of the
    segment stream. Segment k goes to tree q = floor(log2 k), whose horizon is
    2**q, so tree depth follows the number of segments and not T.

    The noisy threshold is private state between inserts; this counter has no
    memoryless form.
    """

    kind = 'sparse_vector'

    def __init__(self, cfg: CounterConfig, noise: NoiseSource, prefix: str):
        self.cfg = validate_counter_config(cfg)
        self.prefix = prefix
        self.epsilon_svt = cfg.epsilon / 2
        self.epsilon_tree = cfg.epsilon / 2
        # the threshold only absorbs noise; without noise every step is a checkpoint
        if noise.mode == 'disabled':
            self.threshold = 0.0
        else:
            self.threshold = sparse_threshold(cfg.T, self.epsilon_svt, cfg.beta)
        self._threshold_noise = derive(noise, 2 / self.epsilon_svt)
        self._query_noise = derive(noise, 4 / self.epsilon_svt)
        self._master = noise
        self.t = 0
        self.total_true = 0
        self.pending = 0
        self.segments = 0
        self._noisy_threshold = self._draw_threshold()
        self._tree_index = None
        self._tree_state = None
        self._tree_noise = None
        self._frozen_total = 0.0
        self._tree_release = 0.0

    def _draw_threshold(self) -> float:
        label = noise_label(self.prefix, 'svt', 'threshold', self.segments)
        return self.threshold + sample_laplace(self._threshold_noise, label)

    def _close_segment(self):
        self.segments += 1
        k = self.segments
        q = k.bit_length() - 1
        if q != self._tree_index:
            self._frozen_total += self._tree_release
            self._tree_index = q
            self._tree_state = bt_fresh_state(1 << q)
            self._tree_noise = derive(self._master, node_scale(1 << q, self.epsilon_tree))
            self._tree_release = 0.0
        tree_prefix = noise_label(self.prefix, 'tree', q)
        self._tree_state, self._tree_release = bt_insert(self._tree_state, self.pending, self._tree_noise, tree_prefix)
        logger.debug(f"Counter {self.prefix}: segment {k} closed at t={self.t} with sum {self.pending}")
        self.pending = 0
        self._noisy_threshold = self._draw_threshold()

    def insert(self, x: int) -> float:
        if self.t >= self.cfg.T:
            raise StreamOverflowError(f"Counter {self.prefix!r} received insert {self.t + 1} beyond horizon T={self.cfg.T}")
        if x < 0:
            raise InvalidInputError(f"Stream elements must be nonnegative, got {x}")
        self.t += 1
        self.total_true += int(x)
        self.pending += int(x)
        noisy_pending = self.pending + sample_laplace(self._query_noise, noise_label(self.prefix, 'svt', 'query', self.t))
        if noisy_pending >= self._noisy_threshold:
            self._close_segment()
        return self._frozen_total + self._tree_release


def make_counter(cfg: CounterConfig, noise: NoiseSource, prefix: str):
    """Factory by cfg.kind."""
    if cfg.kind == 'binary_tree':
        return BinaryTreeCounter(cfg, noise, prefix)
    if cfg.kind == 'sparse_vector':
        return SparseVectorCounter(cfg, noise, prefix)
    if cfg.kind == 'exact_debug':
        return ExactDebugCounter(cfg, noise, prefix)
    raise InvalidInputError(f"Unknown counter kind {cfg.kind!r}; choose from {', '.join(COUNTER_KINDS)}")


def sv_insert(counter: SparseVectorCounter, x: int) -> Tuple[SparseVectorCounter, float]:
    """Functional-style wrapper mirroring bt_insert for the sparse-vector counter."""
    release = counter.insert(x)
    return counter, release
