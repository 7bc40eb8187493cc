"""
Densest subgraph by post-processing coreness estimates: return the vertices
whose estimate equals the maximum estimate. The achieved density is measured
on the true graph and is an evaluation-only number.
"""

import logging
from fractions import Fraction
from typing import FrozenSet, NamedTuple

from .config import BRUTE_FORCE_MAX_N
from .core_approx import run_approx_core
from .core_exact import EstimateVector, run_exact_core, upper_set_min_degrees
from .errors import InvalidInputError
from .graph_core import Graph, brute_force_densest, density, exact_coreness, induced_subgraph, vertices
from .local_sim import RunConfig

logger = logging.getLogger(__name__)

DENSEST_MODES = ('exact', 'approx')


class DensestResult(NamedTuple):
    subset: FrozenSet[int]
    achieved_density: Fraction
    k_tilde_star: float


class DensestBoundCheck(NamedTuple):
    sandwich_holds: bool
    witness_holds: bool
    density: Fraction
    bound: float

    @property
    def hypotheses_hold(self) -> bool:
        return self.sandwich_holds and self.witness_holds

    @property
    def bound_holds(self) -> bool:
        return float(self.density) >= self.bound


def densest_from_estimates(g: Graph, est: EstimateVector) -> DensestResult:
    verts = vertices(g)
    if not verts or not est.values:
        raise InvalidInputError("densest_from_estimates needs a nonempty estimate vector")
    if len(est.values) != g.n:
        raise InvalidInputError(f"Estimate vector has {len(est.values)} entries for a graph on {g.n} vertices")
    k_tilde_star = max(est.values[v] for v in verts)
    subset = frozenset(v for v in verts if est.values[v] == k_tilde_star)
    return DensestResult(
        subset=subset,
        achieved_density=density(induced_subgraph(g, subset)),
        k_tilde_star=k_tilde_star,
    )


def run_densest(g: Graph, cfg: RunConfig, mode: str = 'exact') -> DensestResult:
    """Run the exact or approximate coreness protocol, then take the argmax set."""
    if mode == 'exact':
        est, tr = run_exact_core(g, cfg)
    elif mode == 'approx':
        est, tr = run_approx_core(g, cfg)
    else:
        raise InvalidInputError(f"Unknown densest mode {mode!r}; choose from {', '.join(DENSEST_MODES)}")
    result = densest_from_estimates(g, est)
    logger.info(f"Densest ({mode}): {len(result.subset)} vertices, density={result.achieved_density}, rounds={len(tr)}")
    return result


def densest_bound_check(g: Graph, est: EstimateVector, alpha_obs: float, gamma: float) -> DensestBoundCheck:
    """
    Check the two hypotheses that turn a gamma-approximate, alpha-accurate
    core decomposition into a densest-subgraph guarantee, and evaluate the
    guaranteed density k~* / (2 gamma) - (1 + 1/gamma) * alpha / 2:

    - every v has k(v) - alpha <= k~(v) <= gamma * k(v) + alpha
    - every G[{u : k~(u) >= k~(v)}] has min induced degree >= k~(v) / gamma - alpha
    """
    if gamma < 1:
        raise InvalidInputError(f"gamma must be >= 1, got {gamma}")
    verts = vertices(g)
    core = exact_coreness(g)
    sandwich = all(
        core[v] - alpha_obs <= est.values[v] <= gamma * core[v] + alpha_obs
        for v in verts
    )
    witness = all(
        low >= value / gamma - alpha_obs
        for value, low in upper_set_min_degrees(g, est).items()
    )
    result = densest_from_estimates(g, est)
    bound = result.k_tilde_star / (2 * gamma) - (1 + 1 / gamma) * alpha_obs / 2
    return DensestBoundCheck(sandwich_holds=sandwich, witness_holds=witness, density=result.achieved_density, bound=bound)


def densest_report(g: Graph, result: DensestResult) -> dict:
    """JSON-ready summary; rho_star only when the brute-force oracle can run."""
    report = {
        'subset': sorted(result.subset),
        'density': float(result.achieved_density),
        'density_exact': str(result.achieved_density),
        'k_tilde_star': result.k_tilde_star,
    }
    if len(vertices(g)) <= BRUTE_FORCE_MAX_N:
        witness, rho_star = brute_force_densest(g)
        report['rho_star'] = float(rho_star)
        report['rho_star_exact'] = str(rho_star)
        report['rho_star_witness'] = sorted(witness)
    return report
