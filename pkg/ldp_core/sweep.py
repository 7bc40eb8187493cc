"""
Experiment sweeps: run the protocols over a grid of sizes, budgets and trials
and collect one CSV row per (n, epsilon, trial, protocol).
"""

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import openpyxl
import pandas as pd
from openpyxl.styles import Alignment, Font, PatternFill
from scipy import stats

from .audit import measure_alpha_obs
from .config import SWEEP_CSV_FIELDS, get_thread_cap
from .core_approx import run_approx_core
from .core_exact import max_error, run_exact_core
from .errors import InvalidInputError
from .generators import FAMILIES, generate
from .local_sim import RunConfig, validate_run_config

logger = logging.getLogger(__name__)

PROTOCOLS = ('exact', 'approx')


class ExperimentSpec(NamedTuple):
    sizes: Tuple[int, ...]
    family: str = 'gnp'
    epsilons: Tuple[float, ...] = (1.0,)
    eta: float = 1.0
    counter: str = 'binary_tree'
    memory: str = 'memoryful'
    trials: int = 1
    seed: int = 0
    out: str = 'sweep.csv'
    protocols: Tuple[str, ...] = ('exact',)
    noise: str = 'laplace'
    # gnp: p = avg_degree / (n - 1) unless p is given
    p: Optional[float] = None
    avg_degree: float = 8.0
    d: int = 8
    phase_rounds: Optional[int] = None
    # ms is wall time; without timing it is written as 0 so reruns are byte-identical
    timing: bool = True


def validate_experiment(spec: ExperimentSpec) -> ExperimentSpec:
    if spec.trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {spec.trials}")
    if not spec.sizes:
        raise InvalidInputError("A sweep needs at least one size")
    if spec.family not in FAMILIES:
        raise InvalidInputError(f"Unknown graph family {spec.family!r}; choose from {', '.join(FAMILIES)}")
    unknown = [p for p in spec.protocols if p not in PROTOCOLS]
    if unknown or not spec.protocols:
        raise InvalidInputError(f"Unknown protocols {unknown}; choose from {', '.join(PROTOCOLS)}")
    for eps in spec.epsilons:
        validate_run_config(_run_config(spec, eps, 0), approx='approx' in spec.protocols)
    return spec


def _run_config(spec: ExperimentSpec, eps: float, seed: int) -> RunConfig:
    return RunConfig(
        epsilon=eps,
        memory_mode=spec.memory,
        counter=spec.counter,
        eta=spec.eta,
        seed=seed,
        noise=spec.noise,
        phase_rounds=spec.phase_rounds,
    )


def trial_seeds(seed: int, n: int, trial: int) -> Tuple[int, int]:
    """(graph seed, noise seed) for one cell of the grid."""
    state = np.random.SeedSequence([seed, n, trial]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _edge_probability(spec: ExperimentSpec, n: int) -> float:
    if spec.p is not None:
        return spec.p
    return min(1.0, spec.avg_degree / max(1, n - 1))


def run_trial(spec: ExperimentSpec, n: int, eps: float, trial: int) -> List[dict]:
    """All protocol rows of one (n, epsilon, trial) cell; the graph is shared across protocols."""
    graph_seed, noise_seed = trial_seeds(spec.seed, n, trial)
    g = generate(spec.family, n, graph_seed, p=_edge_probability(spec, n), d=spec.d)
    cfg = _run_config(spec, eps, noise_seed)
    rows = []
    for protocol in spec.protocols:
        start = time.perf_counter()
        if protocol == 'exact':
            est, tr = run_exact_core(g, cfg)
        else:
            est, tr = run_approx_core(g, cfg)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        rows.append({
            'family': spec.family,
            'n': g.n,
            'eps': eps,
            'eta': spec.eta if protocol == 'approx' else '',
            'counter': spec.counter,
            'memory': spec.memory,
            'trial': trial,
            'protocol': protocol,
            'max_err': max_error(g, est),
            'rounds': len(tr),
            'alpha_obs': measure_alpha_obs(tr, g),
            'ms': round(elapsed_ms, 3) if spec.timing else 0,
        })
    return rows


def _run_cell(args):
    return run_trial(*args)


def run_sweep(spec: ExperimentSpec) -> pd.DataFrame:
    """Run the whole grid and return the rows in grid order."""
    validate_experiment(spec)
    cells = [(spec, n, eps, trial) for n in spec.sizes for eps in spec.epsilons for trial in range(spec.trials)]
    workers = min(get_thread_cap(), len(cells))
    logger.info(f"Sweep over {len(cells)} cells ({spec.family}, sizes={list(spec.sizes)}) with {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = []
        for i, cell in enumerate(cells, start=1):
            results.append(_run_cell(cell))
            if i % 10 == 0 or i == len(cells):
                logger.info(f"Sweep progress: {i}/{len(cells)} cells")
    rows = [row for cell_rows in results for row in cell_rows]
    return pd.DataFrame(rows, columns=SWEEP_CSV_FIELDS)


def cmd_sweep(spec: ExperimentSpec, xlsx: Optional[str] = None) -> pd.DataFrame:
    """
    Run the sweep and write the CSV (and optionally a formatted workbook).

    Returns:
        pd.DataFrame: the rows written
    """
    df = run_sweep(spec)
    out = Path(spec.out)
    try:
        if out.parent and not out.parent.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(out, index=False)
    except OSError as e:
        raise OSError(f"Cannot write sweep CSV {out}: {e}") from e
    logger.info(f"Wrote {len(df)} sweep rows to {out}")
    if xlsx:
        export_to_excel(df, Path(xlsx))
        logger.info(f"Wrote sweep workbook to {xlsx}")
    return df


def median_frame(df: pd.DataFrame) -> pd.DataFrame:
    """Medians of max_err, alpha_obs and rounds per (protocol, counter, eps, n)."""
    keys = ['protocol', 'counter', 'eps', 'n']
    return df.groupby(keys, as_index=False)[['max_err', 'alpha_obs', 'rounds']].median()


def export_to_excel(df: pd.DataFrame, output_path: Path):
    """Two sheets: the raw rows and the per-n medians; rows whose max_err exceeds alpha_obs are highlighted."""
    wb = openpyxl.Workbook()

    flagged_fill = PatternFill(start_color="F4CCCC", end_color="F4CCCC", fill_type="solid")
    header_fill = PatternFill(start_color="4472C4", end_color="4472C4", fill_type="solid")
    header_font = Font(bold=True, color="FFFFFF")

    def write_sheet(ws, frame, sheet_name, flag_column=None):
        ws.title = sheet_name
        columns = list(frame.columns)

        for col_idx, col_name in enumerate(columns, start=1):
            cell = ws.cell(row=1, column=col_idx, value=col_name)
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = Alignment(horizontal="center")

        for row_idx, row in enumerate(frame.itertuples(index=False), start=2):
            flagged = flag_column is not None and flag_column(row)
            for col_idx, value in enumerate(row, start=1):
                if isinstance(value, (np.integer, np.floating)):
                    value = value.item()
                cell = ws.cell(row=row_idx, column=col_idx, value=value)
                if flagged:
                    cell.fill = flagged_fill

        for col_idx in range(1, len(columns) + 1):
            ws.column_dimensions[openpyxl.utils.get_column_letter(col_idx)].width = 12

    def exceeds_alpha(row):
        # the exact protocol never errs by more than alpha_obs
        return row.protocol == 'exact' and row.max_err > row.alpha_obs

    write_sheet(wb.active, df, "rows", exceeds_alpha)
    write_sheet(wb.create_sheet(title="medians"), median_frame(df), "medians")

    try:
        wb.save(str(output_path))
    except OSError as e:
        raise OSError(f"Cannot write workbook {output_path}: {e}") from e


class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    medians: pd.DataFrame


def fit_log2_scaling(df: pd.DataFrame, protocol: str = 'exact', counter: Optional[str] = None) -> ScalingFit:
    """
    Least-squares fit of median max_err against (ln n)^2 over the sizes in df.
    """
    rows = df[df['protocol'] == protocol]
    if counter is not None:
        rows = rows[rows['counter'] == counter]
    medians = rows.groupby('n', as_index=False)['max_err'].median().sort_values('n')
    if len(medians) < 2:
        raise InvalidInputError(f"Scaling fit needs at least two sizes, got {len(medians)}")
    x = np.log(medians['n'].to_numpy(dtype=float)) ** 2
    y = medians['max_err'].to_numpy(dtype=float)
    result = stats.linregress(x, y)
    r_squared = float(result.rvalue ** 2) if not math.isnan(result.rvalue) else 0.0
    return ScalingFit(slope=float(result.slope), intercept=float(result.intercept), r_squared=r_squared, medians=medians)


class CounterComparison(NamedTuple):
    n: int
    metric: str
    binary_tree: float
    sparse_vector: float

    @property
    def sparse_vector_wins(self) -> bool:
        return self.sparse_vector < self.binary_tree


def compare_counters(df: pd.DataFrame, metric: str = 'max_err', n: Optional[int] = None,
                     protocol: str = 'exact') -> CounterComparison:
    """
    Median `metric` of the binary-tree and sparse-vector rows at size n
    (default: the largest size both counters share).
    """
    if metric not in ('max_err', 'alpha_obs'):
        raise InvalidInputError(f"Counters are compared on max_err or alpha_obs, got {metric!r}")
    rows = df[df['protocol'] == protocol]
    table = rows.groupby(['n', 'counter'])[metric].median().unstack('counter')
    missing = [c for c in ('binary_tree', 'sparse_vector') if c not in table.columns]
    if missing:
        raise InvalidInputError(f"Comparison needs binary_tree and sparse_vector rows; missing {missing}")
    shared = table.dropna(subset=['binary_tree', 'sparse_vector'])
    if n is None:
        if shared.empty:
            raise InvalidInputError("The two counters share no size")
        n = int(shared.index.max())
    elif n not in shared.index:
        raise InvalidInputError(f"Size {n} is missing for one of the counters")
    return CounterComparison(
        n=int(n),
        metric=metric,
        binary_tree=float(shared.loc[n, 'binary_tree']),
        sparse_vector=float(shared.loc[n, 'sparse_vector']),
    )


def sweep_from_csv(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Sweep CSV not found: {path}")
    return pd.read_csv(path)
