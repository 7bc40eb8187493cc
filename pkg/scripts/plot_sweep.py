#!/usr/bin/env python3
"""
Plot a sweep CSV: max_err and alpha_obs per trial against n, with per-n
medians and the ln(n)^2 fit overlaid. Not part of the CSV contract.
"""

import argparse
import logging
import os
import sys
from typing import Dict, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ldp_core.config import setup_global_logging
from ldp_core.sweep import ScalingFit, fit_log2_scaling, sweep_from_csv

logger = logging.getLogger(__name__)


def series_fits(df: pd.DataFrame) -> Dict[Tuple[str, str], ScalingFit]:
    """ln(n)^2 fit per (protocol, counter) series with at least two sizes."""
    fits = {}
    for (protocol, counter), rows in df.groupby(['protocol', 'counter'], sort=True):
        if rows['n'].nunique() < 2:
            continue
        fits[(protocol, counter)] = fit_log2_scaling(rows, protocol=protocol, counter=counter)
    return fits


def plot_sweep(csv_path: str, output_path: str):
    df = sweep_from_csv(csv_path)
    sns.set_theme(style='whitegrid')

    plt.figure(figsize=(12, 5))

    # 1. error per trial, one colour per protocol/counter
    plt.subplot(1, 2, 1)
    df['series'] = df['protocol'] + '/' + df['counter']
    sns.stripplot(data=df, x='n', y='max_err', hue='series', dodge=True, alpha=0.5, size=3)
    plt.xlabel('n')
    plt.ylabel('max |k~ - k|')
    plt.title('Coreness error per trial')

    # 2. medians against ln(n)^2 with the fitted line, one per protocol/counter
    plt.subplot(1, 2, 2)
    for (protocol, counter), fit in series_fits(df).items():
        label = f'{protocol}/{counter}'
        x = np.log(fit.medians['n'].to_numpy(dtype=float)) ** 2
        plt.scatter(x, fit.medians['max_err'], label=f'{label} medians')
        plt.plot(x, fit.slope * x + fit.intercept, '--', label=f'{label} fit (R^2={fit.r_squared:.2f})')
        logger.info(f"{label}: slope={fit.slope:.4f}, R^2={fit.r_squared:.3f}")
    plt.xlabel('ln(n)^2')
    plt.ylabel('median max_err')
    plt.legend()
    plt.title('Error scaling')

    plt.tight_layout()
    plt.savefig(output_path, dpi=150, bbox_inches='tight')
    plt.close()
    logger.info(f"Saved plot to {output_path}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Plot a sweep CSV')
    parser.add_argument('csv', help='Sweep CSV written by the sweep subcommand or batch_sweep.py')
    parser.add_argument('--output', default=None, help='PNG path (default: next to the CSV)')
    args = parser.parse_args()

    setup_global_logging()
    output = args.output or os.path.splitext(args.csv)[0] + '.png'
    try:
        plot_sweep(args.csv, output)
    except (OSError, ValueError) as e:
        logger.error(f"Plot failed: {e}")
        sys.exit(4 if isinstance(e, OSError) else 2)
