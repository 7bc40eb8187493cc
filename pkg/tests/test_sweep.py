import math

import openpyxl
import pandas as pd
import pytest

from ldp_core import config
from ldp_core.config import SWEEP_CSV_FIELDS, get_thread_cap
from ldp_core.core_approx import build_schedule
from ldp_core.errors import EXIT_DIVERGENCE, EXIT_OK, InvalidInputError
from ldp_core.sweep import (
    ExperimentSpec,
    cmd_sweep,
    compare_counters,
    export_to_excel,
    fit_log2_scaling,
    median_frame,
    run_sweep,
    sweep_from_csv,
    trial_seeds,
    validate_experiment,
)


@pytest.fixture(autouse=True)
def _serial(monkeypatch):
    monkeypatch.delenv("LDP_CORE_THREADS", raising=False)


def test_zero_noise_sweep_is_exact(tmp_path):
    spec = ExperimentSpec(sizes=(16, 32), trials=2, noise='disabled', out=str(tmp_path / 's.csv'))
    df = run_sweep(spec)
    assert list(df.columns) == SWEEP_CSV_FIELDS
    assert len(df) == 4
    assert (df['max_err'] == 0).all()
    assert (df['alpha_obs'] == 0).all()
    assert (df['rounds'] <= df['n']).all()
    assert set(df['eta']) == {''}


def test_approx_rows_respect_round_budget(tmp_path):
    spec = ExperimentSpec(sizes=(32,), trials=3, protocols=('exact', 'approx'), eta=0.5, out=str(tmp_path / 's.csv'))
    df = run_sweep(spec)
    approx = df[df['protocol'] == 'approx']
    assert len(approx) == 3
    assert (approx['rounds'] <= build_schedule(32, 0.5).total_rounds).all()
    assert (approx['eta'] == 0.5).all()


def test_untimed_reruns_are_byte_identical(tmp_path):
    first = tmp_path / 'a.csv'
    second = tmp_path / 'b.csv'
    base = ExperimentSpec(sizes=(16, 24), epsilons=(0.5, 1.0), trials=2, seed=11, timing=False,
                          protocols=('exact', 'approx'))
    cmd_sweep(base._replace(out=str(first)))
    cmd_sweep(base._replace(out=str(second)))
    assert first.read_bytes() == second.read_bytes()
    assert (sweep_from_csv(str(first))['ms'] == 0).all()


def test_parallel_sweep_keeps_grid_order(monkeypatch):
    spec = ExperimentSpec(sizes=(12, 20), trials=2, seed=4, timing=False)
    serial = run_sweep(spec)
    monkeypatch.setenv("LDP_CORE_THREADS", "2")
    parallel = run_sweep(spec)
    pd.testing.assert_frame_equal(serial, parallel)


def test_trial_seeds_are_deterministic():
    assert trial_seeds(3, 64, 0) == trial_seeds(3, 64, 0)
    assert trial_seeds(3, 64, 0) != trial_seeds(3, 64, 1)
    assert trial_seeds(3, 64, 0) != trial_seeds(3, 128, 0)


def test_fit_recovers_synthetic_scaling():
    sizes = [16, 64, 256, 1024]
    rows = [{'protocol': 'exact', 'counter': 'binary_tree', 'n': n, 'max_err': 2 * math.log(n) ** 2 + 1}
            for n in sizes for _ in range(3)]
    fit = fit_log2_scaling(pd.DataFrame(rows))
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(1.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.medians['n'].tolist() == sizes


def test_fit_needs_two_sizes():
    df = pd.DataFrame([{'protocol': 'exact', 'counter': 'binary_tree', 'n': 64, 'max_err': 3.0}])
    with pytest.raises(InvalidInputError):
        fit_log2_scaling(df)


def test_workbook_export(tmp_path):
    spec = ExperimentSpec(sizes=(16,), trials=2, protocols=('exact', 'approx'), timing=False)
    df = run_sweep(spec)
    path = tmp_path / 'sweep.xlsx'
    export_to_excel(df, path)
    wb = openpyxl.load_workbook(path)
    assert wb.sheetnames == ['rows', 'medians']
    header = [c.value for c in wb['rows'][1]]
    assert header == SWEEP_CSV_FIELDS
    assert wb['rows'].max_row == len(df) + 1
    assert wb['medians'].max_row == len(median_frame(df)) + 1
    assert wb['rows']['A1'].font.bold


@pytest.mark.parametrize('changes', [
    {'trials': 0},
    {'sizes': ()},
    {'family': 'lattice'},
    {'protocols': ('greedy',)},
    {'epsilons': (0.0,)},
    {'counter': 'fenwick'},
    {'memory': 'memoryless', 'counter': 'sparse_vector'},
])
def test_invalid_experiments(changes):
    with pytest.raises(InvalidInputError):
        validate_experiment(ExperimentSpec(sizes=(16,))._replace(**changes))


@pytest.mark.parametrize('raw, expected', [('4', 4), ('abc', 1), ('0', 1), ('', 1)])
def test_thread_cap(monkeypatch, raw, expected):
    monkeypatch.setenv("LDP_CORE_THREADS", raw)
    assert get_thread_cap() == expected


def _counter_rows(medians):
    """medians: {(counter, n): (max_err, alpha_obs)}, three identical trials each."""
    return pd.DataFrame([
        {'protocol': 'exact', 'counter': counter, 'n': n, 'max_err': err, 'alpha_obs': alpha}
        for (counter, n), (err, alpha) in medians.items() for _ in range(3)
    ])


def test_compare_counters_uses_largest_shared_size():
    df = _counter_rows({
        ('binary_tree', 256): (10.0, 12.0),
        ('binary_tree', 1024): (20.0, 24.0),
        ('sparse_vector', 256): (11.0, 13.0),
        ('sparse_vector', 1024): (15.0, 18.0),
        ('sparse_vector', 4096): (16.0, 19.0),
    })
    result = compare_counters(df)
    assert result.n == 1024
    assert (result.binary_tree, result.sparse_vector) == (20.0, 15.0)
    assert result.sparse_vector_wins
    assert not compare_counters(df, n=256).sparse_vector_wins
    assert compare_counters(df, metric='alpha_obs').sparse_vector == 18.0


def test_compare_counters_rejects_missing_data():
    only_tree = _counter_rows({('binary_tree', 256): (1.0, 1.0)})
    with pytest.raises(InvalidInputError):
        compare_counters(only_tree)
    disjoint = _counter_rows({('binary_tree', 256): (1.0, 1.0), ('sparse_vector', 512): (1.0, 1.0)})
    with pytest.raises(InvalidInputError):
        compare_counters(disjoint)
    with pytest.raises(InvalidInputError):
        compare_counters(disjoint, metric='rounds')


@pytest.fixture
def batch_sweep(monkeypatch):
    monkeypatch.setattr(config, 'setup_global_logging', lambda **kwargs: None)
    import batch_sweep
    return batch_sweep


@pytest.mark.parametrize('sv_err, sv_alpha, expected', [
    (5.0, 6.0, EXIT_OK),
    (9.0, 6.0, EXIT_DIVERGENCE),
    (5.0, 7.5, EXIT_DIVERGENCE),
])
def test_batch_driver_fails_when_sparse_vector_does_not_win(batch_sweep, monkeypatch, sv_err, sv_alpha, expected):
    frames = {
        'binary-tree': _counter_rows({('binary_tree', 256): (8.0, 7.0)}),
        'sparse-vector': _counter_rows({('sparse_vector', 256): (sv_err, sv_alpha)}),
    }
    monkeypatch.setattr(batch_sweep, 'run_grid', lambda name: (frames[name], None))
    assert batch_sweep.batch_sweep_main(['binary-tree', 'sparse-vector']) == expected
    assert batch_sweep.batch_sweep_main(['binary-tree']) == EXIT_OK


def test_plot_fits_each_counter_separately(tmp_path):
    from scripts.plot_sweep import plot_sweep, series_fits

    rows = [{'protocol': 'exact', 'counter': counter, 'n': n, 'max_err': slope * math.log(n) ** 2, 'alpha_obs': 0.0}
            for counter, slope in (('binary_tree', 2.0), ('sparse_vector', 0.5)) for n in (16, 64, 256)]
    rows.append({'protocol': 'approx', 'counter': 'binary_tree', 'n': 16, 'max_err': 1.0, 'alpha_obs': 0.0})
    df = pd.DataFrame(rows)
    fits = series_fits(df)
    assert set(fits) == {('exact', 'binary_tree'), ('exact', 'sparse_vector')}
    assert fits[('exact', 'binary_tree')].slope == pytest.approx(2.0)
    assert fits[('exact', 'sparse_vector')].slope == pytest.approx(0.5)
    csv = tmp_path / 'sweep.csv'
    df.to_csv(csv, index=False)
    png = tmp_path / 'sweep.png'
    plot_sweep(str(csv), str(png))
    assert png.stat().st_size > 0


@pytest.mark.slow
def test_binary_tree_error_scales_with_log_squared():
    spec = ExperimentSpec(sizes=tuple(2 ** k for k in range(8, 15)), family='regular', d=8,
                          trials=20, seed=2024, timing=False)
    fit = fit_log2_scaling(run_sweep(spec))
    assert fit.slope > 0
    assert fit.r_squared >= 0.8


@pytest.mark.slow
def test_sparse_vector_beats_binary_tree_on_degree_eight_graphs():
    base = ExperimentSpec(sizes=(2 ** 14,), family='regular', d=8, trials=20, seed=2024, timing=False)
    df = pd.concat([run_sweep(base._replace(counter=counter)) for counter in ('binary_tree', 'sparse_vector')],
                   ignore_index=True)
    for metric in ('max_err', 'alpha_obs'):
        result = compare_counters(df, metric=metric)
        assert result.n == 2 ** 14
        assert result.sparse_vector_wins, result
