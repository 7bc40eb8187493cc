import io
import json

import pandas as pd
import pytest

from ldp_core import cli
from ldp_core.cli import main
from ldp_core.generators import gen_gnp, gen_path


@pytest.fixture(autouse=True)
def _quiet_logging(monkeypatch):
    monkeypatch.setattr(cli, 'setup_global_logging', lambda **kwargs: None)


def _oracle(capsys, path):
    assert main(['oracle', '--graph', path]) == 0
    return capsys.readouterr().out.splitlines()


def test_oracle_k4(capsys, write_graph, k4):
    lines = _oracle(capsys, write_graph(k4))
    assert lines == ['k=3,3,3,3; k*=3; rho*=1.5', 'witness=0,1,2,3']


def test_oracle_path(capsys, write_graph, path4):
    lines = _oracle(capsys, write_graph(path4))
    assert lines[0] == 'k=1,1,1,1; k*=1; rho*=0.75'


def test_oracle_two_cliques(capsys, write_graph, two_cliques):
    lines = _oracle(capsys, write_graph(two_cliques))
    assert lines == ['k=4,4,4,4,4,2,2,2; k*=4; rho*=2', 'witness=0,1,2,3,4']


def test_oracle_skips_rho_for_large_graphs(capsys, write_graph):
    lines = _oracle(capsys, write_graph(gen_path(25)))
    assert lines == ['k=' + ','.join(['1'] * 25) + '; k*=1']


def test_run_exact_without_noise_matches_oracle(capsys, write_graph):
    path = write_graph(gen_gnp(30, 0.2, 7))
    assert main(['run-exact', '--graph', path, '--noise', 'disabled']) == 0
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(frame.columns) == ['vertex', 'k_true', 'k_est', 'round']
    assert (frame['k_est'] == frame['k_true']).all()


def test_run_approx_writes_phase_column(tmp_path, write_graph, k4):
    out = tmp_path / 'est.csv'
    transcript = tmp_path / 'tr.jsonl'
    assert main(['run-approx', '--graph', write_graph(k4), '--noise', 'disabled',
                 '--out', str(out), '--transcript', str(transcript)]) == 0
    frame = pd.read_csv(out)
    assert frame['phase'].tolist() == [1, 1, 1, 1]
    assert frame['k_est'].tolist() == [3.0] * 4
    first = json.loads(transcript.read_text().splitlines()[0])
    assert first['t'] == 1
    assert first['S'] == [0, 1, 2, 3]


def test_private_run_rejects_disabled_noise(write_graph, k4):
    assert main(['run-exact', '--graph', write_graph(k4), '--noise', 'disabled', '--assert-private']) == 2


def test_missing_graph_file(tmp_path):
    assert main(['run-exact', '--graph', str(tmp_path / 'nope.txt')]) == 4


def test_malformed_edge_list(tmp_path):
    path = tmp_path / 'bad.txt'
    path.write_text('0 1\n1 x\n')
    assert main(['oracle', '--graph', str(path)]) == 2


def test_max_rounds_divergence(write_graph):
    path = write_graph(gen_path(10))
    assert main(['run-exact', '--graph', path, '--noise', 'disabled', '--max-rounds', '1']) == 3


def test_memory_modes_write_identical_csv(tmp_path, write_graph):
    path = write_graph(gen_gnp(40, 0.15, 2))
    outs = []
    for memory in ('memoryful', 'memoryless'):
        out = tmp_path / f'{memory}.csv'
        assert main(['run-exact', '--graph', path, '--seed', '99', '--memory', memory, '--out', str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_run_densest_report(capsys, write_graph, two_cliques):
    assert main(['run-densest', '--graph', write_graph(two_cliques), '--noise', 'disabled']) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['subset'] == [0, 1, 2, 3, 4]
    assert report['density'] == 2.0
    assert report['rho_star'] == 2.0


def test_audit_counter_sensitivity(capsys):
    assert main(['audit', 'counter-sensitivity', '--T', '256', '--trials', '50']) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['kind'] == 'counter-sensitivity'
    assert report['pass'] is True


def test_audit_stream_discrepancy_needs_edge(write_graph, k4):
    assert main(['audit', 'stream-discrepancy', '--graph', write_graph(k4)]) == 2
    assert main(['audit', 'alpha']) == 2


def test_audit_stream_discrepancy(capsys, write_graph, k4):
    assert main(['audit', 'stream-discrepancy', '--graph', write_graph(k4), '--edge', '0,1', '--seed', '5']) == 0
    assert json.loads(capsys.readouterr().out)['pass'] is True


def test_generate_then_oracle(tmp_path, capsys):
    out = tmp_path / 'reg.txt'
    assert main(['generate', '--family', 'regular', '--n', '10', '--d', '3', '--seed', '1', '--out', str(out)]) == 0
    lines = _oracle(capsys, str(out))
    assert lines[0].startswith('k=3,3,3,3,3,3,3,3,3,3; k*=3')


def test_generate_query_graph(tmp_path, capsys):
    out = tmp_path / 'q.txt'
    assert main(['generate', '--family', 'query-graph', '--n', '3', '--x', '101', '--q', '110',
                 '--out', str(out)]) == 0
    assert out.read_text().startswith('n ')


def test_untimed_sweep_reruns_are_identical(tmp_path, monkeypatch):
    monkeypatch.delenv('LDP_CORE_THREADS', raising=False)
    outputs = []
    for name in ('a.csv', 'b.csv'):
        out = tmp_path / name
        assert main(['sweep', '--sizes', '16,24', '--trials', '2', '--seed', '3', '--protocols', 'exact,approx',
                     '--no-timing', '--out', str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_sweep_fit_and_workbook(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv('LDP_CORE_THREADS', raising=False)
    xlsx = tmp_path / 's.xlsx'
    assert main(['sweep', '--sizes', '16,32,64', '--out', str(tmp_path / 's.csv'), '--xlsx', str(xlsx),
                 '--fit', '--no-timing']) == 0
    assert capsys.readouterr().out.startswith('exact: max_err ~')
    assert xlsx.exists()


def test_unknown_counter_is_a_usage_error(write_graph, k4):
    with pytest.raises(SystemExit) as exc:
        main(['run-exact', '--graph', write_graph(k4), '--counter', 'fenwick'])
    assert exc.value.code == 2


def test_hyphenated_counter_names(capsys, write_graph, k4):
    assert main(['run-exact', '--graph', write_graph(k4), '--counter', 'exact-debug', '--noise', 'disabled']) == 0
    assert 'k_est' in capsys.readouterr().out
