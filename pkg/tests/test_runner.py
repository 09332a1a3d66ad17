import hashlib
import json
import subprocess
import sys

import pytest

from mourrelab.runner import ConfigError, main, run, validate


def test_minimal_config_gets_defaults():
    cfg = validate('{"experiment": "torus-lemma"}')
    assert cfg['boundary'] == 'dirichlet'
    assert cfg['plateau_radius'] == 0.5
    assert cfg['collar'] == 5
    assert cfg['delta'] == [0.25, 0.5, 0.75]
    assert cfg['output_path'] == 'torus-lemma.csv'


def test_errors_are_itemized():
    with pytest.raises(ConfigError) as err:
        validate({'experiment': 'mourre', 'a': -2.5, 'b': 0.5, 'bogus': 1, 'nu': 7})
    text = str(err.value)
    assert 'bogus: unknown key' in text
    assert 'outside (-2, 2)' in text
    assert text.count('nu:') == 1
    assert len(err.value.errors) == 3


def test_missing_experiment_and_bad_json():
    with pytest.raises(ConfigError, match='missing required field'):
        validate('{}')
    with pytest.raises(ConfigError, match='not valid JSON'):
        validate('{nope')


def test_lambda_bound_is_enforced_for_mourre_runs():
    with pytest.raises(ConfigError, match='E_inf'):
        validate({'experiment': 'lambda-scan', 'lambda_grid': [0.0, 0.6],
                  'distribution': {'kind': 'uniform', 'lo': -2, 'hi': 2}})
    # the same grid is fine for experiments that do not need it
    validate({'experiment': 'lemma1', 'lambda_grid': [0.0, 0.6],
              'distribution': {'kind': 'uniform', 'lo': -2, 'hi': 2}})


@pytest.mark.parametrize('key,value', [('M', 3), ('K', -1), ('grid', 32), ('seeds', []),
                                       ('lambda_grid', [0.1, 0.05]), ('format', 'xml'),
                                       ('distribution', {'kind': 'cauchy'}),
                                       ('plateau_radius', 1.0), ('boundary', 'open')])
def test_out_of_range_values(key, value):
    with pytest.raises(ConfigError, match=key):
        validate({'experiment': 'dos', key: value})


def test_run_writes_data_and_manifest(tmp_path):
    cfg = {'experiment': 'torus-lemma', 'nu': 3, 'grid': 64, 'output_path': 'out.csv'}
    manifest = run(cfg, output_dir=tmp_path)
    data = (tmp_path / 'out.csv').read_bytes()
    meta = json.loads((tmp_path / 'out.csv.manifest.json').read_text())
    assert meta['passed'] and manifest.passed
    assert meta['data_files']['out.csv'] == hashlib.sha256(data).hexdigest()
    assert meta['config']['grid'] == 64
    assert data.decode().splitlines()[0] == 'nu,delta,grid,min,argmin_1,argmin_2,argmin_3,threshold,pass'


def test_reruns_are_byte_identical(tmp_path):
    cfg = {'experiment': 'lemma1', 'L': 30, 'M': 4, 'K': 2, 'seeds': [0, 1],
           'format': 'json'}
    first = run(dict(cfg, output_path='a.json'), output_dir=tmp_path)
    second = run(dict(cfg, output_path='b.json'), output_dir=tmp_path)
    assert (tmp_path / 'a.json').read_bytes() == (tmp_path / 'b.json').read_bytes()
    assert list(first.data_files.values()) == list(second.data_files.values())


def test_even_dimension_torus_run_reports_failure(tmp_path):
    cfg = tmp_path / 'c.json'
    cfg.write_text(json.dumps({'nu': 2, 'delta': 0.5, 'grid': 64,
                               'output_path': str(tmp_path / 't.csv')}))
    assert main(['torus-lemma', str(cfg)]) == 1


def test_cli_validate_and_mismatch(tmp_path, capsys):
    cfg = tmp_path / 'c.json'
    cfg.write_text(json.dumps({'experiment': 'weyl'}))
    assert main(['validate', str(cfg)]) == 0
    assert '"ell": 100' in capsys.readouterr().out
    assert main(['dos', str(cfg)]) == 2
    cfg.write_text('{"experiment": "weyl", "ell": 0}')
    assert main(['validate', str(cfg)]) == 2
    assert 'ell: positive integer' in capsys.readouterr().err


def test_capacity_errors_surface_with_exit_code(tmp_path):
    cfg = tmp_path / 'c.json'
    cfg.write_text(json.dumps({'nu': 2, 'L': 40, 'output_path': str(tmp_path / 'd.csv')}))
    assert main(['spectrum', str(cfg)]) == 2


def test_module_entry_point(tmp_path):
    cfg = tmp_path / 'c.json'
    cfg.write_text(json.dumps({'nu': 1, 'L': 8, 'samples': 5,
                               'output_path': str(tmp_path / 'c.csv')}))
    proc = subprocess.run([sys.executable, '-m', 'mourrelab', 'commutator-identity', str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert 'PASS interior_identity' in proc.stdout


def test_torus_run_odd_dimension_row(tmp_path):
    run({'experiment': 'torus-lemma', 'nu': 3, 'delta': 0.75, 'grid': 256,
         'output_path': 'odd.csv'}, output_dir=tmp_path)
    header, row = (tmp_path / 'odd.csv').read_text().splitlines()
    fields = dict(zip(header.split(','), row.split(',')))
    assert float(fields['min']) >= 2.25 * (1 - 2 * 3.141592653589793 * 3 / 256)
    assert fields['pass'] == 'true'


def test_spectrum_run_at_zero_disorder(tmp_path):
    manifest = run({'experiment': 'spectrum', 'nu': 1, 'L': 100, 'lambda': 0.0,
                    'output_path': 's.csv'}, output_dir=tmp_path)
    assert manifest.passed
    _, row = (tmp_path / 's.csv').read_text().splitlines()
    values = row.split(',')
    assert -2 <= float(values[3]) and float(values[4]) <= 2
