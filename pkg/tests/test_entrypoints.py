import pytest


def test_goalskit(script_runner):
    ret = script_runner.run(['python', '-m', 'goalskit', '-h'])
    assert ret.success


@pytest.mark.parametrize('process', ['simulate', 'score', 'evaluate', 'bench'])
def test_process_help(script_runner, process):
    ret = script_runner.run(['python', '-m', 'goalskit', '++process', process, '-h'])
    assert ret.success


def test_console_script(script_runner):
    ret = script_runner.run(['goalskit', '++process', 'simulate', '-h'])
    assert ret.success


def test_missing_out_is_a_usage_error(script_runner):
    ret = script_runner.run(['python', '-m', 'goalskit', '++process', 'simulate', '--scenario', 'I'])
    assert ret.returncode == 2
    assert 'the following arguments are required: --out' in ret.stderr


def test_invalid_flag_combination(script_runner, tmp_path):
    ret = script_runner.run(
        ['python', '-m', 'goalskit', '++process', 'simulate', '--scenario', 'I', '--rho', '1', '--out', str(tmp_path)]
    )
    assert ret.returncode == 2
    assert 'rho=1 puts all signal in additive effects' in ret.stderr


def test_missing_data_exit_code(script_runner, tmp_path):
    ret = script_runner.run(
        ['python', '-m', 'goalskit', '++process', 'score', '--data', str(tmp_path / 'nope.csv'), '--out', str(tmp_path)]
    )
    assert ret.returncode == 3
    assert 'Missing required file' in ret.stdout


def test_simulate_and_score(script_runner, tmp_path):
    data = tmp_path / 'data'
    ret = script_runner.run(
        ['python', '-m', 'goalskit', '++process', 'simulate', '--n', '60', '--seed', '7', '--out', str(data)]
    )
    assert ret.success
    assert (data / 'I_rep000.csv').exists()
    assert (data / 'manifest.json').exists()

    reports = tmp_path / 'reports'
    ret = script_runner.run(
        ['python', '-m', 'goalskit', '++process', 'score', '--data', str(data / 'I_rep000.csv'), '--out', str(reports)]
    )
    assert ret.success
    assert 'Finished scoring I_rep000.csv with goals' in ret.stdout
    assert (reports / 'I_rep000_goals-xi1.report.json').exists()


def test_nonpositive_sigma2_is_a_usage_error(script_runner, tmp_path):
    command = ['python', '-m', 'goalskit', '++process', 'score', '--data', str(tmp_path / 'data.csv')]
    ret = script_runner.run([*command, '--out', str(tmp_path), '--sigma2', '-1'])
    assert ret.returncode == 2
    assert 'must be positive and finite, got -1' in ret.stderr
