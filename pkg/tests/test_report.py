import json

import numpy as np
import pytest

from goalskit import report
from goalskit.goals import goals_local
from goalskit.rate import effect_size_analog, rate_scores
from goalskit.utils import DataError


def test_report_label():
    assert report.report_label('goals', 1.0) == 'goals-xi1'
    assert report.report_label('goals', 0.05) == 'goals-xi0.05'
    assert report.report_label('nn-goals', 1.5) == 'nn-goals-xi1.5'
    assert report.report_label('rate', 1.0) == 'rate'
    assert report.report_label('shap') == 'shap'


def test_from_goals_result(rbf_fit, small_data):
    result = goals_local(rbf_fit, small_data, xi=1.0)
    wrapped = report.ImportanceReport.from_result(result, label='goals-xi1', dataset='I_rep000', extra='yes')

    assert wrapped.method == 'goals'
    assert wrapped.local_scores.shape == (small_data.n, small_data.j)
    np.testing.assert_array_equal(wrapped.summary['global'], result.global_scores)
    assert wrapped.metadata['xi'] == 1.0
    assert wrapped.metadata['extra'] == 'yes'


def test_write_and_read_goals_report(tmp_path, rbf_fit, small_data):
    result = goals_local(rbf_fit, small_data, xi=1.0)
    wrapped = report.ImportanceReport.from_result(result, label='goals-xi1', dataset='I_rep000')
    path = report.write_report(wrapped, tmp_path)

    assert path == tmp_path / 'I_rep000_goals-xi1.report.json'
    assert (tmp_path / 'I_rep000_goals-xi1.scores.csv').exists()
    payload = json.loads(path.read_text())
    assert payload['format'] == report.REPORT_FORMAT
    assert payload['n_samples'] == small_data.n

    loaded = report.read_report(path)
    np.testing.assert_array_equal(loaded.local_scores, result.local_scores)
    np.testing.assert_array_equal(loaded.global_scores, result.global_scores)
    assert loaded.feature_names == small_data.feature_names
    assert loaded.label == 'goals-xi1'
    assert loaded.dataset == 'I_rep000'


def test_write_and_read_rate_report(tmp_path, rbf_fit, small_data):
    result = rate_scores(effect_size_analog(rbf_fit, small_data))
    wrapped = report.ImportanceReport.from_result(result, dataset='rep')
    path = report.write_report(wrapped, tmp_path, compress=True)

    assert (tmp_path / 'rep_rate.scores.csv.gz').exists()
    loaded = report.read_report(path)
    assert loaded.local_scores is None
    assert loaded.global_scores.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(loaded.summary['kld'], result.kld)
    assert loaded.metadata['rate_method'] == 'generic'


def test_read_report_errors(tmp_path, rbf_fit, small_data):
    wrapped = report.ImportanceReport.from_result(goals_local(rbf_fit, small_data), dataset='rep', label='goals')
    path = report.write_report(wrapped, tmp_path)

    payload = json.loads(path.read_text())
    payload['feature_names'] = ['a', 'b', 'c', 'd']
    bad_names = tmp_path / 'bad_names.report.json'
    bad_names.write_text(json.dumps(payload))
    with pytest.raises(DataError, match='do not match the feature names'):
        report.read_report(bad_names)

    payload['format'] = 'goalskit.report.v0'
    bad_format = tmp_path / 'bad_format.report.json'
    bad_format.write_text(json.dumps(payload))
    with pytest.raises(DataError, match="expected 'goalskit.report.v1'"):
        report.read_report(bad_format)

    (tmp_path / 'rep_goals.scores.csv').unlink()
    with pytest.raises(FileNotFoundError, match='Missing score table'):
        report.read_report(path)
