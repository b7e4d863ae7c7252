import json
import types

import numpy as np
import pytest

from fcid import data as fdata
from fcid.errors import ConfigError, DomainError, EmptyDataError, RangeError
from fcid.harness import (ExperimentConfig, build_dataset, build_model, mse, resolve_cut,
                          run_experiment, sweep_lambda)


def _trace(innov, skipped=None):
    innov = np.asarray(innov, dtype=float)
    sk = np.zeros(len(innov), dtype=np.int8) if skipped is None else np.asarray(skipped)
    return types.SimpleNamespace(innovation=innov, skipped=sk)


def test_mse_all_zero():
    assert mse(_trace([0, 0, 0, 0]), 1) == (0.0, 0.0)


def test_mse_hand_example():
    m_all, m_post = mse(_trace([1, 1, 3]), 2)
    assert m_all == pytest.approx(11 / 3, rel=1e-15)
    assert m_post == 9.0


def test_mse_excludes_skipped():
    m_all, m_post = mse(_trace([1, np.nan, 3], skipped=[0, 1, 0]), 1)
    assert m_all == 5.0 and m_post == 9.0


def test_mse_errors():
    with pytest.raises(EmptyDataError):
        mse(_trace([]), 0)
    with pytest.raises(RangeError):
        mse(_trace([1, 2]), 2)
    with pytest.raises(EmptyDataError):
        mse(_trace([1, np.nan], skipped=[0, 1]), 1)


@pytest.mark.parametrize("cut, n, expect", [(0.1, 5000, 500), (0.0, 10, 0), (0.25, 10, 2), (7, 10, 7)])
def test_resolve_cut(cut, n, expect):
    assert resolve_cut(cut, n) == expect


def test_resolve_cut_beyond_end():
    with pytest.raises(ConfigError):
        resolve_cut(10, 10)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": "pem"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"lambda": 1.0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"transient_cut": 1.5})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": "kim", "theta0": [1, 2, 3, 4]})


def test_config_file_forms(tmp_path):
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"model": "kim", "lambda": 0.95, "seed": 3}))
    kv = tmp_path / "c.cfg"
    kv.write_text("# comment\nmodel = kim\nlambda = 0.95\nseed = 3\n")
    a, b = ExperimentConfig.from_file(j), ExperimentConfig.from_file(kv)
    assert a == b
    assert a.lam == 0.95 and a.model == "kim"
    assert a.replace(seed=9).seed == 9


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "absent.json")


def test_limiting_current_default():
    model = build_model(ExperimentConfig())
    assert model.constants.beta == pytest.approx(1 / 37.5)


def _small(**kw):
    base = dict(n=600, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_compare_report_has_both_arms(tmp_path):
    cfg = _small(out_dir=str(tmp_path))
    rep = run_experiment(cfg, arms=("constant", "adaptive"))
    d = json.loads((tmp_path / "report.json").read_text())
    assert set(d["arms"]) == {"constant", "adaptive"}
    for arm in d["arms"].values():
        assert arm["mse_all"] >= 0 and arm["mse_post"] >= 0
        assert set(arm["final_theta"]) == {"V0", "b", "r", "alpha"}
    assert d["transient_cut"]["index"] == 60
    assert d["dataset_sha256"] == rep.dataset_sha256
    table = (tmp_path / "report.txt").read_text()
    assert "Constant R" in table and "Estimating R" in table and "MSE (2)" in table
    for arm in ("constant", "adaptive"):
        assert (tmp_path / f"trace_squadrito_{arm}.csv").exists()


def test_constant_arm_keeps_unit_noise(tmp_path):
    rep = run_experiment(_small(out_dir=str(tmp_path)))
    tr = fdata.read_trace(tmp_path / "trace_squadrito_constant.csv")
    assert np.all(tr.R == 1.0)
    assert rep.arms["constant"].final_R == 1.0


def test_mse_recomputable_from_trace(tmp_path):
    rep = run_experiment(_small(model="kim", out_dir=str(tmp_path)), arms=("constant", "adaptive"))
    for arm, res in rep.arms.items():
        tr = fdata.read_trace(tmp_path / res.trace_file)
        m_all, m_post = mse(tr, rep.cut_index)
        assert m_all == pytest.approx(res.mse_all, rel=1e-12)
        assert m_post == pytest.approx(res.mse_post, rel=1e-12)


def test_adaptive_final_noise_near_injected():
    rep = run_experiment(ExperimentConfig(adaptive=True, seed=2), write=False)
    assert 1 / 1.25 <= rep.arms["adaptive"].final_R / 1e-4 <= 1.25


def test_deterministic(tmp_path):
    cfg = _small(model="kim", out_dir=str(tmp_path))
    names = ("report.json", "report.txt", "trace_kim_constant.csv", "trace_kim_adaptive.csv")
    run_experiment(cfg, arms=("constant", "adaptive"))
    first = {name: (tmp_path / name).read_bytes() for name in names}
    run_experiment(cfg, arms=("constant", "adaptive"))
    for name in names:
        assert (tmp_path / name).read_bytes() == first[name]


def test_data_file_source(tmp_path):
    cfg = _small()
    ds = build_dataset(cfg)
    csv, _ = fdata.write_dataset(tmp_path, ds)
    rep = run_experiment(cfg.replace(data=str(csv)), write=False)
    assert rep.dataset_sha256 == ds.digest()
    assert rep.truth is None


def test_errors_carry_arm_and_sample(tmp_path):
    csv = tmp_path / "s.csv"
    fdata.write_samples(csv, [(0.0, 5.0, 33.0), (0.1, 6.0, 32.9), (0.2, 40.0, 20.0)])
    cfg = _small(data=str(csv), on_domain_error="abort", transient_cut=0.0)
    with pytest.raises(DomainError) as info:
        run_experiment(cfg, write=False)
    assert info.value.arm == "constant"
    assert info.value.sample_index == 2


def test_sweep_single_lambda_matches_run():
    cfg = _small(lam=0.95)
    (row,) = sweep_lambda(cfg, [0.95], write=False)
    a = run_experiment(cfg, arms=("adaptive",), write=False).arms["adaptive"]
    assert (row["mse_all"], row["mse_post"], row["final_R"]) == (a.mse_all, a.mse_post, a.final_R)


def test_sweep_shares_dataset(tmp_path):
    rows = sweep_lambda(_small(out_dir=str(tmp_path)), [0.99, 0.9])
    assert [r["lambda"] for r in rows] == [0.9, 0.99]
    assert rows[0]["dataset_sha256"] == rows[1]["dataset_sha256"]
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 3


def test_sweep_rejects_bad_lambda():
    with pytest.raises(RangeError):
        sweep_lambda(_small(), [0.5, 1.0], write=False)
    with pytest.raises(RangeError):
        sweep_lambda(_small(), [], write=False)


def test_sweep_near_unit_lambda_follows_geometric_decay(tmp_path):
    lam, n, warmup = 0.9999, 2000, 50
    cfg = _small(n=n, lam=lam, warmup=warmup, out_dir=str(tmp_path))
    (row,) = sweep_lambda(cfg, [lam], write=False)
    rep = run_experiment(cfg, arms=("adaptive",))
    tr = fdata.read_trace(tmp_path / "trace_squadrito_adaptive.csv")
    # replay the blend from the recorded raw estimates
    R = 1.0
    for r_hat in tr.R_hat[warmup:]:
        R = lam * R + (1 - lam) * r_hat
    assert row["final_R"] == pytest.approx(R, rel=1e-12)
    # geometric bound: the start value decays by lam**(n - warmup), the rest is
    # a convex combination of nonnegative estimates
    decay = lam ** (n - warmup)
    hi = decay + (1 - decay) * np.nanmax(tr.R_hat)
    assert decay <= row["final_R"] <= hi
    assert rep.arms["adaptive"].final_R == row["final_R"]
