import csv
import io

import pytest

from panshuffle.harness.calibrate import CalibrationFailed, calibrate_ut, lower_bound
from panshuffle.harness.cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main
from panshuffle.harness.config import ExperimentConfig, expand_grid, load_config, parse_value
from panshuffle.harness.experiments import (
    CSV_COLUMNS,
    ResultRow,
    _passes,
    c_m_scaling_rows,
    input_vector,
    run_experiment,
    to_csv,
)
from panshuffle.harness.lemmas import lemma_suite
from panshuffle.sampling import ParameterError, RandomSource


def write(tmp_path, text):
    path = tmp_path / "grid.ini"
    path.write_text(text)
    return str(path)


def test_parse_value():
    assert parse_value(" 3 ") == 3 and isinstance(parse_value("3"), int)
    assert parse_value("1e-6") == 1e-6
    assert parse_value("all-distinct") == "all-distinct"


def test_expand_grid():
    assert expand_grid({}) == []
    assert len(expand_grid({"a": [1, 2], "b": [3, 4, 5]})) == 6
    assert expand_grid({"a": [1, 2], "b": [7]}, "zip") == [{"a": 1, "b": 7}, {"a": 2, "b": 7}]
    with pytest.raises(ValueError):
        expand_grid({"a": [1, 2], "b": [1, 2, 3]}, "zip")
    with pytest.raises(ValueError):
        expand_grid({"a": [1]}, "spiral")


def test_load_config(tmp_path):
    path = write(tmp_path, "[zsum-error]\ngrid = zip\nlam = 0, 3\nL = 5\nseed = 11\n")
    cfg = load_config(path, "zsum-error")
    assert cfg.points == [{"lam": 0, "L": 5}, {"lam": 3, "L": 5}]
    assert cfg.seed == 11 and cfg.seed_given
    with pytest.raises(KeyError):
        load_config(path, "audit-de")
    with pytest.raises(ValueError):
        ExperimentConfig(name="nope")


def test_empty_grid_writes_header_only():
    text = to_csv(run_experiment(ExperimentConfig("zsum-error", points=[])))
    lines = text.splitlines()
    assert lines[0].startswith("# schema_version=")
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2


def test_invalid_point_is_reported(tmp_path, capsys):
    path = write(tmp_path, "[zsum-error]\ngrid = zip\nlam = -1, 2\ntrials = 20\n")
    out = tmp_path / "out.csv"
    code = main(["--experiment", "zsum-error", "--config", path, "--out", str(out)])
    assert code == EXIT_INVALID
    text = out.read_text()
    assert "# error: point=0" in text
    rows = [r for r in csv.DictReader(io.StringIO("\n".join(l for l in text.splitlines() if not l.startswith("#"))))]
    assert {r["point"] for r in rows} == {"1"}


def test_same_seed_byte_identical(tmp_path):
    path = write(tmp_path, "[zsum-error]\nlam = 0, 5\nL = 10\ntrials = 50\n")
    outs = []
    for name, jobs in (("a.csv", "1"), ("b.csv", "2")):
        target = tmp_path / name
        assert main(["--experiment", "zsum-error", "--config", path, "--seed", "4", "--out", str(target),
                     "--jobs", jobs]) == EXIT_OK
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "c.csv"
    main(["--experiment", "zsum-error", "--config", path, "--seed", "5", "--out", str(other)])
    assert other.read_bytes() != outs[0]


def test_timing_column(tmp_path):
    path = write(tmp_path, "[zsum-error]\nlam = 1\ntrials = 10\n")
    target = tmp_path / "t.csv"
    main(["--experiment", "zsum-error", "--config", path, "--out", str(target), "--timing"])
    assert target.read_text().splitlines()[1].endswith(",wall_time")


def test_seed_precedence(tmp_path, monkeypatch):
    path = write(tmp_path, "[zsum-error]\nlam = 5\nL = 10\ntrials = 30\n")

    def run(*extra):
        target = tmp_path / "s.csv"
        main(["--experiment", "zsum-error", "--config", path, "--out", str(target), *extra])
        return target.read_bytes()

    monkeypatch.setenv("PANSHUFFLE_SEED", "77")
    from_env = run()
    assert from_env == run("--seed", "77")
    monkeypatch.delenv("PANSHUFFLE_SEED")
    assert from_env != run()


def test_empty_select(capsys):
    assert main(["--experiment", "lemma-suite", "--select", ""]) == EXIT_OK
    assert capsys.readouterr().out.count("\n") == 2
    assert main(["--experiment", "zsum-error", "--select", "moments"]) == EXIT_INVALID


def test_select_subset(capsys):
    assert main(["--experiment", "lemma-suite", "--select", "parity-bias+b-symmetry"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lemma:parity-bias" in out and "lemma:b-symmetry" in out and "moments" not in out


def test_failed_metric_exit_code(tmp_path):
    path = write(tmp_path, "[audit-zsum]\nlam = 2\ndelta = 0.1\nL = 3\n")
    assert main(["--experiment", "audit-zsum", "--config", path, "--out", str(tmp_path / "z.csv")]) == EXIT_FAILED


def test_lemma_suite_passes():
    results = lemma_suite(rng=RandomSource(3))
    assert results and all(r.passed for r in results)
    assert lemma_suite([]) == []
    with pytest.raises(KeyError):
        lemma_suite(["nope"])


def test_passes_direction():
    assert _passes("success_rate", 0.9, 0.8) is True
    assert _passes("success_rate", 0.7, 0.8) is False
    assert _passes("delta_hat_upper", 0.1, 0.2) is True
    assert _passes("anything", 1.0, None) is None


def test_input_vector():
    assert input_vector("all-distinct", 5, 3) == [1, 2, 3, 1, 2]
    assert len(set(input_vector("half-distinct", 10, 50))) == 5
    with pytest.raises(ParameterError):
        input_vector("some", 3, 3)


def test_c_m_scaling_rows():
    def row(k, c):
        return ResultRow("ut-power", 0, {"k": k, "alpha": 0.5}, "c_m", c)

    rows = c_m_scaling_rows([row(20, 5.0), row(100, 9.0), row(400, 40.0)])
    assert [r.passed for r in rows] == [True, False]


def test_lower_bound():
    assert lower_bound(0.0, 100, 0.9) == 0.0
    assert 0.8 < lower_bound(0.9, 100, 0.9) < 0.9


def test_calibration_monotone():
    kw = dict(k=20, eps=1.0, delta=0.01, trials=100, repetitions=5)
    strong = calibrate_ut(alpha=0.5, target_power=0.75, rng=RandomSource(1), **kw)
    weak = calibrate_ut(alpha=0.25, target_power=0.75, rng=RandomSource(1), **kw)
    assert strong.m_star <= weak.m_star
    easy = calibrate_ut(alpha=0.5, target_power=0.51, rng=RandomSource(1), **kw)
    assert easy.m_star <= strong.m_star


def test_calibration_stable_across_seeds():
    c = [calibrate_ut(20, 0.5, 1.0, 0.01, 0.75, RandomSource(s), trials=100, repetitions=5).c_m for s in (1, 2, 3)]
    assert max(c) <= 2 * min(c)


def test_calibration_validation():
    with pytest.raises(ParameterError):
        calibrate_ut(20, 0.5, 1.0, 0.01, 0.4, RandomSource(0))
    with pytest.raises(CalibrationFailed):
        calibrate_ut(20, 0.5, 1.0, 0.01, 0.75, RandomSource(0), trials=50, repetitions=3, cap=64)


def test_compression_constant_sensitivity_row():
    from panshuffle.uniformity import FullTestConfig

    points = [dict(k=20, alpha=0.5, eps=1.0, delta=0.01, m=1232, constant=c, trials=50) for c in (477, 400)]
    result = run_experiment(ExperimentConfig("ut-power", points=points))
    assert [r.params["constant"] for r in result.metric("m_star")] == [477, 400]
    # alpha-hat only enters the threshold through a term that is tiny next to the noise terms
    a, b = (FullTestConfig(20, 0.5, 1.0, 0.01, 1232, compression_constant=c) for c in (477, 400))
    assert a.compressed_alpha < b.compressed_alpha
    assert b.prelim_params(1232).tau / a.prelim_params(1232).tau - 1 < 1e-6
