import filecmp
import json
import warnings

import pytest

from loadshapes.cli import main
from loadshapes.errors import ConfigError, StageError
from loadshapes.pipeline import RunConfig, run_pipeline, stage_analyze
from loadshapes.synthetic import GeneratorConfig, generate_synthetic

SMOKE_CFG = GeneratorConfig(
    archetypes=4, households=50, days=40,
    noise_level=0.1, temperature_response=1.0,
    outlier_rate=0.1, fuzz_rate=0.02, bad_day_rate=0.05,
)


@pytest.fixture(scope="module")
def smoke_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    corpus = generate_synthetic(SMOKE_CFG, seed=3)
    return corpus.write(out)


def smoke_config(paths, out, **kw):
    defaults = dict(
        meter=str(paths["meter"]),
        weather=str(paths["weather"]),
        survey=str(paths["survey"]),
        out=str(out),
        seed=5,
        sample=1500,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


@pytest.fixture(scope="module")
def smoke_run(smoke_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = smoke_config(smoke_corpus, out)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_pipeline(config)
    return config, out, result


def test_full_run_emits_all_artifacts(smoke_run):
    _, out, result = smoke_run
    assert [r.status for r in result.results] == ["ran"] * 5
    for names in (
        "shapes.csv cleaning_report.csv ingest_report.json model.json labels.csv "
        "dictionary.json assignments.csv entropy_by_stratum.csv coverage_curve.csv "
        "taxonomy.csv household_entropy.csv char_deltas.csv occurrence_map.csv "
        "run_manifest.json"
    ).split():
        assert (out / names).exists(), names


def test_second_invocation_fully_cached(smoke_run):
    config, _, _ = smoke_run
    result = run_pipeline(config)
    assert [r.status for r in result.results] == ["cached"] * 5


def test_parameter_change_invalidates_downstream(smoke_corpus, tmp_path):
    out = tmp_path / "own"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run_pipeline(smoke_config(smoke_corpus, out))
        changed = smoke_config(smoke_corpus, out, truncate_violation=0.10)
        result = run_pipeline(changed)
    statuses = {r.stage: r.status for r in result.results}
    assert statuses["ingest"] == "cached"
    assert statuses["cluster"] == "cached"
    assert statuses["truncate"] == "ran"
    assert statuses["assign"] == "ran"


def test_invalid_theta_rejected_before_any_work(smoke_corpus, tmp_path):
    config = smoke_config(smoke_corpus, tmp_path / "never", theta=0.0)
    with pytest.raises(ConfigError):
        run_pipeline(config)
    assert not (tmp_path / "never").exists()


def test_missing_upstream_artifact_names_producing_stage(smoke_corpus, tmp_path):
    out = tmp_path / "partial"
    config = smoke_config(
        smoke_corpus, out, stages=("ingest", "cluster", "truncate")
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run_pipeline(config)
    with pytest.raises(StageError, match="run `assign` first"):
        stage_analyze(smoke_config(smoke_corpus, out))

    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(StageError, match="run `ingest` first"):
        stage_analyze(smoke_config(smoke_corpus, empty))


def test_failed_stage_removes_partial_outputs(smoke_corpus, tmp_path):
    out = tmp_path / "broken"
    out.mkdir()
    config = smoke_config(smoke_corpus, out, stages=("ingest", "cluster"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run_pipeline(config)
    # corrupt shapes.csv so the cluster stage fails mid-flight
    (out / "shapes.csv").write_text("household_id,date\n")
    (out / "model.json").unlink()
    (out / "labels.csv").unlink()
    with pytest.raises(StageError, match="cluster"):
        run_pipeline(smoke_config(smoke_corpus, out, stages=("cluster",)))
    assert not (out / "model.json").exists()
    assert not (out / "labels.csv").exists()


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(seed=None).validate()
    with pytest.raises(ConfigError):
        RunConfig(seed=1, truncate_violation=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(seed=1, quartiles="fixed:68,71").validate()
    with pytest.raises(ConfigError):
        RunConfig(seed=1, coverage_weight="net").validate()
    RunConfig(seed=1, quartiles="fixed:68,71,76").validate()


def test_run_config_file_with_flag_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "theta=0.25\nseed=11\nsample=500\nout=somewhere\n"
        "quartiles=fixed:68,71,76\n"
    )
    config = RunConfig.from_file(path, overrides={"theta": 0.4})
    assert config.theta == 0.4  # flag wins
    assert config.seed == 11
    assert config.quartile_spec() == ("fixed", (68.0, 71.0, 76.0))

    (tmp_path / "bad.cfg").write_text("nope=1\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        RunConfig.from_file(tmp_path / "bad.cfg")


def test_manifest_excluded_from_determinism_but_artifacts_match(
    smoke_corpus, smoke_run, tmp_path
):
    config, out1, _ = smoke_run
    out2 = tmp_path / "again"
    config2 = smoke_config(smoke_corpus, out2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run_pipeline(config2)
    for name in (
        "shapes.csv", "model.json", "labels.csv", "dictionary.json",
        "assignments.csv", "entropy_by_stratum.csv", "coverage_curve.csv",
        "taxonomy.csv", "household_entropy.csv", "char_deltas.csv",
        "occurrence_map.csv",
    ):
        assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name


def test_analytics_carry_run_id_provenance(smoke_run):
    config, out, result = smoke_run
    first = (out / "entropy_by_stratum.csv").read_text().splitlines()[0]
    assert first.startswith("#")
    assert result.run_id in first
    digest = json.loads((out / "dictionary.json").read_text())["digest"]
    assert digest in first


def test_cli_synth_deterministic(tmp_path, capsys):
    args = ["synth", "--seed", "7", "--households", "20", "--days", "10",
            "--archetypes", "4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("meter.csv", "weather.csv", "survey.csv", "truth.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name,
                           shallow=False)


def test_cli_full_run_and_stage_commands(tmp_path, capsys):
    corpus_dir = tmp_path / "corpus"
    assert main(["synth", "--seed", "3", "--households", "30", "--days", "30",
                 "--archetypes", "4", "--noise", "0.1", "--outlier-rate", "0.1",
                 "--out", str(corpus_dir)]) == 0
    out = tmp_path / "out"
    base = [
        "--meter", str(corpus_dir / "meter.csv"),
        "--weather", str(corpus_dir / "weather.csv"),
        "--survey", str(corpus_dir / "survey.csv"),
        "--out", str(out), "--seed", "5", "--sample", "500",
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["run"] + base) == 0
    captured = capsys.readouterr().out
    assert "analyze: ran" in captured
    assert "run_id:" in captured

    # single stage rerun reports cached
    assert main(["assign"] + base) == 0
    assert "assign: cached" in capsys.readouterr().out


def test_cli_truncate_violation_monotonicity(tmp_path, capsys):
    corpus_dir = tmp_path / "corpus"
    main(["synth", "--seed", "9", "--households", "40", "--days", "40",
          "--archetypes", "5", "--noise", "0.08", "--outlier-rate", "0.15",
          "--fuzz-rate", "0.03", "--out", str(corpus_dir)])
    out = tmp_path / "out"
    base = [
        "--meter", str(corpus_dir / "meter.csv"),
        "--weather", str(corpus_dir / "weather.csv"),
        "--out", str(out), "--seed", "5", "--sample", "1000",
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["ingest"] + base) == 0
        assert main(["cluster"] + base) == 0
        sizes = {}
        for v in ("0.10", "0.30"):
            assert main(["truncate"] + base + ["--truncate-violation", v]) == 0
            payload = json.loads((out / "dictionary.json").read_text())
            sizes[v] = len(payload["ids"])
    assert sizes["0.10"] >= sizes["0.30"]


def test_cli_config_error_exit_code(tmp_path, capsys):
    code = main(["run", "--meter", "x.csv", "--out", str(tmp_path), "--seed",
                 "1", "--theta", "0"])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_stage_error_exit_code(tmp_path, capsys):
    code = main(["analyze", "--out", str(tmp_path), "--seed", "1"])
    assert code == 1
    err = capsys.readouterr().err
    assert "analyze" in err and "shapes.csv" in err


def test_pipeline_stage_selector_subset(smoke_corpus, tmp_path):
    out = tmp_path / "sel"
    config = smoke_config(smoke_corpus, out, stages=("ingest",))
    result = run_pipeline(config)
    assert [r.stage for r in result.results] == ["ingest"]
    assert (out / "shapes.csv").exists()
    assert not (out / "model.json").exists()
