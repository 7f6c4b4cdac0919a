import pytest

from lpsdg.cli import (
    CSV_COLUMNS,
    EXIT_OK,
    EXIT_SOLVER,
    StudyConfig,
    main,
    parse_config,
    run_study,
)
from lpsdg.slab import NewtonConfig


def test_defaults():
    config = parse_config([])
    assert config.case == "space_dominant"
    assert config.k == 1
    assert config.r == 2
    assert config.enriched is True
    assert config.nu == 1e-6
    assert config.mu == 0.1
    assert config.final_time == 1.0
    assert config.taus == [pytest.approx(1.0 / 800.0)]
    assert config.threads == 1


def test_temporal_study_flags():
    config = parse_config(
        ["--case", "time_dominant", "--k", "2", "--r", "4", "--levels", "3", "--tau-halvings", "6"]
    )
    assert config.case == "time_dominant"
    assert config.k == 2
    assert config.r == 4
    assert config.levels == [3]
    assert config.taus == pytest.approx([0.1 * 2.0**-i for i in range(6)])


def test_plain_galerkin_flags():
    config = parse_config(["--case", "space_dominant", "--nu", "1", "--mu", "0", "--no-enrich"])
    assert config.nu == 1.0
    assert config.mu == 0.0
    assert config.enriched is False


@pytest.mark.parametrize(
    "argv",
    [
        ["--case", "unknown_case"],
        ["--k", "nine"],
        ["--k", "7"],
        ["--levels"],
        ["--tau", "-0.1"],
        ["--frobnicate"],
        ["--tau", "0.1", "--tau-halvings", "2"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as err:
        parse_config(argv)
    assert err.value.code == 2


def test_steady_check_run_end_to_end(tmp_path):
    out = tmp_path / "steady.csv"
    code = main(
        [
            "--case",
            "steady_check",
            "--levels",
            "1",
            "--k",
            "1",
            "--tau",
            "0.25",
            "--postprocess",
            "--output",
            str(out),
        ]
    )
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    assert len(comments) >= 3
    assert any("newton_rtol" in c for c in comments)
    header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    assert lines[header_idx] == CSV_COLUMNS
    rows = [l for l in lines[header_idx + 1 :] if l]
    assert len(rows) == 1
    fields = rows[0].split(",")
    assert fields[0] == "steady_check"
    assert fields[5] == "1"  # level
    errors = [float(v) for v in fields[8:14] if v]
    assert len(errors) == 6
    assert max(errors) <= 1e-8
    assert (tmp_path / "steady.eoc.txt").exists()


def test_csv_is_deterministic(tmp_path):
    args = [
        "--case",
        "time_dominant",
        "--levels",
        "1",
        "--k",
        "1",
        "--tau",
        "0.5",
        "0.25",
    ]
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(args + ["--output", str(out_a)]) == EXIT_OK
    assert main(args + ["--output", str(out_b)]) == EXIT_OK
    assert out_a.read_bytes() == out_b.read_bytes()
    eoc_a = (tmp_path / "a.eoc.txt").read_text()
    assert "orders vs tau" in eoc_a


def test_eoc_table_for_spatial_study(tmp_path):
    out = tmp_path / "spatial.csv"
    config = StudyConfig(
        case="space_dominant",
        levels=[1, 2],
        taus=[0.5],
        output=str(out),
    )
    assert run_study(config) == EXIT_OK
    rows = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
    assert len(rows) == 1 + 2
    text = (tmp_path / "spatial.eoc.txt").read_text()
    assert "orders vs h" in text


def test_solver_failure_exit_3_with_partial_csv(tmp_path):
    out = tmp_path / "fail.csv"
    config = StudyConfig(
        case="time_dominant",
        levels=[1],
        taus=[0.5],
        output=str(out),
        newton=NewtonConfig(max_iter=1),
    )
    assert run_study(config) == EXIT_SOLVER
    text = out.read_text()
    assert CSV_COLUMNS in text  # header flushed before the failure


def test_postprocess_column_blank_when_off(tmp_path):
    out = tmp_path / "no_pp.csv"
    config = StudyConfig(case="steady_check", levels=[1], taus=[0.5], output=str(out))
    assert run_study(config) == EXIT_OK
    row = [l for l in out.read_text().splitlines() if l and not l.startswith("#")][1]
    assert row.endswith(",")


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(k=9)
    with pytest.raises(ValueError):
        StudyConfig(r=1)
    with pytest.raises(ValueError):
        StudyConfig(levels=[])
    with pytest.raises(ValueError):
        StudyConfig(threads=0)
    with pytest.raises(ValueError):
        StudyConfig(case="nope")


def test_reuse_jacobian_flag(tmp_path):
    assert parse_config([]).newton.reuse_jacobian is False
    config = parse_config(
        [
            "--case",
            "steady_check",
            "--levels",
            "1",
            "--tau",
            "0.5",
            "--reuse-jacobian",
            "--output",
            str(tmp_path / "r.csv"),
        ]
    )
    assert config.newton.reuse_jacobian is True
    assert run_study(config) == EXIT_OK
    assert "reuse_jacobian=1" in (tmp_path / "r.csv").read_text()
