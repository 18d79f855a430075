import json

import pytest

from trialbench import cli
from trialbench.errors import QuadratureError

RM5 = """
<COCHRANE_REVIEW ID="rev-x" YEAR="2019">
  <COVER_SHEET><TITLE>Example review</TITLE><KEYWORD>Aspirin</KEYWORD></COVER_SHEET>
  <DICH_OUTCOME NAME="Mortality" GROUP_LABEL_1="Aspirin" GROUP_LABEL_2="Placebo">
    <DICH_DATA STUDY_ID="A 2001" EVENTS_1="3" TOTAL_1="50" EVENTS_2="6" TOTAL_2="48"/>
    <DICH_DATA STUDY_ID="B 2005" EVENTS_1="5" TOTAL_1="60" EVENTS_2="9" TOTAL_2="55"/>
  </DICH_OUTCOME>
</COCHRANE_REVIEW>
"""

ANALYZE_ARGS = [
    "analyze",
    "--ma", "r-neuro:ma1",
    "--subgroup", "r-neuro:ma1:children",
    "--target", "group2",
    "--scale", "logrr",
    "--method", "fixed",
]


def test_unknown_subcommand_exits_1(capsys):
    assert cli.main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_db_is_data_error(monkeypatch, capsys):
    monkeypatch.delenv("WORKBENCH_DB", raising=False)
    assert cli.main(["search", "--title", "x"]) == 2
    assert "WORKBENCH_DB" in capsys.readouterr().err


def test_ingest_then_search(tmp_path, capsys):
    xml = tmp_path / "rev.xml"
    xml.write_text(RM5)
    out = tmp_path / "db.jsonl"
    assert cli.main(["ingest", str(xml), "-o", str(out)]) == 0
    assert "1 review(s), 1 meta-analyses, 2 studies" in capsys.readouterr().out
    assert cli.main(["search", "--db", str(out), "--keywords", "aspirin"]) == 0
    assert "Example review" in capsys.readouterr().out


def test_env_var_db(monkeypatch, db_path, capsys):
    monkeypatch.setenv("WORKBENCH_DB", str(db_path))
    assert cli.main(["search", "--title", "neurocysticercosis"]) == 0
    assert "r-neuro" in capsys.readouterr().out


def test_show_ma(db_path, capsys):
    assert cli.main(["show", "--db", str(db_path), "--ma", "r-neuro:ma1"]) == 0
    out = capsys.readouterr().out
    assert "Children (under 16 years old)" in out
    assert "Carter 1999: 9/30 vs 3/28" in out


def test_analyze_prints_tables(db_path, capsys):
    assert cli.main(ANALYZE_ARGS + ["--db", str(db_path)]) == 0
    out = capsys.readouterr().out
    assert "Pooled (fixed):" in out
    assert "Transformed (risk ratio (RR)):" in out
    assert "Heterogeneity: Q =" in out
    assert "z = " in out and "p " in out


def test_analyze_add_singh_appears(db_path, capsys):
    args = ANALYZE_ARGS + ["--db", str(db_path), "--add", "Singh 2022:1/19,1/20"]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert "Singh 2022" in out and "*new*" in out
    assert out.count("\n  Carter") == 1


def test_json_matches_service_response(db_path, client, capsys):
    args = ANALYZE_ARGS + ["--db", str(db_path), "--add", "Singh 2022:1/19,1/20", "--json"]
    assert cli.main(args) == 0
    got = json.loads(capsys.readouterr().out)
    want = client.post(
        "/api/analyze",
        json={
            "selection": {
                "items": [{"meta_analysis_id": "r-neuro:ma1", "subgroup_ids": ["r-neuro:ma1:children"]}],
                "target_group": "group2",
                "pooled": False,
                "scale": "logrr",
                "overlay": [{"label": "Singh 2022", "dich": {"e1": 1, "n1": 19, "e2": 1, "n2": 20}}],
            },
            "classical": {"method": "fixed"},
        },
    ).json()
    assert got == want


def test_outputs_written(db_path, tmp_path, capsys):
    csv_file = tmp_path / "out.csv"
    forest = tmp_path / "forest.svg"
    funnel = tmp_path / "funnel.svg"
    args = ANALYZE_ARGS + [
        "--db", str(db_path),
        "--add", "Singh 2022:1/19,1/20",
        "--csv", str(csv_file),
        "--forest", str(forest),
        "--funnel", str(funnel),
    ]
    assert cli.main(args) == 0
    assert len(csv_file.read_text().strip().splitlines()) == 6
    assert forest.read_text().startswith("<?xml")
    assert funnel.read_text().startswith("<?xml")


def test_bayes_command(db_path, tmp_path, capsys):
    density = tmp_path / "density.svg"
    args = [
        "bayes",
        "--db", str(db_path),
        "--ma", "r-neuro:ma1",
        "--subgroup", "r-neuro:ma1:children",
        "--target", "group2",
        "--scale", "logrr",
        "--prior-mu", "t(0,0.58,5)",
        "--prior-tau", "invgamma(1.74,0.27)",
        "--density", str(density),
    ]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert "BF inclusion" in out and "mu averaged" in out
    assert "Student-t(location = 0, scale = 0.58, df = 5)" in out
    assert density.read_text().startswith("<?xml")


def test_bad_scale_exits_2(db_path, capsys):
    args = ["analyze", "--db", str(db_path), "--ma", "r-neuro:ma1", "--scale", "bogus"]
    assert cli.main(args) == 2
    assert "bogus" in capsys.readouterr().err


def test_numerical_failure_exits_3(db_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise QuadratureError("did not converge", error_estimate=0.5)

    monkeypatch.setattr(cli.service, "run_analysis", boom)
    args = ["bayes", "--db", str(db_path), "--ma", "r-neuro:ma1"]
    assert cli.main(args) == 3
    assert "did not converge" in capsys.readouterr().err


def test_pooled_flag(db_path, capsys):
    args = [
        "analyze", "--db", str(db_path),
        "--ma", "r-neuro:ma1", "--ma", "r-neuro:ma2",
        "--pooled", "--scale", "logor",
    ]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert "k = 9" in out
