import xml.etree.ElementTree as ET

import pytest

PAPER_FLOW = {
    "selection": {
        "items": [{"meta_analysis_id": "r-neuro:ma1", "subgroup_ids": ["r-neuro:ma1:children"]}],
        "target_group": "group2",
        "scale": "logrr",
        "overlay": [{"label": "Singh 2022", "dich": {"e1": 1, "n1": 19, "e2": 1, "n2": 20}}],
    },
    "classical": {"method": "fixed"},
}

BAYES_FLOW = {
    "selection": PAPER_FLOW["selection"],
    "bayesian": {
        "priors": {
            "effect": {"kind": "student_t", "location": 0, "scale": 0.58, "df": 5},
            "heterogeneity": "invgamma(1.74,0.27)",
        }
    },
}


class TestReviews:
    def test_keyword_filter_finds_fixture(self, client):
        r = client.get("/api/reviews", params={"mode": "keywords", "q": "albendazole"})
        assert r.status_code == 200
        body = r.json()
        assert [x["id"] for x in body] == ["r-neuro"]
        assert body[0]["title"] == "Anthelmintics for people with neurocysticercosis"
        assert body[0]["year"] == 2021

    def test_no_match_is_empty_200(self, client):
        r = client.get("/api/reviews", params={"mode": "keywords", "q": "zzz"})
        assert r.status_code == 200 and r.json() == []

    def test_invalid_mode_400_with_envelope(self, client):
        r = client.get("/api/reviews", params={"mode": "flavor", "q": "x"})
        assert r.status_code == 400
        err = r.json()["error"]
        assert err["code"] == "bad_mode" and "flavor" in err["message"]

    def test_title_mode_default(self, client):
        r = client.get("/api/reviews", params={"q": "NEUROCYSTICERCOSIS"})
        assert [x["id"] for x in r.json()] == ["r-neuro"]


class TestMetaAnalyses:
    def test_fixture_listing(self, client):
        r = client.get("/api/meta-analyses", params={"review_id": "r-neuro"})
        assert r.status_code == 200
        rows = r.json()
        seizure = next(x for x in rows if x["name"].startswith("Seizure recurrence"))
        assert [sg["name"] for sg in seizure["subgroups"]] == [
            "Adults (16 years old or older)",
            "Children (under 16 years old)",
        ]
        assert seizure["group2_label"] == "Albendazole"

    def test_missing_param_400(self, client):
        assert client.get("/api/meta-analyses").status_code == 400

    def test_unknown_id_404(self, client):
        r = client.get("/api/meta-analyses", params={"review_id": "r-none"})
        assert r.status_code == 404
        assert "r-none" in r.json()["error"]["message"]

    def test_order_deterministic(self, client):
        a = client.get("/api/meta-analyses", params={"review_id": "r-neuro"}).content
        b = client.get("/api/meta-analyses", params={"review_id": "r-neuro"}).content
        assert a == b


class TestAnalyze:
    def test_paper_flow_classical(self, client):
        r = client.post("/api/analyze", json=PAPER_FLOW)
        assert r.status_code == 200
        body = r.json()
        (block,) = body["study_sets"]
        assert block["k"] == 5
        assert block["group1_label"] == "Albendazole"
        labels = [e["label"] for e in block["estimates"]]
        assert labels[-1] == "Singh 2022"
        singh = block["estimates"][-1]
        assert singh["is_new"] is True
        assert singh["y"] == pytest.approx(0.0513, abs=1e-3)
        assert singh["ci_low"] == pytest.approx(-2.649, abs=0.01)
        assert singh["ci_high"] == pytest.approx(2.751, abs=0.01)
        pooled = block["classical"]["pooled"]
        assert pooled["k"] == 5 and pooled["p"] < 0.05
        assert body["plots"]["forest"] == "/api/plots/forest"

    def test_determinism_byte_equal(self, client):
        a = client.post("/api/analyze", json=PAPER_FLOW).content
        b = client.post("/api/analyze", json=PAPER_FLOW).content
        assert a == b

    def test_scale_kind_mismatch_422(self, client):
        bad = {
            "selection": {"items": [{"meta_analysis_id": "r-cbt:ma1"}], "scale": "logrr"},
            "classical": {"method": "fixed"},
        }
        r = client.post("/api/analyze", json=bad)
        assert r.status_code == 422
        assert r.json()["error"]["code"] == "validation"

    def test_empty_selection_422(self, client):
        bad = {
            "selection": {
                "items": [{"meta_analysis_id": "r-neuro:ma1", "subgroup_ids": []}],
                "scale": "logrr",
            },
            "classical": {"method": "fixed"},
        }
        assert client.post("/api/analyze", json=bad).status_code == 422

    def test_both_method_blocks_422(self, client):
        bad = dict(PAPER_FLOW)
        bad["bayesian"] = {}
        r = client.post("/api/analyze", json=bad)
        assert r.status_code == 422

    def test_unknown_field_422(self, client):
        bad = {**PAPER_FLOW, "surprise": 1}
        assert client.post("/api/analyze", json=bad).status_code == 422

    def test_unknown_ma_422_names_id(self, client):
        bad = {
            "selection": {"items": [{"meta_analysis_id": "nope"}]},
            "classical": {"method": "fixed"},
        }
        r = client.post("/api/analyze", json=bad)
        assert r.status_code == 422 and "nope" in r.json()["error"]["message"]

    def test_bayesian_flow(self, client):
        r = client.post("/api/analyze", json=BAYES_FLOW)
        assert r.status_code == 200
        bb = r.json()["study_sets"][0]["bayesian"]
        assert set(bb["log_marginals"]) == {"fixed_null", "fixed_alt", "random_null", "random_alt"}
        assert bb["bf"]["bf_inclusion"] > 0
        assert len(bb["densities"]["mu_averaged"]["grid"]) == 512
        probs = bb["posterior_model_probs"]
        assert sum(probs.values()) == pytest.approx(1.0, abs=1e-9)
        assert bb["priors"]["effect_label"].startswith("Student-t")

    def test_mh_method(self, client):
        req = {**PAPER_FLOW, "classical": {"method": "mh"}}
        r = client.post("/api/analyze", json=req)
        assert r.status_code == 200
        assert r.json()["study_sets"][0]["classical"]["pooled"]["method"] == "mh"

    def test_mh_with_precomputed_overlay_422(self, client):
        req = {
            "selection": {
                **PAPER_FLOW["selection"],
                "overlay": [{"label": "Pre", "est": {"y": 0.05, "se": 1.38, "scale": "logrr"}}],
            },
            "classical": {"method": "mh"},
        }
        r = client.post("/api/analyze", json=req)
        assert r.status_code == 422 and "Pre" in r.json()["error"]["message"]


class TestPlots:
    def test_forest_from_analysis_request(self, client):
        r = client.post("/api/plots/forest", json=PAPER_FLOW)
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("image/svg+xml")
        root = ET.fromstring(r.text)
        assert len(root.findall(".//{*}rect")) == 5
        assert len(root.findall(".//{*}polygon")) == 1
        accented = [e for e in root.findall(".//{*}rect") if "new-study" in e.get("class")]
        assert len(accented) == 1

    def test_funnel_from_analysis_request(self, client):
        r = client.post("/api/plots/funnel", json=PAPER_FLOW)
        assert r.status_code == 200
        assert len(ET.fromstring(r.text).findall(".//{*}circle")) == 5

    def test_density_without_bayesian_block_422(self, client):
        assert client.post("/api/plots/density", json=PAPER_FLOW).status_code == 422

    def test_density_from_bayes_request(self, client):
        r = client.post("/api/plots/density", json=BAYES_FLOW)
        assert r.status_code == 200
        classes = {p.get("class") for p in ET.fromstring(r.text).findall(".//{*}path")}
        assert {"prior-curve", "posterior-curve"} <= classes

    def test_malformed_body_422(self, client):
        assert client.post("/api/plots/forest", json={"rows": "nope"}).status_code == 422

    def test_direct_spec_body(self, client):
        spec = {
            "rows": [{"label": "A", "y": 0.1, "ci_low": -0.5, "ci_high": 0.7, "weight_pct": 100.0}],
            "pooled": {"y": 0.1, "ci_low": -0.5, "ci_high": 0.7, "method_label": "Fixed"},
            "scale": "logrr",
        }
        r = client.post("/api/plots/forest", json=spec)
        assert r.status_code == 200 and r.text.startswith("<?xml")

    def test_unknown_kind_404(self, client):
        assert client.post("/api/plots/pie", json={}).status_code == 404


class TestExport:
    def test_fixture_selection_csv(self, client):
        r = client.get(
            "/api/export.csv",
            params=[
                ("ma", "r-neuro:ma1"),
                ("subgroup", "r-neuro:ma1:children"),
                ("target", "group2"),
                ("scale", "logrr"),
                ("add", "Singh 2022:1/19,1/20"),
            ],
        )
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("text/csv")
        lines = r.text.strip().splitlines()
        assert len(lines) == 6  # header + 4 children studies + Singh
        assert lines[0] == "study,events_1,total_1,events_2,total_2"
        assert lines[-1] == "Singh 2022,1,19,1,20"

    def test_no_params_422(self, client):
        assert client.get("/api/export.csv").status_code == 422

    def test_reimport_round_trip(self, client, snapshot):
        from trialbench.dataset import (
            EffectScale,
            Selection,
            SelectionItem,
            Study,
            DichotomousCounts,
            resolve_selection,
            studies_from_csv,
        )

        r = client.get(
            "/api/export.csv",
            params=[
                ("ma", "r-neuro:ma1"),
                ("subgroup", "r-neuro:ma1:children"),
                ("target", "group2"),
                ("add", "Singh 2022:1/19,1/20"),
            ],
        )
        selection = Selection(
            items=(SelectionItem("r-neuro:ma1", ("r-neuro:ma1:children",)),),
            target_group="group2",
            overlay=(Study("Singh 2022", DichotomousCounts(1, 19, 1, 20)),),
        )
        (ss,) = resolve_selection(snapshot, selection)
        assert studies_from_csv(r.text) == list(ss.studies)


def test_admin_reload(client):
    r = client.post("/api/admin/reload")
    assert r.status_code == 200
    assert r.json() == {"reviews": 3, "meta_analyses": 4, "studies": 15}


def test_export_unclaimed_subgroup_422(client):
    r = client.get(
        "/api/export.csv",
        params=[("ma", "r-neuro:ma2"), ("subgroup", "r-neuro:ma1:children")],
    )
    assert r.status_code == 422
    assert "r-neuro:ma1:children" in r.json()["error"]["message"]


def test_export_whole_ma_without_subgroups(client):
    r = client.get("/api/export.csv", params=[("ma", "r-neuro:ma2")])
    assert r.status_code == 200
    assert len(r.text.strip().splitlines()) == 4  # header + 3 studies
