import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from asdkit.evaluation import ExperimentManifest, run_experiment
from asdkit.pipeline import FrozenPipeline
from asdkit.service import create_app, load_model_dir, request_to_table
from asdkit.sources import load_dataset


@pytest.fixture(scope="module")
def children_lr_artifact(tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts") / "children-lr"
    manifest = ExperimentManifest(
        dataset="children",
        model="logistic_regression",
        params="table4",
        drop_leaky=True,
        seed=1,
    )
    result = run_experiment(manifest, out_dir=out)
    return out, result


@pytest.fixture(scope="module")
def client(children_lr_artifact):
    out, _ = children_lr_artifact
    app = create_app([out])
    return TestClient(app)


def row_to_request(table, row_idx):
    """Build the JSON payload for one raw dataset row."""
    schema = table.schema
    row = table.rows[row_idx]

    def cell(name):
        return row[schema.index(name)]

    payload = {f"a{i}": int(float(cell(f"A{i}_Score"))) for i in range(1, 11)}
    payload["age"] = float(cell("age")) if not repr(cell("age")) == "MISSING" else 5.0
    for field, attr in (
        ("gender", "gender"),
        ("ethnicity", "ethnicity"),
        ("jaundice", "jundice"),
        ("family_autism", "austim"),
        ("country", "contry_of_res"),
        ("used_app_before", "used_app_before"),
        ("relation", "relation"),
    ):
        v = cell(attr)
        if repr(v) != "MISSING":
            payload[field] = v
    return payload


class TestEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_models_list(self, client, children_lr_artifact):
        out, result = children_lr_artifact
        r = client.get("/models")
        assert r.status_code == 200
        models = r.json()
        assert len(models) == 1
        assert models[0]["model_id"] == "children-lr"
        assert models[0]["kind"] == "logistic_regression"
        # accuracy passes straight through from the persisted report
        stored = json.loads((out / "report.json").read_text())
        assert models[0]["accuracy"] == stored["metrics"]["accuracy"]

    def test_screen_validation_rejects_bad_score(self, client):
        payload = {f"a{i}": 0 for i in range(1, 11)}
        payload.update({"a1": 2, "age": 7})
        r = client.post("/screen", json=payload)
        assert r.status_code == 422  # schema validation failure

    def test_screen_requires_positive_age(self, client):
        payload = {f"a{i}": 1 for i in range(1, 11)}
        payload["age"] = 0
        r = client.post("/screen", json=payload)
        assert r.status_code == 422

    def test_probabilities_sum_to_one(self, client):
        payload = {f"a{i}": 1 for i in range(1, 11)}
        payload["age"] = 7
        r = client.post("/screen", json=payload)
        assert r.status_code == 200
        body = r.json()
        assert body["asd_probability"] + body["non_asd_probability"] == pytest.approx(
            1.0, abs=1e-9
        )
        assert body["aq10_sum"] == 10

    def test_label_consistent_with_threshold(self, client):
        payload = {f"a{i}": 1 for i in range(1, 11)}
        payload["age"] = 7
        body = client.post("/screen", json=payload).json()
        expected = "ASD" if body["asd_probability"] >= 0.5 else "non-ASD"
        assert body["predicted_label"] == expected

    def test_no_model_gives_503(self):
        app = create_app([])
        bare = TestClient(app)
        payload = {f"a{i}": 0 for i in range(1, 11)}
        payload["age"] = 5
        assert bare.post("/screen", json=payload).status_code == 503

    def test_unseen_country_accepted(self, client):
        payload = {f"a{i}": 1 for i in range(1, 11)}
        payload.update({"age": 9, "country": "Atlantis"})
        r = client.post("/screen", json=payload)
        assert r.status_code == 200

    def test_identical_payload_identical_answer(self, client):
        payload = {f"a{i}": i % 2 for i in range(1, 11)}
        payload["age"] = 6
        a = client.post("/screen", json=payload).json()
        b = client.post("/screen", json=payload).json()
        assert a == b


class TestOfflineParity:
    def test_screen_matches_offline_predict_proba(self, client, children_lr_artifact):
        """Golden parity: the service answer equals the offline pipeline's
        probability on the identically encoded row, bit exact."""
        out, result = children_lr_artifact
        table = load_dataset("children")
        # a strongly positive raw row: all ten answers present and positive
        idx = next(
            i
            for i, row in enumerate(table.rows)
            if sum(float(row[j]) for j in range(10)) == 10
        )
        payload = row_to_request(table, idx)
        body = client.post("/screen", json=payload).json()

        lm = load_model_dir(out)
        one_row = request_to_table(
            __import__("asdkit.service", fromlist=["ScreeningRequest"]).ScreeningRequest(**payload),
            lm.pipeline,
        )
        m = lm.pipeline.transform_table(one_row, on_unseen="zeros")
        offline = lm.model.predict_proba(m.x)[0]
        assert body["asd_probability"] == offline[1]
        assert body["non_asd_probability"] == offline[0]
        assert body["asd_probability"] > 0.5

    def test_pipeline_json_round_trip(self, children_lr_artifact):
        out, result = children_lr_artifact
        doc = json.loads((out / "pipeline.json").read_text())
        pipe = FrozenPipeline.from_dict(doc)
        assert pipe.content_hash == result.pipeline.content_hash
        table = load_dataset("children")
        a = result.pipeline.transform_table(table)
        b = pipe.transform_table(table)
        assert np.array_equal(a.x.a, b.x.a)

    def test_model_pipeline_hash_cross_checked(self, children_lr_artifact, tmp_path):
        out, _ = children_lr_artifact
        target = tmp_path / "broken"
        target.mkdir()
        for name in ("model.json", "pipeline.json", "report.json"):
            (target / name).write_text((out / name).read_text())
        doc = json.loads((target / "pipeline.json").read_text())
        doc["impute_strategy"] = "knn"
        (target / "pipeline.json").write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="hash mismatch"):
            load_model_dir(target)
