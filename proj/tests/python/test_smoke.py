import json
import os
import pathlib
import random

import pytest

import kara

FIXTURES = pathlib.Path(os.environ.get("KARA_FIXTURE_DIR", pathlib.Path(__file__).parents[1] / "fixtures"))


@pytest.fixture(scope="module")
def case_study():
    return json.loads((FIXTURES / "case_study.json").read_text())


def rows(doc):
    return {c["id"]: c for c in doc["characterizations"]}


def test_one_hot_rows_and_similarity(case_study):
    q = case_study["questionnaires"][0]
    r = rows(case_study)
    a = kara.encode_one_hot(r["A"], q)
    e = kara.encode_one_hot(r["E"], q)
    assert a["bits"] == [1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0]
    assert a["layout_id"].startswith("trap-q@")
    assert kara.similarity(a, e) == 0.75


def test_closure_and_contradiction():
    rels = [{"a": "x", "b": "y", "relation": "lt"}, {"a": "y", "b": "z", "relation": "lt"}]
    closure = kara.infer_closure(rels)
    assert {"a": "x", "b": "z", "relation": "lt"} in closure
    with pytest.raises(kara.KaraError) as err:
        kara.infer_closure(rels + [{"a": "z", "b": "x", "relation": "lt"}])
    assert err.value.code == "contradiction"
    assert err.value.details["witness"]


def test_calibration_worked_instance():
    s = kara.calibrate({"ids": ["a", "b"], "reference": {"a": 0.5, "b": 0.5}, "gt": [["a", "b"]], "eq": [], "t": 0.1})
    assert s["objective"] == 0.1
    assert s["scores"]["a"] - s["scores"]["b"] >= 0.1 - 1e-9


def test_infeasible_chain():
    ids = [f"c{i:02d}" for i in range(12)]
    problem = {
        "ids": ids,
        "reference": {i: 0.5 for i in ids},
        "gt": [[ids[i + 1], ids[i]] for i in range(11)],
        "eq": [],
        "t": 0.1,
    }
    with pytest.raises(kara.KaraError) as err:
        kara.calibrate(problem)
    assert err.value.code == "infeasible_chain"
    assert err.value.details["chain"]["length"] == 11


def test_consensus_matches_brute_force():
    rng = random.Random(11)
    for _ in range(25):
        n = rng.randint(2, 5)
        ids = [f"p{i}" for i in range(n)]
        pairs = []
        for i in range(n):
            for j in range(i + 1, n):
                le_ab, le_ba = rng.randint(0, 3), rng.randint(0, 3)
                eq = rng.randint(0, min(le_ab, le_ba))
                pairs.append({"a": ids[i], "b": ids[j], "w_le_ab": le_ab, "w_le_ba": le_ba, "w_eq": eq})
        weights = {"ids": ids, "pairs": pairs}
        assert kara.solve_consensus(weights)["objective"] == kara.brute_force_consensus(weights)["objective"]


def test_region_contract():
    assert not kara.validate_pos(1.0, 0.5)["accepted"]
    assert kara.validate_pos(0.3, 0.5)["accepted"]
    verdict = kara.validate_pos(1.0, 0.5)
    assert any(lo <= verdict["nearest"] <= hi for lo, hi in kara.allowed_intervals(1.0))


def test_reference_model_is_deterministic(case_study):
    q = case_study["questionnaires"][0]
    examples = []
    for i, c in enumerate(case_study["characterizations"]):
        v = kara.encode_one_hot(c, q)
        examples.append({"characterization_id": c["id"], "vector": v["bits"], "lok": 0.1 * (i + 1)})
    first = kara.train_reference_model(examples)
    second = kara.train_reference_model(examples)
    assert first == second
    assert first["training_size"] == len(examples)
    assert first["selected"] is False
