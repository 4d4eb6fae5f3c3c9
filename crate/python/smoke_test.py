"""Smoke test for the `evidence` extension module.

Build and install first:

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import json
import math
import pathlib
import tempfile

import evidence

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def check_primitives():
    assert [evidence.letter_id(i) for i in (0, 25, 26, 701, 702)] == ["A", "Z", "AA", "ZZ", "AAA"]
    assert evidence.letter_index("AB") == 27
    assert evidence.letter_index("a1") is None
    assert evidence.premise_id("https://x.example/a", "B", "C", 2).endswith(":B:C:2")

    p = "The unemployment rate doubled in 2016, according to the Bureau of Labor Statistics."
    s = "The rate doubled in 2016"
    assert math.isclose(evidence.overlap(p, s), 5 / 13)
    assert evidence.dfs(0.8, evidence.overlap(p, p)) == 0.0
    assert evidence.tokenize("Hello, World!") == ["hello", "world"]

    index = evidence.Bm25Index([("d1", "jobs rose in the state"), ("d2", "taxes fell"), ("d3", "jobs jobs")])
    hits = index.search("jobs", 10)
    assert [h[0] for h in hits] == ["d3", "d1"], hits
    ranking = [h[0] for h in hits]
    assert evidence.reciprocal_rank(ranking, ["d1"], 10) == 0.5
    assert evidence.recall(ranking, ["d1", "d2"], 3) == 0.5
    assert math.isclose(evidence.ndcg(ranking, ["d1"], 3), 1 / math.log2(3))

    pairs = [("true", "false")] * 3 + [("false", "false")] * 7
    assert math.isclose(evidence.macro_f1(pairs, "binary"), (2 * 7 / 17) / 2)


def check_article():
    record = (FIXTURES / "articles.jsonl").read_text().splitlines()[0]
    article = evidence.Article.from_json(record)
    assert len(article.units) == 19
    assert [a.letter_id for a in article.anchors] == ["C", "F", "H", "Q"]
    assert [u.letter_id for u in article.units if u.is_verdict_sentence] == ["S"]
    for mode in ("A", "B", "C"):
        premises = article.extract(mode)
        assert 1 <= len(premises) <= 4, (mode, premises)
        assert all(p.mode == mode for p in premises)
        json.loads(premises[0].to_json())


def check_pipeline():
    with tempfile.TemporaryDirectory() as out:
        pipe = evidence.Pipeline(str(FIXTURES), out, overrides={"generation.backend": "stub"})
        stats = pipe.ingest()
        assert stats["anchors"] == 5, stats
        for mode in ("A", "B", "C"):
            assert not pipe.extract(mode)["threshold_exceeded"]
        run_id, aggregates = pipe.score("retrieval", "B")
        assert 0.0 <= aggregates["MRR@10"] <= 1.0
        _, dfs = pipe.score("dfs", "A")
        assert dfs["mean_DFS"] == 0.0
        pipe.set("verification.labels", "five")
        _, ver = pipe.score("verification", "C")
        assert 0.0 <= ver["macro_f1"] <= 1.0
        assert pipe.report([run_id]).startswith("retrieval")
    try:
        evidence.Pipeline(".", "out", overrides={"retrieval.b": "3"})
    except ValueError:
        pass
    else:
        raise AssertionError("invalid b accepted")


if __name__ == "__main__":
    check_primitives()
    check_article()
    check_pipeline()
    print("smoke test passed")
