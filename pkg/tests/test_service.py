import numpy as np
import pytest
from fastapi.testclient import TestClient

from fieldguide import matcher, pairs, synth
from fieldguide.corpus import strip_labels
from fieldguide.embed import HashedBowConfig, HashedBowProvider, build_store
from fieldguide.service import ModelSnapshot, build_app


@pytest.fixture(scope="module")
def snapshot():
    data = synth.generate(
        synth.SynthConfig(
            n_classes=6, images_per_class=20, captions_per_image=4,
            doc_synonym_rate=0.25, seed=3,
        )
    )
    provider = HashedBowProvider(HashedBowConfig(dim=128, seed=11))
    unlabeled = strip_labels(data.caption_sets)
    cap_store = build_store(
        ((k, c) for u in unlabeled for k, c in zip(u.caption_keys, u.captions)), provider
    )
    doc_store = build_store(data.corpus.iter_sentences(), provider)
    dataset = pairs.build_training_set(
        unlabeled, data.corpus, data.lexicon, pairs.PairGenConfig(seed=5, classes=3)
    )
    cfg = matcher.TrainConfig(
        epochs=8, reg_epochs=1, reg_weight=1.0, seed=7, classes=3,
        proj_dim=64, hidden_dim=64, batch_size=64, reg_image_batch=8,
    )
    params, _ = matcher.train(dataset, cap_store, doc_store, data.corpus, cfg, images=unlabeled)
    return ModelSnapshot(data.corpus, doc_store, provider, "fgsm", params), data


@pytest.fixture(scope="module")
def client(snapshot):
    snap, _ = snapshot
    return TestClient(build_app(snap))


class TestHealth:
    def test_ready(self, client, snapshot):
        _, data = snapshot
        body = client.get("/api/health").json()
        assert body["status"] == "ready"
        assert body["K"] == len(data.corpus)
        assert body["mode"] == "fgsm"

    def test_loading_before_init(self):
        bare = TestClient(build_app(None))
        assert bare.get("/api/health").json()["status"] == "loading"
        assert bare.post("/api/identify", json={"captions": ["a bird"]}).status_code == 503


class TestDocuments:
    def test_listing(self, client, snapshot):
        _, data = snapshot
        body = client.get("/api/documents").json()
        assert len(body) == len(data.corpus)
        assert {"doc_id", "class_name"} <= set(body[0])

    def test_detail(self, client, snapshot):
        _, data = snapshot
        doc = data.corpus.documents[0]
        body = client.get(f"/api/documents/{doc.doc_id}").json()
        assert body["sentences"] == list(doc.sentences)

    def test_unknown_404(self, client):
        assert client.get("/api/documents/nope").status_code == 404


class TestIdentify:
    def template_caption(self, data, doc_id):
        # Attribute-dense description: lists the whole signature.
        return ", ".join(f"{c} {p}" for p, c in data.signatures[doc_id])

    def test_top_k_equals_corpus_size(self, client, snapshot):
        _, data = snapshot
        body = client.post(
            "/api/identify",
            json={"captions": ["a bird with a red crown"], "top_k": len(data.corpus)},
        ).json()
        assert len(body["results"]) == len(data.corpus)
        assert body["model_info"]["K"] == len(data.corpus)

    def test_results_sorted_and_probs_bounded(self, client, snapshot):
        _, data = snapshot
        body = client.post(
            "/api/identify",
            json={"captions": [self.template_caption(data, "sp00")], "top_k": 6},
        ).json()
        zs = [r["z"] for r in body["results"]]
        assert zs == sorted(zs, reverse=True)
        assert sum(r["probability"] for r in body["results"]) <= 1.0 + 1e-9
        assert all(len(r["evidence"]) == 3 for r in body["results"])

    def test_identical_requests_identical_responses(self, client):
        req = {"captions": ["a small bird with a blue tail"], "top_k": 4}
        assert client.post("/api/identify", json=req).json() == client.post(
            "/api/identify", json=req
        ).json()

    def test_template_caption_ranks_its_class_first(self, client, snapshot):
        _, data = snapshot
        hits = 0
        for doc_id in data.corpus.doc_ids:
            body = client.post(
                "/api/identify",
                json={"captions": [self.template_caption(data, doc_id)], "top_k": 1},
            ).json()
            hits += body["results"][0]["doc_id"] == doc_id
        assert hits >= 5  # 6 classes; signature descriptions should win

    def test_mode_override(self, client):
        req = {"captions": ["a bird with a red crown"], "top_k": 3}
        for mode in ("cosine", "tfidf", "bm25"):
            body = client.post("/api/identify", json={**req, "mode": mode}).json()
            assert body["model_info"]["mode"] == mode
            assert len(body["results"]) == 3

    def test_empty_captions_rejected(self, client):
        assert client.post("/api/identify", json={"captions": []}).status_code == 422
        assert client.post("/api/identify", json={"captions": ["  "]}).status_code == 400

    def test_too_many_captions_rejected(self, client):
        req = {"captions": ["a bird"] * 17}
        assert client.post("/api/identify", json=req).status_code == 422

    def test_oversized_caption_rejected(self, client):
        req = {"captions": ["bird " * 200]}
        assert client.post("/api/identify", json=req).status_code == 400

    def test_latency_budget(self, client):
        import time

        req = {"captions": ["a bird with a red crown and a blue tail"] * 16, "top_k": 5}
        start = time.time()
        assert client.post("/api/identify", json=req).status_code == 200
        assert time.time() - start < 1.0

    def test_latency_budget_at_corpus_limit(self):
        # 500 documents x 12 sentences, 16 captions: the stated upper bound.
        import time

        from fieldguide.corpus import Corpus, Document
        from fieldguide.matcher import init_params

        rng = np.random.default_rng(0)
        words = ["red", "blue", "crown", "wing", "tail", "bird", "small", "pale"]
        docs = [
            Document.from_sentences(
                f"d{i:03d}", f"class {i}",
                [" ".join(rng.choice(words, 8)) for _ in range(12)],
            )
            for i in range(500)
        ]
        corpus = Corpus(docs)
        provider = HashedBowProvider(HashedBowConfig(dim=256, seed=11))
        doc_store = build_store(corpus.iter_sentences(), provider)
        snap = ModelSnapshot(
            corpus, doc_store, provider, "fgsm", init_params(256, 128, 128, 3, seed=1)
        )
        captions = ["a small bird with a red crown and a pale wing"] * 16
        snap.identify(captions, 5, "fgsm")  # warm-up
        start = time.time()
        snap.identify(captions, 5, "fgsm")
        assert time.time() - start < 1.0


class TestSessionLog:
    def test_opt_in_logging(self, snapshot, tmp_path):
        snap, _ = snapshot
        log = tmp_path / "sessions.jsonl"
        client = TestClient(build_app(snap, session_log=log))
        client.post("/api/identify", json={"captions": ["a bird"]})
        assert log.exists() and "captions" in log.read_text()

    def test_off_by_default(self, snapshot, tmp_path):
        snap, _ = snapshot
        client = TestClient(build_app(snap))
        client.post("/api/identify", json={"captions": ["a bird"]})
        assert not list(tmp_path.iterdir())
