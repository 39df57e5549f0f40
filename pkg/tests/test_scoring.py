import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fieldguide import scoring
from fieldguide.corpus import CaptionSet, Corpus, Document, UnlabeledCaptions
from fieldguide.embed import HashedBowConfig, HashedBowProvider, build_store
from fieldguide.errors import DataError
from fieldguide.matcher import init_params, zeros_like_params
from fieldguide.scoring import (
    DocScores,
    evidence,
    rank_scores,
    read_scores,
    score_corpus,
    score_document,
    write_scores,
)

DIM = 16
PROVIDER = HashedBowProvider(HashedBowConfig(dim=DIM, seed=5))


def make_world(doc_texts=None, n_docs=3):
    if doc_texts is None:
        doc_texts = [
            ["a bird with a red crown", "it winters on the coast"],
            ["a bird with a blue tail", "it lives in woods"],
            ["a green bird", "it eats seeds all year"],
        ][:n_docs]
    docs = [
        Document.from_sentences(f"d{i}", f"class {i}", sents)
        for i, sents in enumerate(doc_texts)
    ]
    corpus = Corpus(docs)
    doc_store = build_store(corpus.iter_sentences(), PROVIDER)
    caps = CaptionSet("im0", ("a small bird with a red crown", "the crown is red"))
    cap_store = build_store(
        zip(caps.caption_keys, caps.captions), PROVIDER
    )
    return corpus, doc_store, caps, cap_store


class TestScoreDocument:
    def test_constant_scorer_returns_constant(self):
        params = zeros_like_params(init_params(DIM, 4, 4, 3, seed=0))
        rng = np.random.default_rng(0)
        z = score_document(rng.normal(size=(2, DIM)), rng.normal(size=(5, DIM)), params)
        assert z == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_mean_of_fixed_pair_scores(self, monkeypatch):
        fixed = np.array([[0.9, 0.8, 0.1], [0.7, 0.6, 0.5]])
        monkeypatch.setattr(scoring, "_pair_scores", lambda pc, ps, params: fixed)
        params = init_params(DIM, 4, 4, 3, seed=0)
        z = score_document(np.zeros((2, DIM)), np.zeros((3, DIM)), params)
        assert z == pytest.approx(0.6, abs=1e-15)

    def test_sentence_order_invariant(self):
        params = init_params(DIM, 6, 6, 3, seed=1)
        rng = np.random.default_rng(2)
        caps, sents = rng.normal(size=(3, DIM)), rng.normal(size=(4, DIM))
        z1 = score_document(caps, sents, params)
        z2 = score_document(caps, sents[::-1], params)
        assert z1 == pytest.approx(z2, abs=1e-12)

    def test_empty_inputs_rejected(self):
        params = init_params(DIM, 4, 4, 3, seed=0)
        with pytest.raises(DataError):
            score_document([], np.zeros((1, DIM)), params)


class TestRankScores:
    def test_softmax_arithmetic(self):
        probs, ranking = rank_scores(np.array([math.log(2.0), 0.0]), ("a", "b"))
        assert probs == pytest.approx([2 / 3, 1 / 3], abs=1e-12)
        assert ranking == ("a", "b")

    def test_shift_invariance(self):
        z = np.array([0.11, 0.92, 0.47, 0.3])
        ids = ("a", "b", "c", "d")
        p1, r1 = rank_scores(z, ids)
        p2, r2 = rank_scores(z + 7.3, ids)
        assert np.max(np.abs(p1 - p2)) <= 1e-12
        assert r1 == r2

    def test_negate_reverses_ranking(self):
        z = np.array([0.9, 0.5, 0.1])
        _, forward = rank_scores(z, ("a", "b", "c"))
        _, backward = rank_scores(z, ("a", "b", "c"), negate_scores=True)
        assert forward == ("a", "b", "c") and backward == ("c", "b", "a")

    def test_ties_break_by_corpus_order(self):
        _, ranking = rank_scores(np.array([0.5, 0.7, 0.5]), ("a", "b", "c"))
        assert ranking == ("b", "a", "c")

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_probs_sum_to_one(self, zs):
        ids = tuple(f"d{i}" for i in range(len(zs)))
        probs, _ = rank_scores(np.array(zs), ids)
        assert abs(probs.sum() - 1.0) <= 1e-9
        assert np.all(probs >= 0)


class TestScoreCorpus:
    def test_constant_scorer_uniform(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = zeros_like_params(init_params(DIM, 4, 4, 3, seed=0))
        out = score_corpus(caps, corpus, cap_store, doc_store, params)
        assert out.probs == pytest.approx([1 / 3] * 3, abs=1e-12)
        assert out.ranking == corpus.doc_ids
        assert np.all((out.z >= 0) & (out.z <= 1))

    def test_duplicate_documents_equal_z(self):
        texts = [["a bird with a red crown", "same text"],
                 ["a bird with a red crown", "same text"],
                 ["something else entirely", "unrelated words"]]
        corpus, doc_store, caps, cap_store = make_world(texts)
        params = init_params(DIM, 6, 6, 3, seed=3)
        out = score_corpus(caps, corpus, cap_store, doc_store, params)
        assert out.z[0] == out.z[1]

    def test_fgsm_z_in_unit_interval(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM, 6, 6, 3, seed=4)
        out = score_corpus(caps, corpus, cap_store, doc_store, params)
        assert np.all((out.z >= 0) & (out.z <= 1))

    def test_corpus_permutation_consistency(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM, 6, 6, 3, seed=5)
        out1 = score_corpus(caps, corpus, cap_store, doc_store, params)
        permuted = Corpus([corpus.documents[i] for i in (2, 0, 1)])
        out2 = score_corpus(caps, permuted, cap_store, doc_store, params)
        for i, doc_id in enumerate(permuted.doc_ids):
            j = corpus.doc_ids.index(doc_id)
            assert out2.z[i] == pytest.approx(out1.z[j], abs=1e-12)
        assert out1.ranking == out2.ranking  # scores are distinct here

    def test_cosine_mode_matches_brute_force(self):
        corpus, doc_store, caps, cap_store = make_world()
        out = score_corpus(caps, corpus, cap_store, doc_store, None, mode="cosine")

        def cos(a, b):
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            return float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0

        for j, doc in enumerate(corpus.documents):
            expected = np.mean([
                cos(
                    cap_store.vector(ck).astype(np.float64),
                    doc_store.vector(sk).astype(np.float64),
                )
                for ck in caps.caption_keys
                for sk in doc.sentence_keys
            ])
            assert out.z[j] == pytest.approx(expected, abs=1e-9)
        assert list(out.ranking) == [
            corpus.doc_ids[i] for i in np.argsort(-out.z, kind="stable")
        ]

    def test_works_on_unlabeled_view(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM, 4, 4, 3, seed=0)
        view = UnlabeledCaptions(caps.image_id, caps.captions)
        out = score_corpus(view, corpus, cap_store, doc_store, params)
        assert isinstance(out, DocScores)

    def test_wrong_dim_checkpoint_rejected(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM + 1, 4, 4, 3, seed=0)
        with pytest.raises(DataError, match="dim"):
            score_corpus(caps, corpus, cap_store, doc_store, params)

    def test_missing_key_is_error(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM, 4, 4, 3, seed=0)
        other = CaptionSet("im-unknown", ("some caption",))
        with pytest.raises(DataError, match="missing embedding"):
            score_corpus(other, corpus, cap_store, doc_store, params)


class TestEvidence:
    def test_known_matrix_top_entries(self, monkeypatch):
        fixed = np.array([[0.2, 0.9, 0.4], [0.8, 0.1, 0.6]])
        monkeypatch.setattr(scoring, "_pair_scores", lambda pc, ps, params: fixed)
        corpus, doc_store, caps, cap_store = make_world(
            [["s0", "s1", "s2"], ["t0", "t1"]]
        )
        params = init_params(DIM, 4, 4, 3, seed=0)
        doc = corpus.get("d0")
        out = evidence(caps, doc, cap_store, doc_store, params, top_m=3)
        # brute-force oracle over the fixed matrix
        entries = sorted(
            ((caps.captions[i], doc.sentences[j], fixed[i, j])
             for i in range(2) for j in range(3)),
            key=lambda t: -t[2],
        )[:3]
        assert out == entries

    def test_top_m_exceeding_pairs_returns_all(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM, 4, 4, 3, seed=0)
        out = evidence(caps, corpus.get("d0"), cap_store, doc_store, params, top_m=100)
        assert len(out) == len(caps.captions) * len(corpus.get("d0").sentences)

    def test_constant_scorer_caption_major_order(self):
        corpus, doc_store, caps, cap_store = make_world()
        params = zeros_like_params(init_params(DIM, 4, 4, 3, seed=0))
        doc = corpus.get("d0")
        out = evidence(caps, doc, cap_store, doc_store, params, top_m=3)
        expected = [
            (caps.captions[0], doc.sentences[0], 1 / 3),
            (caps.captions[0], doc.sentences[1], 1 / 3),
            (caps.captions[1], doc.sentences[0], 1 / 3),
        ]
        assert [(c, s) for c, s, _ in out] == [(c, s) for c, s, _ in expected]


class TestScoresDump:
    def test_round_trip(self, tmp_path):
        corpus, doc_store, caps, cap_store = make_world()
        params = init_params(DIM, 4, 4, 3, seed=0)
        out = score_corpus(caps, corpus, cap_store, doc_store, params)
        path = tmp_path / "scores.jsonl"
        write_scores([out], path, method="fgsm")
        records = read_scores(path)
        assert records[0]["image_id"] == "im0"
        assert records[0]["method"] == "fgsm"
        assert tuple(records[0]["ranking"]) == out.ranking
        assert records[0]["z"] == [float(v) for v in out.z]
