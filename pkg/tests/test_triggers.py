"""Trigger model: pooling, joint loss gradients, matching, majority vote."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explanno.core import tokenize
from explanno.embeddings import EmbeddingTable, toy_table
from explanno.triggers import (
    UNK,
    DegenerateTriggerDataError,
    TriggerExample,
    TriggerModel,
    build_entries,
    calibrate_threshold,
    encode,
    joint_loss,
    majority_vote,
    soft_match,
    train,
    trigger_aware_labels,
)


def tiny_model(labels=("A", "B"), dim=4, seed=1):
    base = EmbeddingTable({
        "alpha": np.array([1.0, 0.0, 0.0, 0.0][:dim]),
        "beta": np.array([0.0, 1.0, 0.0, 0.0][:dim]),
        "gamma": np.array([0.5, 0.5, 0.0, 0.0][:dim]),
        "delta": np.array([0.0, 0.0, 1.0, 0.0][:dim]),
    })
    return TriggerModel.create(base, labels=labels, seed=seed)


class TestEncode:
    def test_single_token_is_its_embedding(self):
        m = tiny_model()
        assert np.allclose(encode(["alpha"], m), m.emb["alpha"])

    def test_identical_tokens_pool_to_same_vector(self):
        m = tiny_model()
        assert np.allclose(encode(["beta", "beta", "beta"], m), m.emb["beta"])

    def test_three_token_case_matches_hand_softmax(self):
        m = tiny_model()
        m.attention = np.array([1.0, 0.0, 0.0, 0.0])
        tokens = ["alpha", "beta", "gamma"]
        # oracle: softmax over raw dot products, then the weighted sum,
        # written out longhand
        dots = [1.0, 0.0, 0.5]
        exps = [math.exp(v) for v in dots]
        total = sum(exps)
        weights = [e / total for e in exps]
        expected = np.zeros(4)
        for w, tok in zip(weights, tokens):
            expected += w * m.emb[tok]
        assert np.allclose(encode(tokens, m), expected)

    def test_oov_uses_unknown_vector(self):
        m = tiny_model()
        m.emb[UNK] = np.array([9.0, 0.0, 0.0, 0.0])
        assert np.allclose(encode(["neverseen"], m), m.emb[UNK])


class TestJointLoss:
    def test_matched_coincident_pair_leaves_only_nll(self):
        m = tiny_model()
        batch = [(("alpha",), ("alpha",), "A", True)]  # d = 0
        loss, _ = joint_loss(batch, m)
        z = m.W @ m.emb["alpha"] + m.b
        p = np.exp(z - z.max())
        p = p / p.sum()
        assert loss == pytest.approx(0.5 * -math.log(p[0]))

    def test_unmatched_pair_beyond_margin_contributes_nothing(self):
        m = tiny_model()
        m.emb["alpha"] = np.array([5.0, 0.0, 0.0, 0.0])
        m.emb["beta"] = np.array([-5.0, 0.0, 0.0, 0.0])
        base = [(("alpha",), ("alpha",), "A", True)]
        with_far = base + [(("alpha",), ("beta",), "A", False)]
        l_base, _ = joint_loss(base, m)
        l_far, _ = joint_loss(with_far, m)
        # second item adds its own NLL term but zero contrastive term
        z = m.W @ m.emb["alpha"] + m.b
        p = np.exp(z - z.max())
        p = p / p.sum()
        assert l_far == pytest.approx(0.5 * -math.log(p[0]) + 0.5 * 0.0)
        assert l_base == pytest.approx(l_far)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            joint_loss([], tiny_model())


def _flatten_params(model):
    """(getter, setter) pairs for every scalar parameter."""
    out = []
    for key in sorted(model.emb):
        for i in range(model.dim):
            out.append(("emb", key, i))
    for i in range(model.dim):
        out.append(("attention", None, i))
    for r in range(model.W.shape[0]):
        for c in range(model.W.shape[1]):
            out.append(("W", r, c))
    for i in range(model.b.shape[0]):
        out.append(("b", None, i))
    return out


def _get(model, spec):
    kind, a, b = spec
    if kind == "emb":
        return model.emb[a][b]
    if kind == "attention":
        return model.attention[b]
    if kind == "W":
        return model.W[a][b]
    return model.b[b]


def _set(model, spec, value):
    kind, a, b = spec
    if kind == "emb":
        model.emb[a][b] = value
    elif kind == "attention":
        model.attention[b] = value
    elif kind == "W":
        model.W[a][b] = value
    else:
        model.b[b] = value


def _analytic(grads, spec):
    kind, a, b = spec
    if kind == "emb":
        row = grads.emb.get(a)
        return 0.0 if row is None else row[b]
    if kind == "attention":
        return grads.attention[b]
    if kind == "W":
        return grads.W[a][b]
    return grads.b[b]


def random_config(rng):
    """A small random model + batch staying clear of hinge kinks."""
    dim = 4
    vocab = {f"w{i}": rng.normal(size=dim) for i in range(6)}
    base = EmbeddingTable(vocab)
    model = TriggerModel.create(base, labels=("A", "B"),
                                seed=int(rng.integers(10_000)))
    model.attention = rng.normal(scale=0.5, size=dim)
    model.b = rng.normal(scale=0.1, size=2)
    words = sorted(vocab) + ["oovword"]
    while True:
        batch = []
        for _ in range(int(rng.integers(2, 4))):
            t = tuple(rng.choice(words, size=int(rng.integers(1, 3))))
            s = tuple(rng.choice(words, size=int(rng.integers(1, 4))))
            label = "A" if rng.random() < 0.5 else "B"
            matched = bool(rng.random() < 0.5)
            batch.append((t, s, label, matched))
        ok = True
        for t, s, label, matched in batch:
            d = float(np.linalg.norm(encode(list(t), model) - encode(list(s), model)))
            if not matched and (abs(d - model.margin) < 1e-3 or d < 1e-3):
                ok = False  # too close to a hinge kink for finite differences
        if ok:
            return model, batch


def finite_difference_check(model, batch, h=1e-6, tol=1e-4):
    _, grads = joint_loss(batch, model)
    failures = []
    for spec in _flatten_params(model):
        orig = _get(model, spec)
        _set(model, spec, orig + h)
        up, _ = joint_loss(batch, model)
        _set(model, spec, orig - h)
        down, _ = joint_loss(batch, model)
        _set(model, spec, orig)
        fd = (up - down) / (2 * h)
        an = _analytic(grads, spec)
        denom = max(1.0, abs(fd), abs(an))
        if abs(fd - an) / denom > tol:
            failures.append((spec, fd, an))
    return failures


class TestGradients:
    def test_analytic_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(6):
            model, batch = random_config(rng)
            failures = finite_difference_check(model, batch)
            assert failures == [], failures[:3]


def cluster_examples():
    """Two well-separated toy clusters in the bundled vector space."""
    rest = [
        TriggerExample(("had", "lunch", "at"), ("we", "had", "lunch", "at", "the", "cafe"), "REST"),
        TriggerExample(("where", "the", "food"), ("where", "the", "food", "is", "cheap"), "REST"),
        TriggerExample(("the", "meal", "was"), ("the", "meal", "was", "tasty"), "REST"),
        TriggerExample(("dinner", "at"), ("we", "had", "dinner", "at", "a", "diner"), "REST"),
    ]
    mov = [
        TriggerExample(("watched", "the", "movie"), ("we", "watched", "the", "movie", "at", "home"), "MOV"),
        TriggerExample(("the", "plot", "was"), ("the", "plot", "was", "awful"), "MOV"),
        TriggerExample(("the", "actor", "was"), ("the", "actor", "was", "amazing"), "MOV"),
        TriggerExample(("film", "was"), ("this", "film", "was", "wonderful"), "MOV"),
    ]
    return rest + mov


def matched_unmatched_distances(examples, model):
    matched, unmatched = [], []
    for ex in examples:
        t = encode(list(ex.trigger_tokens), model)
        for other in examples:
            u = encode(list(other.sentence_tokens), model)
            d = float(np.linalg.norm(t - u))
            (matched if other.label == ex.label else unmatched).append(d)
    return float(np.mean(matched)), float(np.mean(unmatched))


class TestTraining:
    def test_zero_epochs_is_identity(self):
        examples = cluster_examples()
        model = TriggerModel.create(toy_table(), labels=("REST", "MOV"), seed=3)
        before = model.to_dict()
        history = train(examples, model, epochs=0)
        assert model.to_dict() == before
        assert len(history) == 1

    def test_single_label_is_degenerate(self):
        examples = [e for e in cluster_examples() if e.label == "REST"]
        model = TriggerModel.create(toy_table(), labels=("REST", "MOV"))
        with pytest.raises(DegenerateTriggerDataError):
            train(examples, model)

    def test_clusters_separate_and_loss_improves(self):
        examples = cluster_examples()
        model = TriggerModel.create(toy_table(), labels=("REST", "MOV"), seed=3)
        history = train(examples, model, epochs=40, lr=0.05, seed=11)
        assert history[-1] <= history[0] or min(history) <= history[0]
        m_dist, u_dist = matched_unmatched_distances(examples, model)
        assert m_dist < u_dist

    def test_loss_curve_non_increasing_after_smoothing(self):
        examples = cluster_examples()
        model = TriggerModel.create(toy_table(), labels=("REST", "MOV"), seed=3)
        history = train(examples, model, epochs=50, lr=0.05, seed=11)
        window = 5
        smoothed = [float(np.mean(history[i:i + window]))
                    for i in range(len(history) - window + 1)]
        for earlier, later in zip(smoothed, smoothed[1:]):
            assert later <= earlier + 1e-6


class TestSoftMatch:
    def setup_method(self):
        self.examples = cluster_examples()
        self.model = TriggerModel.create(toy_table(), labels=("REST", "MOV"), seed=3)
        train(self.examples, self.model, epochs=40, lr=0.05, seed=11)
        self.entries = build_entries(self.examples, self.model)

    def test_threshold_zero_only_coincident(self):
        self.model.similarity_threshold = 0.0
        sent = list(self.entries[0].tokens)  # sentence = the trigger itself
        got = soft_match(sent, self.entries, self.model)
        assert all(np.allclose(encode(sent, self.model), e.vector) for e in got)

    def test_infinite_threshold_sorts_by_distance(self):
        self.model.similarity_threshold = float("inf")
        sent = tokenize("we had lunch at the cafe")
        got = soft_match(sent, self.entries, self.model)
        assert len(got) == len(self.entries)
        sv = encode(list(sent.lowers), self.model)
        brute = sorted(self.entries,
                       key=lambda e: (float(np.linalg.norm(e.vector - sv)), e.trigger_id))
        assert [e.trigger_id for e in got] == [e.trigger_id for e in brute]

    def test_restaurant_triggers_pass_on_similar_sentence(self):
        calibrate_threshold(self.examples, self.model, percentile=80.0)
        sent = tokenize("I had a dinner at McDonalds, where the food is cheap")
        got = soft_match(sent, self.entries, self.model)
        passing_tokens = {" ".join(e.tokens) for e in got}
        assert "had lunch at" in passing_tokens
        assert "where the food" in passing_tokens

    def test_raising_threshold_never_removes_matches(self):
        sent = tokenize("we had lunch at the cafe")
        self.model.similarity_threshold = 0.4
        low = {e.trigger_id for e in soft_match(sent, self.entries, self.model)}
        self.model.similarity_threshold = 0.9
        high = {e.trigger_id for e in soft_match(sent, self.entries, self.model)}
        assert low <= high


class TestMajorityVote:
    def test_examples_from_contract(self):
        assert majority_vote([["B-REST", "O"], ["B-REST", "O"], ["O", "O"]]) == ["B-REST", "O"]
        assert majority_vote([["B-REST", "O"], ["B-LOC", "O"]]) == ["O", "O"]
        assert majority_vote([["B-REST", "O"]]) == ["B-REST", "O"]

    @given(st.lists(st.lists(st.sampled_from(["B-A", "I-A", "B-B", "O"]),
                             min_size=3, max_size=3), min_size=1, max_size=5),
           st.randoms())
    @settings(max_examples=40)
    def test_permutation_invariant(self, seqs, rnd):
        shuffled = list(seqs)
        rnd.shuffle(shuffled)
        assert majority_vote(seqs) == majority_vote(shuffled)

    def test_ragged_input_rejected(self):
        with pytest.raises(ValueError):
            majority_vote([["O"], ["O", "O"]])


class StubLabeler:
    """Marks the highest-weighted position B-REST; everything else O."""

    def decode(self, sentence, token_weights=None):
        n = len(sentence.tokens) if hasattr(sentence, "tokens") else len(sentence)
        if token_weights is None:
            return ["O"] * n
        top = int(np.argmax(token_weights))
        return ["B-REST" if i == top else "O" for i in range(n)]


class TestTriggerAwareLabels:
    def setup_method(self):
        self.examples = cluster_examples()
        self.model = TriggerModel.create(toy_table(), labels=("REST", "MOV"), seed=3)
        train(self.examples, self.model, epochs=30, lr=0.05, seed=11)
        self.entries = build_entries(self.examples, self.model)

    def test_single_trigger_vote_is_verbatim(self):
        sent = tokenize("we had lunch at the cafe")
        voted, prov = trigger_aware_labels(sent, self.entries[:1], StubLabeler(), self.model)
        assert voted == prov[0][1]
        assert prov[0][0] == self.entries[0].trigger_id

    def test_no_triggers_rejected(self):
        with pytest.raises(ValueError):
            trigger_aware_labels(tokenize("hi there"), [], StubLabeler(), self.model)

    def test_labels_stay_in_schema_plus_outside(self):
        sent = tokenize("we had lunch at the cafe where the food is cheap")
        voted, _ = trigger_aware_labels(sent, self.entries, StubLabeler(), self.model)
        assert set(voted) <= {"B-REST", "I-REST", "O"}
        assert len(voted) == len(sent.tokens)


class TestSerialization:
    def test_round_trip_preserves_behavior(self, tmp_path):
        model = TriggerModel.create(toy_table(), labels=("REST", "MOV"), seed=3)
        train(cluster_examples(), model, epochs=5, seed=2)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = TriggerModel.load(path)
        sent = ["we", "had", "lunch", "at", "the", "cafe"]
        assert np.allclose(encode(sent, model), encode(sent, loaded))
        assert loaded.similarity_threshold == model.similarity_threshold
        assert loaded.labels == model.labels

    def test_version_mismatch_rejected(self):
        model = tiny_model()
        data = model.to_dict()
        data["version"] = 99
        with pytest.raises(ValueError):
            TriggerModel.from_dict(data)
