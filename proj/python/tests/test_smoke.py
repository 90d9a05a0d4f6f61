import math

import pytest

import cdl


@pytest.fixture(scope="module")
def data():
    return cdl.Dataset.synthetic(pairs=120, vocab=60, seed=3)


def test_synthetic_dataset(data):
    train = data.pairs("train")
    assert len(train) + len(data.pairs("valid")) + len(data.pairs("test")) == 120
    first = train[0]
    assert set(first) == {"query", "q_emotion", "response", "r_emotion"}
    assert 3 <= len(first["query"]) <= 30
    assert data.vocab[:4] == ["<pad>", "<s>", "</s>", "<unk>"]
    assert "Neutral" not in data.lexicon
    assert len(data.lexicon) == 5
    again = cdl.Dataset.synthetic(pairs=120, vocab=60, seed=3)
    assert again.pairs("test") == data.pairs("test")


def test_dataset_round_trip(data, tmp_path):
    data.save(tmp_path)
    back = cdl.Dataset.load(tmp_path)
    assert back.vocab == data.vocab
    assert back.pairs("valid") == data.pairs("valid")
    with pytest.raises(cdl.Error):
        cdl.Dataset.load(tmp_path / "missing")


def test_competence():
    assert cdl.competence(0, 100000) == pytest.approx(0.1, abs=1e-9)
    assert cdl.competence(100000, 100000) == pytest.approx(1.0, abs=1e-9)
    assert cdl.competence(25000, 100000) == pytest.approx(0.507445, abs=1e-6)
    with pytest.raises(ValueError):
        cdl.competence(0, 0)


def test_rewards():
    assert cdl.emotion_reward(0.6, 0.25) == 0.725
    assert cdl.total_reward(0.3, 0.725) == 1.025
    lex = {"Happy": ["joy", "glad"], "Sad": ["cry"]}
    words = ["a", "joy", "b", "c", "glad", "d", "e", "f"]
    assert cdl.explicit_emotion_reward(lex, words, cdl.Emotion.Happy) == 0.25
    assert cdl.explicit_emotion_reward(lex, ["cry"] * 3, cdl.Emotion.Sad) == 1.0
    with pytest.raises(ValueError):
        cdl.explicit_emotion_reward({"Happy": ["x"], "Sad": ["x"]}, ["x"], cdl.Emotion.Sad)


def test_metrics():
    assert cdl.bleu([["a", "b", "c", "d"]], [["a", "b", "x", "d"]], 1) == pytest.approx(0.75)
    assert cdl.distinct([["a", "b", "a"]], 1) == pytest.approx(2 / 3)
    lex = {"Happy": ["joy"], "Sad": ["cry"], "Like": ["love"]}
    gen = [["joy"], ["cry"], ["w"], ["love", "x"]]
    targets = [cdl.Emotion.Happy, cdl.Emotion.Sad, cdl.Emotion.Happy, cdl.Emotion.Like]
    assert cdl.emotion_word_rate(lex, gen, targets) == 0.75
    with pytest.raises(ValueError):
        cdl.distinct([], 1)


def test_model(data, tmp_path):
    model = cdl.Model.init(data, hidden=8, word_dim=6, emotion_dim=4, seed=5)
    query = data.pairs("test")[0]["query"]
    out = model.greedy(query, cdl.Emotion.Happy)
    assert out == model.greedy(query, cdl.Emotion.Happy)
    assert 1 <= len(out) <= 30
    lp = model.logprob(query, cdl.Emotion.Sad, out)
    assert math.isfinite(lp) and lp < 0
    model.save(tmp_path / "m")
    back = cdl.Model.load(tmp_path / "m", data)
    assert back.hash == model.hash
    assert back.parameter_count == model.parameter_count


def test_classifier(data, tmp_path):
    cls = cdl.Classifier.train(data, filters=8, word_dim=8, epochs=3, seed=2)
    p = cls.predict_proba(data.pairs("test")[0]["response"])
    assert len(p) == 6
    assert sum(p) == pytest.approx(1.0)
    assert isinstance(cls.predict(["joy"]), cdl.Emotion)
    assert 0.0 <= cls.accuracy(data, "test") <= 1.0
    with pytest.raises(ValueError):
        cls.predict_proba([])
    with pytest.raises(ValueError):
        cls.accuracy(data, "dev")
