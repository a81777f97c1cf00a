import math

import pytest

import mlmoracle as m
from mlmoracle.datagen import (
    InsufficientSampleError,
    SamplingError,
    read_corpus,
)

CHI2_1DOF_Q999 = 10.827566170662733  # 0.999 quantile of chi-squared(1)


def _spec(train, valid=0, test=0, seed=0, max_length=64):
    return m.CorpusSpec(
        train_size=train, validation_size=valid, test_size=test, seed=seed, max_length=max_length
    )


def test_sampling_is_deterministic(tmp_path, g3):
    stats_a = m.sample_corpus(g3, _spec(50, 10, 10, seed=7), tmp_path / "a")
    stats_b = m.sample_corpus(g3, _spec(50, 10, 10, seed=7), tmp_path / "b")
    for name in ("train.txt", "valid.txt", "test.txt", "vocab.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert stats_a == stats_b


def test_g1_small_sample(tmp_path, g1):
    m.sample_corpus(g1, _spec(4, seed=1), tmp_path)
    lines = (tmp_path / "train.txt").read_text().splitlines()
    assert len(lines) == 4
    assert set(lines) <= {"a b", "c b"}


def test_g1_frequencies_converge(tmp_path, g1):
    m.sample_corpus(g1, _spec(10000, seed=2), tmp_path)
    lines = (tmp_path / "train.txt").read_text().splitlines()
    freq = lines.count("a b") / len(lines)
    assert freq == pytest.approx(0.5, abs=0.02)


def test_vocab_file_layout(tmp_path, g1, g3):
    assert m.emit_vocab(g1, tmp_path / "v1.txt") == ["[PAD]", "[MASK]", "a", "b", "c"]
    assert (tmp_path / "v1.txt").read_text().splitlines() == ["[PAD]", "[MASK]", "a", "b", "c"]
    assert len(m.emit_vocab(g3, tmp_path / "v3.txt")) == 6


def test_sampled_sentences_are_derivable(tmp_path, g3, ginf):
    for g in (g3, ginf):
        out = tmp_path / g.start.name
        m.sample_corpus(g, _spec(200, seed=3), out)
        for tokens in read_corpus(out / "train.txt"):
            assert m.sentence_probability(g, tokens) > 0.0


def test_mean_length(tmp_path, g3, ginf):
    stats = m.sample_corpus(g3, _spec(500, seed=4), tmp_path / "g3")
    assert stats.mean_sentence_length == 3.0
    stats = m.sample_corpus(ginf, _spec(5000, seed=4), tmp_path / "ginf")
    # E[len] = sum n * 0.5^n = 2.
    assert stats.mean_sentence_length == pytest.approx(2.0, abs=0.1)


def test_rejection_rate_error(tmp_path, g3):
    with pytest.raises(SamplingError):
        m.sample_corpus(g3, _spec(10, seed=5, max_length=2), tmp_path)


def test_chi2_matches_exact_probabilities(tmp_path, g1):
    table = m.enumerate_to_coverage(g1, 0.75)
    passed = 0
    for seed in range(100):
        out = tmp_path / f"s{seed}"
        m.sample_corpus(g1, _spec(2000, seed=seed), out)
        report = m.chi2_fitness(read_corpus(out / "train.txt"), table)
        assert report.degrees_of_freedom == 1
        passed += report.statistic < CHI2_1DOF_Q999
    assert passed >= 99


def test_chi2_detects_degenerate_corpus(g1):
    table = m.enumerate_to_coverage(g1, 0.75)
    small = m.chi2_fitness([("a", "b")] * 200, table)
    big = m.chi2_fitness([("a", "b")] * 2000, table)
    assert big.statistic > small.statistic > CHI2_1DOF_Q999


def test_chi2_insufficient_sample(g1):
    table = m.enumerate_to_coverage(g1, 0.75)
    with pytest.raises(InsufficientSampleError):
        m.chi2_fitness([], table)
    with pytest.raises(InsufficientSampleError):
        m.chi2_fitness([("a", "b")] * 49, table)


def test_chi2_uncovered_bucket(ginf):
    table = m.enumerate_to_coverage(ginf, 0.75)  # mass 0.875
    corpus = [("a",)] * 500 + [("a", "a")] * 250 + [("a", "a", "a")] * 125 + [("a",) * 4] * 125
    report = m.chi2_fitness(corpus, table)
    # 3 covered cells plus the uncovered bucket.
    assert report.degrees_of_freedom == 3
    assert math.isfinite(report.statistic)


def test_stats_lines(tmp_path, g3):
    stats = m.sample_corpus(g3, _spec(60, 5, 5, seed=6), tmp_path)
    text = stats.as_lines()
    assert "train_size 60" in text
    assert "vocabulary_size 4" in text
    assert "mean_sentence_length 3.000000" in text
