import pytest

import mlmoracle as m


def test_g1_finite_language(g1):
    table = m.enumerate_to_coverage(g1, 0.75)
    assert table.sentences == {("a", "b"): 0.5, ("c", "b"): 0.5}
    assert table.covered_mass == 1.0
    assert table.length_histogram == {2: 2}


def test_ginf_strict_threshold(ginf):
    # 0.5 + 0.25 = 0.75 is not strictly above 0.75, so a third sentence
    # is required.
    table = m.enumerate_to_coverage(ginf, 0.75)
    assert table.sentences == {("a",): 0.5, ("a", "a"): 0.25, ("a", "a", "a"): 0.125}
    assert table.covered_mass == 0.875
    assert table.max_sentence_length == 3


def test_threshold_validation(g1):
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            m.enumerate_to_coverage(g1, bad)


def test_coverage_unreachable_reports_mass(ginf):
    with pytest.raises(m.CoverageError) as exc:
        m.enumerate_to_coverage(ginf, 0.9, max_length=2)
    assert exc.value.achieved == 0.75
    assert exc.value.threshold == 0.9


def test_sentence_probability_examples(g1, g3, ginf):
    assert m.sentence_probability(g1, ["a", "b"]) == 0.5
    assert m.sentence_probability(g3, ["a", "b", "d"]) == 0.0
    assert m.sentence_probability(g3, ["a", "b", "c"]) == 0.5
    assert m.sentence_probability(ginf, ["a", "a", "a"]) == 0.125
    with pytest.raises(ValueError):
        m.sentence_probability(g1, [])


def test_table_matches_inside_probability(g1, g3, ginf):
    for g in (g1, g3, ginf):
        table = m.enumerate_to_coverage(g, 0.75)
        for tokens, p in table.sentences.items():
            assert abs(p - m.sentence_probability(g, tokens)) < 1e-12


def test_covered_mass_bounded(random_grammars):
    for _, table in random_grammars:
        assert table.covered_mass <= 1.0 + 1e-9


def test_rule_permutation_invariance(g3):
    lines = [
        "0.5 S -> Y d",
        "1.0 Y -> b a",
        "1.0 X -> a b",
        "0.5 S -> X c",
    ]
    shuffled = m.parse_grammar("\n".join(lines) + "\n")
    base = m.enumerate_to_coverage(g3, 0.75)
    other = m.enumerate_to_coverage(shuffled, 0.75)
    assert other.sentences == base.sentences


def test_threshold_monotonicity(ginf, random_grammars):
    cases = [(ginf, 64)] + [(g, 8) for g, _ in random_grammars[:5]]
    for grammar, cap in cases:
        previous: set = set()
        for threshold in (0.3, 0.6, 0.85):
            table = m.enumerate_to_coverage(grammar, threshold, cap)
            kept = set(table.sentences)
            assert previous <= kept
            previous = kept


def test_ambiguity_summed_exactly():
    g = m.parse_grammar("0.5 S -> A\n0.5 S -> B\n1.0 A -> x y\n1.0 B -> x y\n")
    # A low threshold stops enumeration between the two derivations of
    # "x y"; the recorded probability must still be the full sum.
    table = m.enumerate_to_coverage(g, 0.4)
    assert table.sentences == {("x", "y"): 1.0}
    assert m.sentence_probability(g, ["x", "y"]) == 1.0


def test_unary_cycle_rejected():
    g = m.parse_grammar("0.5 S -> A\n0.5 S -> a\n1.0 A -> S\n")
    assert m.validate(g) == []
    with pytest.raises(m.UnsupportedGrammarError):
        m.enumerate_to_coverage(g, 0.5)
    with pytest.raises(m.UnsupportedGrammarError):
        m.sentence_probability(g, ["a"])


def test_kbest_examples(g1, g3, ginf):
    best = m.kbest(ginf, 2)
    assert [(s.tokens, s.probability) for s in best.sentences] == [
        (("a",), 0.5),
        (("a", "a"), 0.25),
    ]
    assert not best.exhausted

    finite = m.kbest(g1, 5)
    assert len(finite.sentences) == 2
    assert finite.exhausted

    tie = m.kbest(g3, 1)
    assert tie.sentences[0] == m.WeightedSentence(("a", "b", "c"), 0.5)


def test_kbest_validates_k(g1):
    with pytest.raises(ValueError):
        m.kbest(g1, 0)


def test_table_round_trip(tmp_path, g3, ginf):
    from mlmoracle.enumeration import read_sentence_table, write_sentence_table

    for g in (g3, ginf):
        table = m.enumerate_to_coverage(g, 0.75)
        path = tmp_path / "table.tsv"
        write_sentence_table(table, path)
        again = read_sentence_table(path)
        assert again.sentences == table.sentences
        assert again.covered_mass == table.covered_mass


def test_export_ordering(tmp_path, ginf):
    from mlmoracle.enumeration import format_sentence_table

    table = m.enumerate_to_coverage(ginf, 0.75)
    lines = format_sentence_table(table).splitlines()
    assert lines[0].startswith("a\t")
    probs = [float(line.split("\t")[1]) for line in lines]
    assert probs == sorted(probs, reverse=True)
