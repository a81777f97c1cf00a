import csv

import pytest

import mlmoracle as m
from mlmoracle.analysis import (
    InvalidModelError,
    MismatchedTablesError,
    VocabularyMismatchError,
)


@pytest.fixture(scope="module")
def g3_refs(g3):
    table = m.enumerate_to_coverage(g3, 0.75)
    refs = {}
    for k in (1, 2, 3):
        ordered = m.build_ordered(table, k)
        refs[k] = (ordered, m.erase_order(ordered))
    return table, refs


def _as_model(ordered, entries):
    return m.ConditionalTable(
        kind="model",
        k=ordered.k,
        entries=dict(entries),
        weights=dict(ordered.weights),
        vocabulary=("a", "b", "c", "d"),
    )


def test_task_divergence_values(g1, g3_refs):
    table1 = m.enumerate_to_coverage(g1, 0.75)
    o1 = m.build_ordered(table1, 1)
    assert m.task_divergence(o1, m.erase_order(o1)) == 0.0

    _, refs = g3_refs
    assert m.task_divergence(*refs[1]) == pytest.approx(1 / 3, abs=1e-12)
    assert m.task_divergence(*refs[2]) == pytest.approx(4 / 3, abs=1e-12)


def test_task_divergence_unweighted_flag(g3_refs):
    _, refs = g3_refs
    # Two diverging instances at k=1, each contributing one bit.
    assert m.task_divergence(*refs[1], weighted=False) == pytest.approx(2.0, abs=1e-12)
    assert m.task_divergence(*refs[2], weighted=False) == pytest.approx(16.0, abs=1e-12)


def test_task_divergence_mismatched_k(g3_refs):
    _, refs = g3_refs
    with pytest.raises(MismatchedTablesError):
        m.task_divergence(refs[1][0], refs[2][1])


def test_task_divergence_vocabulary_mismatch(g3_refs):
    _, refs = g3_refs
    ordered = refs[1][0]
    broken = m.ConditionalTable(
        kind="unordered",
        k=1,
        entries={m.class_of(inst): {"zzz": 1.0} for inst in ordered.entries},
        weights={m.class_of(inst): w for inst, w in ordered.weights.items()},
    )
    with pytest.raises(VocabularyMismatchError):
        m.task_divergence(ordered, broken)


def test_conditional_entropy_values(g3_refs):
    _, refs = g3_refs
    assert m.conditional_entropy(refs[1][0]) == 0.0
    assert m.conditional_entropy(refs[1][1]) == pytest.approx(1 / 3, abs=1e-12)
    assert m.conditional_entropy(refs[2][1]) == pytest.approx(4 / 3, abs=1e-12)


def test_conditional_entropy_checks_weights(g3_refs):
    _, refs = g3_refs
    ordered = refs[1][0]
    broken = m.ConditionalTable(
        kind="ordered",
        k=1,
        entries=dict(ordered.entries),
        weights={inst: w * 0.5 for inst, w in ordered.weights.items()},
    )
    with pytest.raises(ValueError, match="sum"):
        m.conditional_entropy(broken)


def test_model_divergence_identity(g3_refs):
    _, refs = g3_refs
    for k in (1, 2):
        ordered, unordered = refs[k]
        fit = m.model_divergence(ordered, _as_model(ordered, ordered.entries))
        assert abs(fit.kl) < 1e-9
        q_u = {inst: unordered.entries[m.class_of(inst)] for inst in ordered.entries}
        fit_u = m.model_divergence(unordered, _as_model(ordered, q_u))
        assert abs(fit_u.kl) < 1e-9


def test_model_divergence_uniform(g3_refs):
    _, refs = g3_refs
    ordered = refs[1][0]
    uniform = {inst: {tok: 0.25 for tok in "abcd"} for inst in ordered.entries}
    fit = m.model_divergence(ordered, _as_model(ordered, uniform))
    assert fit.cross_entropy == pytest.approx(2.0, abs=1e-12)
    assert fit.kl == pytest.approx(2.0, abs=1e-12)


def test_model_divergence_substitution(g3_refs):
    _, refs = g3_refs
    ordered, unordered = refs[1]
    q_u = {inst: unordered.entries[m.class_of(inst)] for inst in ordered.entries}
    fit = m.model_divergence(ordered, _as_model(ordered, q_u))
    assert fit.kl == pytest.approx(m.task_divergence(ordered, unordered), abs=1e-9)


def test_model_divergence_missing_instance(g3_refs):
    _, refs = g3_refs
    ordered = refs[1][0]
    partial = dict(ordered.entries)
    partial.popitem()
    with pytest.raises(m.MissingInstancesError):
        m.model_divergence(ordered, _as_model(ordered, partial))


def test_model_divergence_invalid_distribution(g3_refs):
    _, refs = g3_refs
    ordered = refs[1][0]
    bad = {inst: {tok: 0.2 for tok in "abcd"} for inst in ordered.entries}
    with pytest.raises(InvalidModelError):
        m.model_divergence(ordered, _as_model(ordered, bad))


def test_asymmetry_of_floored_divergences(g3_refs):
    # A model that matches the ordered truth puts (floored) zero mass on
    # completions that are possible without order information, which
    # penalizes it much harder against the order-erased reference than
    # the order-erased model is penalized against the ordered one.
    _, refs = g3_refs
    ordered, unordered = refs[2]
    q_po = _as_model(ordered, ordered.entries)
    q_pu = _as_model(
        ordered, {inst: unordered.entries[m.class_of(inst)] for inst in ordered.entries}
    )
    kl_u_of_po = m.model_divergence(unordered, q_po).kl
    kl_o_of_pu = m.model_divergence(ordered, q_pu).kl
    assert kl_u_of_po > kl_o_of_pu
    assert kl_o_of_pu == pytest.approx(4 / 3, abs=1e-9)


def test_gibbs_inequalities(g3_refs):
    _, refs = g3_refs
    for k, (ordered, unordered) in refs.items():
        d = m.task_divergence(ordered, unordered)
        assert d >= -1e-9
        h_o, h_u = m.conditional_entropy(ordered), m.conditional_entropy(unordered)
        assert h_u >= h_o - 1e-9
        uniform = {inst: {tok: 0.25 for tok in "abcd"} for inst in ordered.entries}
        fit = m.model_divergence(ordered, _as_model(ordered, uniform))
        assert fit.kl >= -1e-9
        assert fit.cross_entropy >= h_o - 1e-9


def test_perplexity_stubs(tmp_path, g3, g3_refs):
    table, refs = g3_refs
    ordered = refs[1][0]
    path = tmp_path / "manifest.tsv"
    m.export_eval_set(ordered, table, path)
    manifest = m.read_manifest(path)

    uniform = _as_model(ordered, {inst: {tok: 0.25 for tok in "abcd"} for inst in ordered.entries})
    assert m.perplexity(uniform, manifest) == pytest.approx(4.0, abs=1e-9)

    oracle_model = _as_model(ordered, ordered.entries)
    assert m.perplexity(oracle_model, manifest) == pytest.approx(1.0, abs=1e-9)


def test_perplexity_counts_occurrences(tmp_path, g3_refs):
    # At k=3 both sentences collapse onto one context; perplexity still
    # counts each (sentence, mask set, target) occurrence separately.
    table, refs = g3_refs
    ordered, unordered = refs[3]
    path = tmp_path / "manifest.tsv"
    m.export_eval_set(ordered, table, path)
    manifest = m.read_manifest(path)
    assert sum(sum(rec.golds.values()) for rec in manifest) == 6
    q_u = _as_model(
        ordered, {inst: unordered.entries[m.class_of(inst)] for inst in ordered.entries}
    )
    expected = 2.0 ** m.conditional_entropy(unordered)
    assert m.perplexity(q_u, manifest) == pytest.approx(expected, abs=1e-9)


def test_sweep_reports_and_csv(tmp_path, g3):
    reports = m.sweep(g3, 0.75, [1, 2])
    assert [r.k for r in reports] == [1, 2]
    assert reports[0].d_task == pytest.approx(1 / 3, abs=1e-12)
    assert reports[1].d_task == pytest.approx(4 / 3, abs=1e-12)
    assert reports[1].d_task > reports[0].d_task

    path = tmp_path / "sweep.csv"
    m.write_sweep_csv(reports, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["k"] for row in rows] == ["1", "2"]
    assert float(rows[0]["D_task"]) == pytest.approx(1 / 3, abs=1e-12)
    assert float(rows[1]["H_unordered"]) == pytest.approx(4 / 3, abs=1e-12)
