"""Entropies, divergences, and perplexities over reference and model tables.

All logarithms are base 2 and every reported quantity is in bits.
Model probabilities are floored (default 1e-12) before any logarithm so
divergences stay finite when a model assigns zero to a completion that
is possible without order information; reference probabilities are
never floored, and 0*log(0) terms contribute 0.

Reductions run in sorted record-id order for bit-reproducibility.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .enumeration import enumerate_to_coverage
from .grammar import Grammar
from .oracle import (
    ConditionalTable,
    ManifestRecord,
    MissingInstancesError,
    build_ordered,
    class_of,
    erase_order,
)

DEFAULT_FLOOR = 1e-12
WEIGHT_SUM_TOLERANCE = 1e-9


class MismatchedTablesError(ValueError):
    """Tables disagree on mask count, kind, or record universe."""


class VocabularyMismatchError(ValueError):
    """A required completion token is absent from the paired distribution."""


class InvalidModelError(ValueError):
    """A model distribution has negative mass or does not sum to 1 (tol 1e-6)."""


@dataclass
class ModelFit:
    cross_entropy: float
    kl: float


@dataclass
class ModelMetrics:
    cross_entropy_ordered: float
    cross_entropy_unordered: float
    kl_ordered: float
    kl_unordered: float
    perplexity: float | None = None


@dataclass
class MetricsReport:
    k: int
    h_ordered: float
    h_unordered: float
    d_task: float
    models: dict[str, ModelMetrics] = field(default_factory=dict)


def _entropy_bits(dist: dict[str, float]) -> float:
    return -math.fsum(p * math.log2(p) for p in dist.values() if p > 0.0)


def _check_weights(table: ConditionalTable) -> None:
    total = math.fsum(table.weights.values())
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ValueError(f"table weights sum to {total:.12g}, expected 1")


def conditional_entropy(table: ConditionalTable) -> float:
    """H = sum_x w(x) * h(x) with h(x) the completion entropy at x, in bits."""
    _check_weights(table)
    return math.fsum(
        table.weights[key] * _entropy_bits(table.entries[key]) for key in table.keys_by_id()
    )


def task_divergence(
    ordered: ConditionalTable, unordered: ConditionalTable, weighted: bool = True
) -> float:
    """KL divergence from the ordered to the order-erased reference, in bits.

    The weighted form (default) weighs each ordered instance by its
    probability mass; the unweighted form is the plain sum over
    instances.
    """
    if ordered.kind != "ordered" or unordered.kind != "unordered":
        raise MismatchedTablesError(
            f"expected kinds ordered/unordered, got {ordered.kind}/{unordered.kind}"
        )
    if ordered.k != unordered.k:
        raise MismatchedTablesError(f"mask counts differ: {ordered.k} vs {unordered.k}")
    terms = []
    for inst in ordered.keys_by_id():
        cls = class_of(inst)
        if cls not in unordered.entries:
            raise MismatchedTablesError(f"class of instance {inst.record_id} missing")
        pu = unordered.entries[cls]
        contrib = 0.0
        for tok, p in ordered.entries[inst].items():
            if p <= 0.0:
                continue
            q = pu.get(tok, 0.0)
            if q <= 0.0:
                raise VocabularyMismatchError(
                    f"token {tok!r} carried by instance {inst.record_id} is absent "
                    f"from its order-erased class"
                )
            contrib += p * math.log2(p / q)
        terms.append(ordered.weights[inst] * contrib if weighted else contrib)
    return math.fsum(terms)


def _validate_model_dist(dist: dict[str, float], rec_id: str) -> None:
    total = math.fsum(dist.values())
    if abs(total - 1.0) > 1e-6:
        raise InvalidModelError(f"model distribution {rec_id} sums to {total:.9g}")
    if any(p < 0.0 for p in dist.values()):
        raise InvalidModelError(f"model distribution {rec_id} has negative entries")


def _cross_entropy_term(p: dict[str, float], q: dict[str, float], floor: float) -> float:
    return -math.fsum(
        pv * math.log2(max(q.get(tok, 0.0), floor)) for tok, pv in p.items() if pv > 0.0
    )


def model_divergence(
    reference: ConditionalTable, model: ConditionalTable, floor: float = DEFAULT_FLOOR
) -> ModelFit:
    """Cross-entropy of the model against a reference, and the implied KL.

    Ordered references are paired instance by instance.  Order-erased
    references are evaluated at the model's ordered instances through
    their erasure class, weighted by the instances' manifest weights.
    """
    if model.kind != "model":
        raise MismatchedTablesError(f"expected a model table, got kind={model.kind!r}")
    if reference.k != model.k:
        raise MismatchedTablesError(f"mask counts differ: {reference.k} vs {model.k}")
    terms = []
    if reference.kind == "ordered":
        missing = [
            inst.record_id for inst in reference.keys_by_id() if inst not in model.entries
        ]
        if missing:
            raise MissingInstancesError(missing)
        for inst in reference.keys_by_id():
            q = model.entries[inst]
            _validate_model_dist(q, inst.record_id)
            terms.append(
                reference.weights[inst]
                * _cross_entropy_term(reference.entries[inst], q, floor)
            )
    elif reference.kind == "unordered":
        _check_weights(model)
        for inst in model.keys_by_id():
            cls = class_of(inst)
            if cls not in reference.entries:
                raise MismatchedTablesError(f"class of instance {inst.record_id} missing")
            q = model.entries[inst]
            _validate_model_dist(q, inst.record_id)
            terms.append(
                model.weights[inst] * _cross_entropy_term(reference.entries[cls], q, floor)
            )
    else:
        raise MismatchedTablesError(f"reference kind {reference.kind!r} not scoreable")
    cross_entropy = math.fsum(terms)
    return ModelFit(cross_entropy=cross_entropy, kl=cross_entropy - conditional_entropy(reference))


def perplexity(
    model: ConditionalTable, manifest: list[ManifestRecord], floor: float = DEFAULT_FLOOR
) -> float:
    """Single-gold-token perplexity over manifest occurrences.

    Occurrences are counted per (sentence, mask set, target position)
    and are not weighted by sentence probability.
    """
    total = []
    n = 0
    for rec in sorted(manifest, key=lambda r: r.instance.record_id):
        q = model.entries.get(rec.instance)
        if q is None:
            raise MissingInstancesError([rec.instance.record_id])
        for tok, count in sorted(rec.golds.items()):
            if model.vocabulary is not None and tok not in model.vocabulary:
                raise VocabularyMismatchError(f"gold token {tok!r} absent from vocabulary")
            total.append(-count * math.log2(max(q.get(tok, 0.0), floor)))
            n += count
    if n == 0:
        raise ValueError("manifest carries no gold occurrences")
    return 2.0 ** (math.fsum(total) / n)


def sweep(
    grammar: Grammar,
    threshold: float,
    ks: list[int],
    max_length: int = 64,
    models: dict[str, dict[int, ConditionalTable]] | None = None,
    manifests: dict[int, list[ManifestRecord]] | None = None,
    weighted: bool = True,
    floor: float = DEFAULT_FLOOR,
) -> list[MetricsReport]:
    """Reference metrics (plus model metrics when given) for each mask count."""
    table = enumerate_to_coverage(grammar, threshold, max_length)
    reports = []
    for k in ks:
        ordered = build_ordered(table, k)
        unordered = erase_order(ordered)
        report = MetricsReport(
            k=k,
            h_ordered=conditional_entropy(ordered),
            h_unordered=conditional_entropy(unordered),
            d_task=task_divergence(ordered, unordered, weighted=weighted),
        )
        for name in sorted(models or {}):
            model = models[name][k]
            fit_o = model_divergence(ordered, model, floor=floor)
            fit_u = model_divergence(unordered, model, floor=floor)
            ppl = None
            if manifests is not None and k in manifests:
                ppl = perplexity(model, manifests[k], floor=floor)
            report.models[name] = ModelMetrics(
                cross_entropy_ordered=fit_o.cross_entropy,
                cross_entropy_unordered=fit_u.cross_entropy,
                kl_ordered=fit_o.kl,
                kl_unordered=fit_u.kl,
                perplexity=ppl,
            )
        reports.append(report)
    return reports


def sweep_csv_rows(reports: list[MetricsReport]) -> tuple[list[str], list[list[str]]]:
    model_names = sorted({name for rep in reports for name in rep.models})
    header = ["k", "H_ordered", "H_unordered", "D_task"]
    for name in model_names:
        header += [
            f"{name}_ce_ordered",
            f"{name}_ce_unordered",
            f"{name}_kl_ordered",
            f"{name}_kl_unordered",
            f"{name}_perplexity",
        ]
    rows = []
    for rep in reports:
        row = [str(rep.k)] + [f"{v:.17g}" for v in (rep.h_ordered, rep.h_unordered, rep.d_task)]
        for name in model_names:
            m = rep.models.get(name)
            if m is None:
                row += [""] * 5
            else:
                row += [
                    f"{m.cross_entropy_ordered:.17g}",
                    f"{m.cross_entropy_unordered:.17g}",
                    f"{m.kl_ordered:.17g}",
                    f"{m.kl_unordered:.17g}",
                    "" if m.perplexity is None else f"{m.perplexity:.17g}",
                ]
        rows.append(row)
    return header, rows


def write_sweep_csv(reports: list[MetricsReport], path) -> None:
    header, rows = sweep_csv_rows(reports)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def format_reports(reports: list[MetricsReport]) -> str:
    """Plain-text summary mirroring the CSV, 6 decimal places."""
    lines = []
    for rep in reports:
        lines.append(
            f"k={rep.k}  H_ordered={rep.h_ordered:.6f}  "
            f"H_unordered={rep.h_unordered:.6f}  D_task={rep.d_task:.6f}"
        )
        for name, m in sorted(rep.models.items()):
            ppl = "-" if m.perplexity is None else f"{m.perplexity:.4f}"
            lines.append(
                f"  {name}: ce_o={m.cross_entropy_ordered:.6f} "
                f"ce_u={m.cross_entropy_unordered:.6f} kl_o={m.kl_ordered:.6f} "
                f"kl_u={m.kl_unordered:.6f} ppl={ppl}"
            )
    return "\n".join(lines) + "\n"
