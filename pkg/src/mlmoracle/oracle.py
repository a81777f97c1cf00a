"""True masked-completion distributions over an enumerated sentence set.

For a mask count k, every k-subset of positions of every covered
sentence produces a masked context; contexts identical across sentences
are merged.  The ordered reference conditions on the context sequence
and a target position; the order-erased reference conditions only on
the multiset of unmasked tokens plus the mask count.  Conditionals are
ratios within the covered set, and mask sets are uniform over the
C(len, k) choices of each sentence.

Serialized records are line-delimited and tab-separated:

    id <TAB> context <TAB> masked-positions <TAB> target <TAB> weight <TAB> pairs

where the context spells masks as ``[MASK]``, pairs are ``token:value``
in vocabulary (code point) order with 17 significant digits, and ids are
content hashes so re-exports are stable.  Order-erased records put the
sorted unmasked tokens in the context column, the mask count in the
positions column, and ``-`` as the target.  Evaluation manifests use the
same prefix with ``token:count`` gold-occurrence pairs, one count per
(sentence, mask set, target) occurrence.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

from .enumeration import SentenceTable, Tokens
from .grammar import MASK_TOKEN


class EmptyMaskingError(ValueError):
    """No covered sentence is long enough for the requested mask count."""


class UnknownInstanceError(KeyError):
    """Looked-up instance was never built."""


class MissingInstancesError(RuntimeError):
    """A model table does not cover the required instances."""

    def __init__(self, ids: list[str]):
        shown = ", ".join(ids[:10])
        more = f" (+{len(ids) - 10} more)" if len(ids) > 10 else ""
        super().__init__(f"missing predictions for {len(ids)} instance(s): {shown}{more}")
        self.ids = ids


def _content_id(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, order=True)
class OrderedInstance:
    """A masked context plus the masked position being predicted."""

    context: Tokens
    target: int

    @property
    def masked_positions(self) -> tuple[int, ...]:
        return tuple(i for i, tok in enumerate(self.context) if tok == MASK_TOKEN)

    @property
    def unmasked_tokens(self) -> Tokens:
        return tuple(tok for tok in self.context if tok != MASK_TOKEN)

    @property
    def mask_count(self) -> int:
        return len(self.masked_positions)

    @property
    def record_id(self) -> str:
        return _content_id("ordered", " ".join(self.context), str(self.target))


@dataclass(frozen=True, order=True)
class UnorderedClass:
    """Order-erasure class: sorted unmasked tokens plus mask count."""

    unmasked: Tokens
    mask_count: int

    @property
    def record_id(self) -> str:
        return _content_id("unordered", " ".join(self.unmasked), str(self.mask_count))


def class_of(instance: OrderedInstance) -> UnorderedClass:
    return UnorderedClass(tuple(sorted(instance.unmasked_tokens)), instance.mask_count)


@dataclass
class ConditionalTable:
    """Completion distributions keyed by instance (ordered/model) or class.

    Distributions are sparse dicts over tokens; weights sum to 1 per
    table.  ``vocabulary`` is set on model tables only (the dense layout
    the predictions were read in).
    """

    kind: str  # "ordered" | "unordered" | "model"
    k: int
    entries: dict
    weights: dict
    vocabulary: tuple[str, ...] | None = field(default=None)

    def keys_by_id(self) -> list:
        return sorted(self.entries, key=lambda key: key.record_id)

    @property
    def support(self) -> frozenset[str]:
        return frozenset(tok for dist in self.entries.values() for tok in dist)


@dataclass(frozen=True)
class ManifestRecord:
    instance: OrderedInstance
    weight: float
    golds: dict[str, int]  # gold token -> occurrence count


def _masked_context(tokens: Tokens, mask_set: tuple[int, ...]) -> Tokens:
    ctx = list(tokens)
    for i in mask_set:
        ctx[i] = MASK_TOKEN
    return tuple(ctx)


def _eligible(table: SentenceTable, k: int) -> list[tuple[Tokens, float]]:
    if k < 1:
        raise ValueError(f"mask count must be >= 1, got {k}")
    eligible = [(toks, p) for toks, p in table.sentences.items() if len(toks) >= k]
    if not eligible:
        raise EmptyMaskingError(f"no covered sentence has length >= {k}")
    return eligible


def build_ordered(table: SentenceTable, k: int) -> ConditionalTable:
    """The ordered reference p(completion | masked context, target position).

    Instance weight is p(context)/k under uniform mask-set choice,
    renormalized to sum 1 over the covered set for this k.
    """
    compatible_mass: dict[Tokens, float] = {}
    context_mass: dict[Tokens, float] = {}
    completions: dict[Tokens, dict[int, dict[str, float]]] = {}
    for tokens, p in _eligible(table, k):
        share = p / math.comb(len(tokens), k)
        for mask_set in combinations(range(len(tokens)), k):
            ctx = _masked_context(tokens, mask_set)
            compatible_mass[ctx] = compatible_mass.get(ctx, 0.0) + p
            context_mass[ctx] = context_mass.get(ctx, 0.0) + share
            per_target = completions.setdefault(ctx, {})
            for i in mask_set:
                dist = per_target.setdefault(i, {})
                dist[tokens[i]] = dist.get(tokens[i], 0.0) + p

    total = math.fsum(context_mass.values())
    entries: dict[OrderedInstance, dict[str, float]] = {}
    weights: dict[OrderedInstance, float] = {}
    for ctx in sorted(completions):
        z = compatible_mass[ctx]
        weight = context_mass[ctx] / k / total
        for target in sorted(completions[ctx]):
            inst = OrderedInstance(ctx, target)
            entries[inst] = {
                tok: mass / z for tok, mass in sorted(completions[ctx][target].items())
            }
            weights[inst] = weight
    return ConditionalTable(kind="ordered", k=k, entries=entries, weights=weights)


def erase_order(ordered: ConditionalTable) -> ConditionalTable:
    """Collapse ordered instances into order-erasure classes.

    Class weight is the member weight sum; the class distribution is the
    weight-average of member distributions over both orderings and
    target positions.
    """
    if ordered.kind != "ordered":
        raise ValueError(f"expected an ordered table, got kind={ordered.kind!r}")
    acc_w: dict[UnorderedClass, float] = {}
    acc_d: dict[UnorderedClass, dict[str, float]] = {}
    for inst, dist in ordered.entries.items():
        cls = class_of(inst)
        w = ordered.weights[inst]
        acc_w[cls] = acc_w.get(cls, 0.0) + w
        mix = acc_d.setdefault(cls, {})
        for tok, p in dist.items():
            mix[tok] = mix.get(tok, 0.0) + w * p
    entries: dict[UnorderedClass, dict[str, float]] = {}
    for cls in sorted(acc_w):
        entries[cls] = {tok: mass / acc_w[cls] for tok, mass in sorted(acc_d[cls].items())}
    return ConditionalTable(kind="unordered", k=ordered.k, entries=entries, weights=dict(sorted(acc_w.items())))


def lookup_reference(
    instance: OrderedInstance,
    which: str,
    ordered: ConditionalTable,
    unordered: ConditionalTable,
) -> dict[str, float]:
    """Completion distribution for an ordered instance under either reference."""
    if instance not in ordered.entries:
        raise UnknownInstanceError(f"instance {instance.record_id} was never built")
    if which == "ordered":
        return ordered.entries[instance]
    if which == "unordered":
        return unordered.entries[class_of(instance)]
    raise ValueError(f"which must be 'ordered' or 'unordered', got {which!r}")


def gold_occurrences(table: SentenceTable, k: int) -> dict[OrderedInstance, Counter]:
    """Per-instance gold-token counts over (sentence, mask set, target) occurrences."""
    golds: dict[OrderedInstance, Counter] = {}
    for tokens, _ in _eligible(table, k):
        for mask_set in combinations(range(len(tokens)), k):
            ctx = _masked_context(tokens, mask_set)
            for i in mask_set:
                golds.setdefault(OrderedInstance(ctx, i), Counter())[tokens[i]] += 1
    return golds


def _format_pairs(values: dict[str, float]) -> str:
    return " ".join(f"{tok}:{val:.17g}" for tok, val in sorted(values.items()))


def _parse_pairs(text: str) -> dict[str, float]:
    pairs = {}
    for item in text.split(" "):
        if item:
            tok, val = item.rsplit(":", 1)
            pairs[tok] = float(val)
    return pairs


def format_reference_table(table: ConditionalTable) -> str:
    lines = []
    if table.kind == "ordered":
        for inst, dist in table.entries.items():
            lines.append(
                f"{inst.record_id}\t{' '.join(inst.context)}\t"
                f"{','.join(map(str, inst.masked_positions))}\t{inst.target}\t"
                f"{table.weights[inst]:.17g}\t{_format_pairs(dist)}"
            )
    elif table.kind == "unordered":
        for cls, dist in table.entries.items():
            lines.append(
                f"{cls.record_id}\t{' '.join(cls.unmasked)}\t{cls.mask_count}\t-\t"
                f"{table.weights[cls]:.17g}\t{_format_pairs(dist)}"
            )
    else:
        raise ValueError(f"cannot serialize table of kind {table.kind!r}")
    return "".join(line + "\n" for line in lines)


def write_reference_table(table: ConditionalTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_reference_table(table))


def read_reference_table(path) -> ConditionalTable:
    """Read an ordered or order-erased reference table (kind auto-detected)."""
    entries: dict = {}
    weights: dict = {}
    kind = None
    k = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rec_id, ctx_field, pos_field, target_field, weight, pairs = line.split("\t")
            if target_field == "-":
                row_kind = "unordered"
                key = UnorderedClass(
                    tuple(ctx_field.split(" ")) if ctx_field else (), int(pos_field)
                )
                row_k = key.mask_count
            else:
                row_kind = "ordered"
                key = OrderedInstance(tuple(ctx_field.split(" ")), int(target_field))
                row_k = key.mask_count
            if key.record_id != rec_id:
                raise ValueError(f"record id mismatch for {rec_id} in {path}")
            if kind is None:
                kind, k = row_kind, row_k
            elif kind != row_kind or k != row_k:
                raise ValueError(f"mixed record kinds/mask counts in {path}")
            entries[key] = _parse_pairs(pairs)
            weights[key] = float(weight)
    if kind is None:
        raise ValueError(f"empty reference table {path}")
    return ConditionalTable(kind=kind, k=k, entries=entries, weights=weights)


def export_eval_set(ordered: ConditionalTable, table: SentenceTable, path) -> int:
    """Write the evaluation manifest for an ordered table; returns record count.

    One record per ordered instance, carrying the gold tokens of its
    source occurrences so scorers can apply the single-gold-token
    perplexity convention.
    """
    golds = gold_occurrences(table, ordered.k)
    lines = []
    for inst in ordered.entries:
        pairs = " ".join(f"{tok}:{cnt}" for tok, cnt in sorted(golds[inst].items()))
        lines.append(
            f"{inst.record_id}\t{' '.join(inst.context)}\t"
            f"{','.join(map(str, inst.masked_positions))}\t{inst.target}\t"
            f"{ordered.weights[inst]:.17g}\t{pairs}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
    return len(lines)


def read_manifest(path) -> list[ManifestRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rec_id, ctx_field, _, target_field, weight, pairs = line.split("\t")
            inst = OrderedInstance(tuple(ctx_field.split(" ")), int(target_field))
            if inst.record_id != rec_id:
                raise ValueError(f"record id mismatch for {rec_id} in {path}")
            golds = {tok: int(cnt) for tok, cnt in _parse_pairs(pairs).items()}
            records.append(ManifestRecord(instance=inst, weight=float(weight), golds=golds))
    return records


def write_predictions(path, distributions: dict, vocabulary: list[str]) -> None:
    """Write model distributions in the dense interchange format.

    One line per instance: id, tab, one probability per vocabulary entry
    (code point order, 9 significant digits).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for inst, dist in distributions.items():
            vals = " ".join(f"{dist.get(tok, 0.0):.9g}" for tok in vocabulary)
            fh.write(f"{inst.record_id}\t{vals}\n")


def read_predictions(path, vocabulary: list[str], manifest: list[ManifestRecord]) -> ConditionalTable:
    """Ingest a predictions file as a model table keyed by manifest instances.

    Raises MissingInstancesError when the file does not cover the
    manifest; predictions for unknown ids are ignored.
    """
    by_id = {rec.instance.record_id: rec for rec in manifest}
    if not by_id:
        raise ValueError("empty manifest")
    k = manifest[0].instance.mask_count
    entries: dict = {}
    weights: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rec_id, vals = line.split("\t")
            rec = by_id.get(rec_id)
            if rec is None:
                continue
            probs = [float(v) for v in vals.split(" ")]
            if len(probs) != len(vocabulary):
                raise ValueError(
                    f"prediction {rec_id} has {len(probs)} values, expected {len(vocabulary)}"
                )
            entries[rec.instance] = {tok: p for tok, p in zip(vocabulary, probs) if p != 0.0}
            weights[rec.instance] = rec.weight
    missing = sorted(rec_id for rec_id in by_id if by_id[rec_id].instance not in entries)
    if missing:
        raise MissingInstancesError(missing)
    return ConditionalTable(
        kind="model", k=k, entries=entries, weights=weights, vocabulary=tuple(vocabulary)
    )
