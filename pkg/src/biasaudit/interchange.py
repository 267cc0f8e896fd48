"""Model-output interchange format (NDJSON) and the dataset catalog.

The interchange file is UTF-8, one JSON object per line, LF endings.  Every
object carries a ``"kind"`` discriminator naming one of the five record
types below.  Floats are serialized with their shortest round-trip decimal
rendering, so parse(write(records)) reproduces records bit-identically.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple, Union

__all__ = [
    "ParseError",
    "SchemaError",
    "UnknownDatasetError",
    "EmbeddingRecord",
    "PLLRecord",
    "MaskedSlotRecord",
    "CompletionRecord",
    "AttentionRecord",
    "Record",
    "RECORD_KINDS",
    "iter_records",
    "parse_records",
    "write_records",
    "dump_records",
    "DatasetEntry",
    "Catalog",
    "load_catalog",
    "list_datasets",
    "load_dataset",
    "CounterfactualPair",
    "PromptRow",
    "AnnotatedSentence",
]

ATTENTION_ROW_TOL = 1e-6


class ParseError(ValueError):
    """Malformed or invalid interchange line; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ValueError):
    """Dataset file violates its declared schema; carries the row number."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class UnknownDatasetError(ValueError):
    """Requested dataset or config is not present in the catalog."""


@dataclass
class EmbeddingRecord:
    """One text item with its embedding vector and group label."""

    id: str
    group: str
    text: str
    vector: list[float]


@dataclass
class PLLRecord:
    """Per-token log-probabilities of one sentence under a masking scheme.

    ``modified[i]`` is true when token i carries demographic information.
    """

    id: str
    pair_id: str
    variant: str  # "stereo" | "anti"
    tokens: list[str]
    logprobs: list[float]
    modified: list[bool]


@dataclass
class MaskedSlotRecord:
    """Target and prior log-probabilities for one template slot filler."""

    template_id: str
    target_word: str
    group_index: int
    logp_target: float
    logp_prior: float


@dataclass
class CompletionRecord:
    """Top-k generated completions for one prompt."""

    prompt_id: str
    completions: list[str]


@dataclass
class AttentionRecord:
    """Row-stochastic attention weights of one head."""

    layer: int
    head: int
    weights: list[list[float]]


Record = Union[EmbeddingRecord, PLLRecord, MaskedSlotRecord, CompletionRecord, AttentionRecord]

RECORD_KINDS = ("embedding", "pll", "masked_slot", "completion", "attention")


def _field(obj: dict, name: str, line: int):
    if name not in obj:
        raise ParseError(f"missing field {name!r}", line)
    return obj[name]


def _string(obj: dict, name: str, line: int) -> str:
    value = _field(obj, name, line)
    if not isinstance(value, str):
        raise ParseError(f"field {name!r} must be a string", line)
    return value


def _integer(obj: dict, name: str, line: int) -> int:
    value = _field(obj, name, line)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"field {name!r} must be an integer", line)
    return value


def _number(value, name: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"field {name!r} must be a number", line)
    if not math.isfinite(value):
        raise ParseError(f"field {name!r} contains a non-finite value", line)
    return value


def _logprob(obj: dict, name: str, line: int) -> float:
    value = _number(_field(obj, name, line), name, line)
    if value > 0.0:
        raise ParseError(f"field {name!r} must be <= 0 (a log-probability)", line)
    return value


def _number_list(obj: dict, name: str, line: int) -> list[float]:
    value = _field(obj, name, line)
    if not isinstance(value, list):
        raise ParseError(f"field {name!r} must be a list", line)
    return [_number(x, name, line) for x in value]


def _embedding_from(obj: dict, line: int) -> EmbeddingRecord:
    vector = _number_list(obj, "vector", line)
    if not vector:
        raise ParseError("field 'vector' must be nonempty", line)
    return EmbeddingRecord(
        id=_string(obj, "id", line),
        group=_string(obj, "group", line),
        text=_string(obj, "text", line),
        vector=vector,
    )


def _pll_from(obj: dict, line: int) -> PLLRecord:
    variant = _string(obj, "variant", line)
    if variant not in ("stereo", "anti"):
        raise ParseError(f"field 'variant' must be 'stereo' or 'anti', got {variant!r}", line)
    tokens = _field(obj, "tokens", line)
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ParseError("field 'tokens' must be a list of strings", line)
    logprobs = _number_list(obj, "logprobs", line)
    if any(lp > 0.0 for lp in logprobs):
        raise ParseError("field 'logprobs' must be <= 0 (log-probabilities)", line)
    modified = _field(obj, "modified", line)
    if not isinstance(modified, list) or not all(isinstance(m, bool) for m in modified):
        raise ParseError("field 'modified' must be a list of booleans", line)
    if not (len(tokens) == len(logprobs) == len(modified)):
        raise ParseError(
            "fields 'tokens', 'logprobs' and 'modified' must have equal lengths", line
        )
    return PLLRecord(
        id=_string(obj, "id", line),
        pair_id=_string(obj, "pair_id", line),
        variant=variant,
        tokens=list(tokens),
        logprobs=logprobs,
        modified=list(modified),
    )


def _masked_slot_from(obj: dict, line: int) -> MaskedSlotRecord:
    group_index = _integer(obj, "group_index", line)
    if group_index < 0:
        raise ParseError("field 'group_index' must be >= 0", line)
    return MaskedSlotRecord(
        template_id=_string(obj, "template_id", line),
        target_word=_string(obj, "target_word", line),
        group_index=group_index,
        logp_target=_logprob(obj, "logp_target", line),
        logp_prior=_logprob(obj, "logp_prior", line),
    )


def _completion_from(obj: dict, line: int) -> CompletionRecord:
    completions = _field(obj, "completions", line)
    if (
        not isinstance(completions, list)
        or not completions
        or not all(isinstance(c, str) for c in completions)
    ):
        raise ParseError("field 'completions' must be a nonempty list of strings", line)
    return CompletionRecord(prompt_id=_string(obj, "prompt_id", line), completions=list(completions))


def _attention_from(obj: dict, line: int) -> AttentionRecord:
    weights = _field(obj, "weights", line)
    if not isinstance(weights, list) or not weights:
        raise ParseError("field 'weights' must be a nonempty list of rows", line)
    rows: list[list[float]] = []
    width = None
    for row in weights:
        if not isinstance(row, list) or not row:
            raise ParseError("field 'weights' rows must be nonempty lists", line)
        values = [_number(x, "weights", line) for x in row]
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError("field 'weights' rows must share one length", line)
        if any(v < 0.0 for v in values):
            raise ParseError("field 'weights' entries must be nonnegative", line)
        if abs(sum(values) - 1.0) > ATTENTION_ROW_TOL:
            raise ParseError(
                f"field 'weights' rows must sum to 1 within {ATTENTION_ROW_TOL}", line
            )
        rows.append(values)
    return AttentionRecord(
        layer=_integer(obj, "layer", line),
        head=_integer(obj, "head", line),
        weights=rows,
    )


_PARSERS = {
    "embedding": _embedding_from,
    "pll": _pll_from,
    "masked_slot": _masked_slot_from,
    "completion": _completion_from,
    "attention": _attention_from,
}


def _iter_lines(stream) -> Iterator[str]:
    if isinstance(stream, bytes):
        yield from stream.decode("utf-8").splitlines()
        return
    if isinstance(stream, str):
        yield from stream.splitlines()
        return
    for raw in stream:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def iter_records(stream) -> Iterator[Record]:
    """Stream records from NDJSON; memory stays proportional to one record.

    Accepts bytes, a string, or any iterable of (byte) lines such as an open
    file.  Blank lines are skipped.  Raises :class:`ParseError` with the
    offending line number on malformed input.
    """
    for lineno, raw in enumerate(_iter_lines(stream), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", lineno)
        kind = obj.get("kind")
        if kind not in _PARSERS:
            raise ParseError(f"unknown kind {kind!r}", lineno)
        yield _PARSERS[kind](obj, lineno)


def parse_records(stream) -> list[Record]:
    """Parse a whole NDJSON stream into a list, preserving order."""
    return list(iter_records(stream))


def record_to_obj(record: Record) -> dict:
    """JSON-ready dict for one record, with the 'kind' discriminator first."""
    if isinstance(record, EmbeddingRecord):
        return {
            "kind": "embedding",
            "id": record.id,
            "group": record.group,
            "text": record.text,
            "vector": list(record.vector),
        }
    if isinstance(record, PLLRecord):
        return {
            "kind": "pll",
            "id": record.id,
            "pair_id": record.pair_id,
            "variant": record.variant,
            "tokens": list(record.tokens),
            "logprobs": list(record.logprobs),
            "modified": list(record.modified),
        }
    if isinstance(record, MaskedSlotRecord):
        return {
            "kind": "masked_slot",
            "template_id": record.template_id,
            "target_word": record.target_word,
            "group_index": record.group_index,
            "logp_target": record.logp_target,
            "logp_prior": record.logp_prior,
        }
    if isinstance(record, CompletionRecord):
        return {
            "kind": "completion",
            "prompt_id": record.prompt_id,
            "completions": list(record.completions),
        }
    if isinstance(record, AttentionRecord):
        return {
            "kind": "attention",
            "layer": record.layer,
            "head": record.head,
            "weights": [list(row) for row in record.weights],
        }
    raise TypeError(f"not an interchange record: {type(record).__name__}")


def _record_line(record: Record) -> str:
    return json.dumps(record_to_obj(record), ensure_ascii=False, separators=(",", ":"))


def write_records(records: Iterable[Record]) -> bytes:
    """Serialize records to NDJSON bytes (UTF-8, LF endings)."""
    return "".join(_record_line(r) + "\n" for r in records).encode("utf-8")


def dump_records(records: Iterable[Record], fp: IO[bytes]) -> None:
    """Write records one line at a time to a binary file object."""
    for record in records:
        fp.write((_record_line(record) + "\n").encode("utf-8"))


# --------------------------------------------------------------------------
# Dataset catalog
# --------------------------------------------------------------------------

DATASET_SCHEMAS = {
    "counterfactual_pairs": ("sentence_a", "sentence_b"),
    "prompts": ("prompt",),
    "annotated_sentences": ("sentence", "label"),
}

DATASET_FORMATS = ("csv", "ndjson")


class CounterfactualPair(NamedTuple):
    sentence_a: str
    sentence_b: str


class PromptRow(NamedTuple):
    prompt: str


class AnnotatedSentence(NamedTuple):
    sentence: str
    label: str


_ROW_TYPES = {
    "counterfactual_pairs": CounterfactualPair,
    "prompts": PromptRow,
    "annotated_sentences": AnnotatedSentence,
}


@dataclass
class DatasetEntry:
    """One concrete dataset configuration registered in the catalog.

    ``columns`` optionally remaps schema fields to source column names,
    e.g. ``{"sentence_a": "Sent_A"}``.
    """

    path: str
    format: str
    schema: str
    columns: dict[str, str] | None = None

    def __post_init__(self):
        if not self.path:
            raise ValueError("dataset entry path must be nonempty")
        if self.format not in DATASET_FORMATS:
            raise ValueError(f"unknown dataset format {self.format!r}")
        if self.schema not in DATASET_SCHEMAS:
            raise ValueError(f"unknown dataset schema {self.schema!r}")


@dataclass
class Catalog:
    """Catalog manifest: dataset name -> config name -> entry."""

    datasets: dict[str, dict[str, DatasetEntry]]
    base_dir: str = "."


def load_catalog(path: str | os.PathLike) -> Catalog:
    """Load a catalog manifest (one JSON object with a 'datasets' map).

    Relative dataset paths are resolved against the manifest's directory.
    """
    with open(path, "r", encoding="utf-8") as fp:
        obj = json.load(fp)
    if not isinstance(obj, dict) or not isinstance(obj.get("datasets"), dict):
        raise SchemaError("catalog manifest must be an object with a 'datasets' map")
    datasets: dict[str, dict[str, DatasetEntry]] = {}
    for name, configs in obj["datasets"].items():
        if not isinstance(configs, dict) or not configs:
            raise SchemaError(f"dataset {name!r} must map config names to entries")
        datasets[name] = {}
        for config, entry in configs.items():
            if not isinstance(entry, dict):
                raise SchemaError(f"entry {name!r}/{config!r} must be an object")
            try:
                datasets[name][config] = DatasetEntry(
                    path=entry.get("path", ""),
                    format=entry.get("format", ""),
                    schema=entry.get("schema", ""),
                    columns=entry.get("columns"),
                )
            except ValueError as exc:
                raise SchemaError(f"entry {name!r}/{config!r}: {exc}") from None
    return Catalog(datasets=datasets, base_dir=os.path.dirname(os.fspath(path)) or ".")


def list_datasets(catalog: Catalog, name: str | None = None) -> list[str]:
    """Sorted dataset names, or sorted config names of one dataset."""
    if name is None:
        return sorted(catalog.datasets)
    if name not in catalog.datasets:
        raise UnknownDatasetError(f"unknown dataset {name!r}")
    return sorted(catalog.datasets[name])


def _entry_path(catalog: Catalog, entry: DatasetEntry) -> str:
    if os.path.isabs(entry.path):
        return entry.path
    return os.path.join(catalog.base_dir, entry.path)


def load_dataset(catalog: Catalog, name: str, config: str) -> list[tuple]:
    """Load one dataset config as typed rows per its declared schema."""
    if name not in catalog.datasets:
        raise UnknownDatasetError(f"unknown dataset {name!r}")
    if config not in catalog.datasets[name]:
        raise UnknownDatasetError(f"unknown config {config!r} for dataset {name!r}")
    entry = catalog.datasets[name][config]
    fields = DATASET_SCHEMAS[entry.schema]
    columns = entry.columns or {}
    source_cols = [columns.get(f, f) for f in fields]
    row_type = _ROW_TYPES[entry.schema]
    path = _entry_path(catalog, entry)
    rows: list[tuple] = []
    if entry.format == "csv":
        with open(path, "r", encoding="utf-8", newline="") as fp:
            reader = csv.DictReader(fp)
            header = reader.fieldnames or []
            for col in source_cols:
                if col not in header:
                    raise SchemaError(f"missing required column {col!r}", row=1)
            for rownum, row in enumerate(reader, start=2):
                values = []
                for col in source_cols:
                    value = row.get(col)
                    if value is None:
                        raise SchemaError(f"missing value for column {col!r}", row=rownum)
                    values.append(value)
                rows.append(row_type(*values))
    else:
        with open(path, "r", encoding="utf-8") as fp:
            for rownum, raw in enumerate(fp, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"malformed JSON: {exc.msg}", row=rownum) from None
                if not isinstance(obj, dict):
                    raise SchemaError("expected a JSON object", row=rownum)
                values = []
                for col in source_cols:
                    if col not in obj or not isinstance(obj[col], str):
                        raise SchemaError(f"missing string field {col!r}", row=rownum)
                    values.append(obj[col])
                rows.append(row_type(*values))
    return rows
