"""Command-line entry point: batch audits, augmentation, subspace debiasing, grad checks.

Exit codes: 0 success or partial success, 1 usage error, 2 input parse
error, 3 total audit (or gradient-check) failure.

Reports are deterministic byte-for-byte given the same inputs and seed.  The
provenance timestamp is taken from the SOURCE_DATE_EPOCH environment
variable when set and is null otherwise, so default runs never embed wall
clock time.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

from . import __version__
from .debias_ops import CounterfactualLexicon, fit_bias_subspace, flip_text, project_out
from .embed_metrics import group_embeddings, weat
from .gentext_metrics import DemLexicon, dem_rep, honest, normalize_and_distance, stereo_assoc
from .gradcheck import KERNEL_NAMES, run_suite
from .interchange import (
    CompletionRecord,
    EmbeddingRecord,
    MaskedSlotRecord,
    ParseError,
    PLLRecord,
    SchemaError,
    UnknownDatasetError,
    dump_records,
    iter_records,
    list_datasets,
    load_catalog,
    parse_records,
)
from .prob_metrics import cbs, lpbs, pll_bias_rate

__all__ = ["main", "run_audit", "render_report", "load_audit_spec", "AuditSpec", "MetricReport"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_FAILED = 3

METRIC_NAMES = ("weat", "lpbs", "cbs", "cps", "aul", "dem_rep", "stereo_assoc", "honest")

REPORT_FORMATS = ("json", "csv", "md")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors must exit 1
        raise _UsageError(message)


# --------------------------------------------------------------------------
# Audit spec and report
# --------------------------------------------------------------------------


@dataclass
class MetricRequest:
    metric: str
    inputs: dict[str, str]
    options: dict


@dataclass
class AuditSpec:
    metrics: list[MetricRequest]


@dataclass
class MetricResult:
    index: int
    metric: str
    ok: bool
    values: dict | None = None
    error: str | None = None


@dataclass
class MetricReport:
    results: list[MetricResult]
    provenance: dict
    timestamp: str | None


def load_audit_spec(path: str) -> AuditSpec:
    """Load and validate the audit spec: {"metrics": [{metric, inputs, options}]}."""
    with open(path, "r", encoding="utf-8") as fp:
        try:
            obj = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ParseError(f"audit spec is not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("metrics"), list):
        raise ParseError("audit spec must be an object with a 'metrics' list")
    requests = []
    for i, entry in enumerate(obj["metrics"]):
        if not isinstance(entry, dict):
            raise ParseError(f"metrics[{i}] must be an object")
        metric = entry.get("metric")
        if metric not in METRIC_NAMES:
            raise ParseError(f"metrics[{i}]: unknown metric {metric!r}")
        inputs = entry.get("inputs", {})
        if not isinstance(inputs, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in inputs.items()
        ):
            raise ParseError(f"metrics[{i}]: 'inputs' must map names to file paths")
        paths = list(inputs.values())
        if len(set(paths)) != len(paths):
            raise ParseError(f"metrics[{i}]: input paths must be distinct within a request")
        options = entry.get("options", {})
        if not isinstance(options, dict):
            raise ParseError(f"metrics[{i}]: 'options' must be an object")
        requests.append(MetricRequest(metric=metric, inputs=inputs, options=options))
    return AuditSpec(metrics=requests)


class _AuditContext:
    def __init__(self, base_dir: str, seed: int):
        self.base_dir = base_dir
        self.seed = seed
        self.digests: dict[str, str] = {}

    def read_bytes(self, path: str) -> bytes:
        resolved = path if os.path.isabs(path) else os.path.join(self.base_dir, path)
        with open(resolved, "rb") as fp:
            payload = fp.read()
        self.digests[path] = hashlib.sha256(payload).hexdigest()
        return payload

    def read_text(self, path: str) -> str:
        return self.read_bytes(path).decode("utf-8")

    def read_json(self, path: str):
        return json.loads(self.read_text(path))

    def read_records(self, path: str, kind):
        return [r for r in parse_records(self.read_bytes(path)) if isinstance(r, kind)]


def _input_path(request: MetricRequest, name: str) -> str:
    if name not in request.inputs:
        raise ValueError(f"metric {request.metric!r} requires input {name!r}")
    return request.inputs[name]


def _run_weat(request: MetricRequest, ctx: _AuditContext) -> dict:
    records = ctx.read_records(_input_path(request, "embeddings"), EmbeddingRecord)
    labels_opt = request.options.get("labels", {})
    labels = tuple(labels_opt.get(k, d) for k, d in
                   (("a1", "A1"), ("a2", "A2"), ("w1", "W1"), ("w2", "W2")))
    inputs = group_embeddings(records, labels)
    n_perm = request.options.get("n_perm")
    result = weat(inputs, n_perm=n_perm, seed=ctx.seed)
    values: dict = {"effect_size": result.effect_size}
    if result.p_value is not None:
        values.update(
            p_value=result.p_value,
            exact=result.exact,
            n_permutations_used=result.n_permutations_used,
        )
    return values


def _run_lpbs(request: MetricRequest, ctx: _AuditContext) -> dict:
    slots = ctx.read_records(_input_path(request, "slots"), MaskedSlotRecord)
    scores = lpbs(slots)
    return {"mean": scores.mean, "per_template": scores.per_template}


def _run_cbs(request: MetricRequest, ctx: _AuditContext) -> dict:
    slots = ctx.read_records(_input_path(request, "slots"), MaskedSlotRecord)
    scores = cbs(slots)
    return {"mean": scores.mean, "per_template": scores.per_template}


def _run_pll(request: MetricRequest, ctx: _AuditContext) -> dict:
    records = ctx.read_records(_input_path(request, "pll"), PLLRecord)
    scores, rate = pll_bias_rate(records, scorer=request.metric)
    return {
        "bias_rate": rate,
        "pairs": [
            {
                "pair_id": s.pair_id,
                "score_stereo": s.score_stereo,
                "score_anti": s.score_anti,
                "biased": s.biased,
            }
            for s in scores
        ],
    }


def _load_dem_lexicon(ctx: _AuditContext, path: str) -> DemLexicon:
    obj = ctx.read_json(path)
    if not isinstance(obj, dict):
        raise ParseError("demographic lexicon must be a JSON map group -> word list")
    return DemLexicon(groups=obj)


def _distance_values(counts: dict, options: dict) -> dict:
    values: dict = {"counts": counts}
    reference = options.get("reference")
    if reference is not None:
        metric = options.get("distance", "tv")
        values["distance"] = normalize_and_distance(counts, reference, metric=metric)
        values["distance_metric"] = metric
    return values


def _read_texts(ctx: _AuditContext, path: str) -> list[str]:
    return ctx.read_text(path).splitlines()


def _run_dem_rep(request: MetricRequest, ctx: _AuditContext) -> dict:
    texts = _read_texts(ctx, _input_path(request, "texts"))
    lexicon = _load_dem_lexicon(ctx, _input_path(request, "lexicon"))
    return _distance_values(dem_rep(texts, lexicon), request.options)


def _run_stereo_assoc(request: MetricRequest, ctx: _AuditContext) -> dict:
    target = request.options.get("target")
    if not isinstance(target, str) or not target:
        raise ValueError("stereo_assoc requires a 'target' word option")
    texts = _read_texts(ctx, _input_path(request, "texts"))
    lexicon = _load_dem_lexicon(ctx, _input_path(request, "lexicon"))
    values = _distance_values(stereo_assoc(texts, lexicon, target), request.options)
    values["target"] = target
    return values


def _run_honest(request: MetricRequest, ctx: _AuditContext) -> dict:
    records = ctx.read_records(_input_path(request, "completions"), CompletionRecord)
    lexicon = ctx.read_json(_input_path(request, "lexicon"))
    if not isinstance(lexicon, list) or not all(isinstance(w, str) for w in lexicon):
        raise ParseError("hurt lexicon must be a JSON list of words")
    if not records:
        raise ValueError("no completion records in input")
    return {
        "score": honest(records, lexicon),
        "k": len(records[0].completions),
        "n_prompts": len(records),
    }


_METRIC_RUNNERS = {
    "weat": _run_weat,
    "lpbs": _run_lpbs,
    "cbs": _run_cbs,
    "cps": _run_pll,
    "aul": _run_pll,
    "dem_rep": _run_dem_rep,
    "stereo_assoc": _run_stereo_assoc,
    "honest": _run_honest,
}


def _timestamp() -> str | None:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def run_audit(spec: AuditSpec, base_dir: str = ".", seed: int = 0) -> MetricReport:
    """Run every metric request; failures become error entries, not aborts."""
    ctx = _AuditContext(base_dir, seed)
    results = []
    for index, request in enumerate(spec.metrics):
        try:
            values = _METRIC_RUNNERS[request.metric](request, ctx)
            results.append(MetricResult(index=index, metric=request.metric, ok=True, values=values))
        except (ValueError, KeyError, OSError) as exc:
            results.append(
                MetricResult(index=index, metric=request.metric, ok=False, error=str(exc))
            )
    provenance = {
        "inputs": dict(sorted(ctx.digests.items())),
        "seed": seed,
        "version": __version__,
    }
    return MetricReport(results=results, provenance=provenance, timestamp=_timestamp())


def _report_obj(report: MetricReport) -> dict:
    results = []
    for r in report.results:
        entry: dict = {"index": r.index, "metric": r.metric, "ok": r.ok}
        if r.ok:
            entry["values"] = r.values
        else:
            entry["error"] = r.error
        results.append(entry)
    return {
        "provenance": report.provenance,
        "results": results,
        "timestamp": report.timestamp,
    }


def _headline(result: MetricResult) -> str:
    if not result.ok:
        return ""
    keys = ("effect_size", "mean", "bias_rate", "score", "distance")
    for key in keys:
        if result.values and key in result.values:
            return f"{key}={result.values[key]!r}"
    return json.dumps(result.values, sort_keys=True)


def render_report(report: MetricReport, format: str = "json") -> bytes:
    """Render a report as canonical JSON, CSV (one row per result), or a table."""
    if format == "json":
        text = json.dumps(_report_obj(report), sort_keys=True, indent=2, ensure_ascii=False)
        return (text + "\n").encode("utf-8")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "metric", "ok", "value", "error"])
        for r in report.results:
            value = json.dumps(r.values, sort_keys=True) if r.ok else ""
            writer.writerow([r.index, r.metric, str(r.ok).lower(), value, r.error or ""])
        return buf.getvalue().encode("utf-8")
    if format == "md":
        lines = ["| index | metric | ok | summary |", "| --- | --- | --- | --- |"]
        for r in report.results:
            summary = _headline(r) if r.ok else (r.error or "")
            lines.append(f"| {r.index} | {r.metric} | {str(r.ok).lower()} | {summary} |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")


# --------------------------------------------------------------------------
# Subcommand handlers
# --------------------------------------------------------------------------


def _cmd_audit(args) -> int:
    spec = load_audit_spec(args.spec)
    report = run_audit(spec, base_dir=os.path.dirname(args.spec) or ".", seed=args.seed)
    payload = render_report(report, args.format)
    with open(args.out, "wb") as fp:
        fp.write(payload)
    if report.results and all(not r.ok for r in report.results):
        print("audit: every metric request failed", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def _load_pairs_file(path: str) -> CounterfactualLexicon:
    with open(path, "r", encoding="utf-8") as fp:
        obj = json.load(fp)
    if isinstance(obj, dict):
        pairs = [(a, b) for a, b in obj.items()]
    elif isinstance(obj, list):
        pairs = [tuple(p) for p in obj]
        if not all(len(p) == 2 for p in pairs):
            raise ParseError("each counterfactual pair must have exactly two words")
    else:
        raise ParseError("pairs file must be a JSON list of pairs or a word map")
    return CounterfactualLexicon(pairs=pairs)


def _flip_fields(obj: dict, columns: list[str] | None, lexicon, lineno: int) -> dict:
    flipped = dict(obj)
    if columns is None:
        names = [k for k, v in obj.items() if isinstance(v, str)]
    else:
        names = columns
    for name in names:
        if name not in obj:
            raise ParseError(f"missing column {name!r}", lineno)
        if not isinstance(obj[name], str):
            raise ParseError(f"column {name!r} is not a string", lineno)
        flipped[name] = flip_text(obj[name], lexicon)
    return flipped


def _cmd_augment(args) -> int:
    lexicon = _load_pairs_file(args.pairs)
    columns = args.columns.split(",") if args.columns else None
    mode = args.mode.replace("-", "_")
    originals: list[dict] = []
    flipped: list[dict] = []
    with open(args.input, "r", encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", lineno)
            originals.append(obj)
            flipped.append(_flip_fields(obj, columns, lexicon, lineno))
    if mode == "one_sided":
        output = flipped
    else:
        output = originals + [f for o, f in zip(originals, flipped) if f != o]
    with open(args.out, "w", encoding="utf-8", newline="\n") as fp:
        for obj in output:
            fp.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    return EXIT_OK


def _cmd_debias_embeddings(args) -> int:
    with open(args.pairs_embeddings, "rb") as fp:
        pair_records = [r for r in parse_records(fp) if isinstance(r, EmbeddingRecord)]
    by_id: dict[str, list[EmbeddingRecord]] = {}
    for rec in pair_records:
        by_id.setdefault(rec.id, []).append(rec)
    pairs = []
    for pair_id, members in by_id.items():
        if len(members) != 2:
            raise ParseError(
                f"pair id {pair_id!r} has {len(members)} embedding records, expected 2"
            )
        members = sorted(members, key=lambda r: r.group)
        pairs.append((members[0].vector, members[1].vector))
    subspace = fit_bias_subspace(pairs, args.components)
    if args.subspace_out:
        with open(args.subspace_out, "w", encoding="utf-8", newline="\n") as fp:
            json.dump(subspace.to_json_obj(), fp, sort_keys=True, indent=2)
            fp.write("\n")

    def debiased():
        with open(args.input, "rb") as fp:
            for rec in iter_records(fp):
                if isinstance(rec, EmbeddingRecord):
                    rec.vector = [float(x) for x in project_out(rec.vector, subspace)]
                yield rec

    with open(args.out, "wb") as fp:
        dump_records(debiased(), fp)
    return EXIT_OK


def _cmd_list_datasets(args) -> int:
    catalog = load_catalog(args.catalog)
    for name in list_datasets(catalog, args.dataset):
        print(name)
    return EXIT_OK


def _cmd_grad_check(args) -> int:
    kernels = [args.kernel] if args.kernel else None
    reports = run_suite(kernels, trials=args.trials, seed=args.seed)
    failed = False
    for rep in reports:
        status = "ok" if rep.passed else "FAIL"
        print(f"{rep.kernel:<16} {status:>4}  trials={rep.trials}  max_rel_err={rep.max_rel_error:.3e}")
        failed = failed or not rep.passed
    return EXIT_FAILED if failed else EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="biasaudit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_list = sub.add_parser("list-datasets", help="list catalog datasets or configs")
    p_list.add_argument("--catalog", default="catalog.json")
    p_list.add_argument("--dataset", default=None)
    p_list.set_defaults(handler=_cmd_list_datasets)

    p_audit = sub.add_parser("audit", help="run a batch of bias metrics")
    p_audit.add_argument("--spec", required=True)
    p_audit.add_argument("--out", required=True)
    p_audit.add_argument("--format", choices=REPORT_FORMATS, default="json")
    p_audit.add_argument("--seed", type=int, default=0)
    p_audit.set_defaults(handler=_cmd_audit)

    p_aug = sub.add_parser("augment", help="counterfactually augment NDJSON text records")
    p_aug.add_argument("--input", required=True)
    p_aug.add_argument("--pairs", required=True)
    p_aug.add_argument("--mode", choices=("one-sided", "two-sided"), required=True)
    p_aug.add_argument("--columns", default=None)
    p_aug.add_argument("--out", required=True)
    p_aug.set_defaults(handler=_cmd_augment)

    p_deb = sub.add_parser("debias-embeddings", help="project embeddings off a bias subspace")
    p_deb.add_argument("--pairs-embeddings", required=True)
    p_deb.add_argument("--components", type=int, required=True)
    p_deb.add_argument("--input", required=True)
    p_deb.add_argument("--out", required=True)
    p_deb.add_argument("--subspace-out", default=None)
    p_deb.set_defaults(handler=_cmd_debias_embeddings)

    p_grad = sub.add_parser("grad-check", help="verify kernel gradients by finite differences")
    p_grad.add_argument("--kernel", choices=KERNEL_NAMES, default=None)
    p_grad.add_argument("--trials", type=int, default=100)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(handler=_cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except (ParseError, SchemaError, UnknownDatasetError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
