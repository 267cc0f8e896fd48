"""Model-output extraction tasks.

Each task reads NDJSON job lines, runs the model in inference mode, and
yields interchange record dicts.  Per-line failures (tokenization errors,
protected words missing from their sentence, multi-subword targets) are
reported on stderr and the line is skipped; the batch keeps going.

The embedding site is the first-position vector of the final hidden layer
by default; ``pooling="mean"`` switches to an attention-masked mean.
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass
from typing import Iterator

import torch
from transformers import AutoModel, AutoModelForCausalLM, AutoModelForMaskedLM, AutoTokenizer

TASKS = ("embed", "pll", "masked_slot", "complete", "attention")

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass
class ExportJob:
    """One extraction run: a model, a task, and its input/output paths."""

    model: str
    task: str
    input_path: str
    output_path: str
    k: int = 3
    max_length: int = 128
    pooling: str = "first"  # "first" | "mean"
    seed: int = 0
    pll_mode: str = "cps"  # "cps" | "aul"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.pooling not in ("first", "mean"):
            raise ValueError(f"pooling must be 'first' or 'mean', got {self.pooling!r}")
        if self.pll_mode not in ("cps", "aul"):
            raise ValueError(f"pll_mode must be 'cps' or 'aul', got {self.pll_mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def _warn(lineno: int, message: str) -> None:
    print(f"lmexport: line {lineno}: {message} (skipped)", file=sys.stderr)


def _job_lines(path: str) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line:
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError(f"line {lineno}: expected a JSON object")
            yield lineno, obj


def _need(obj: dict, field: str, lineno: int):
    if field not in obj:
        raise ValueError(f"line {lineno}: missing field {field!r}")
    return obj[field]


def export_embeddings(job: ExportJob) -> Iterator[dict]:
    """One embedding record per (id, group, text) line."""
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModel.from_pretrained(job.model).eval()
    for lineno, obj in _job_lines(job.input_path):
        text = str(_need(obj, "text", lineno))
        try:
            enc = tokenizer(text, return_tensors="pt", truncation=True, max_length=job.max_length)
        except Exception as exc:  # tokenization failure: skip the line
            _warn(lineno, f"tokenization failed: {exc}")
            continue
        with torch.inference_mode():
            hidden = model(**enc).last_hidden_state[0]
        if job.pooling == "first":
            vector = hidden[0]
        else:
            mask = enc["attention_mask"][0].unsqueeze(-1).to(hidden.dtype)
            vector = (hidden * mask).sum(dim=0) / mask.sum()
        yield {
            "kind": "embedding",
            "id": str(_need(obj, "id", lineno)),
            "group": str(_need(obj, "group", lineno)),
            "text": text,
            "vector": [float(x) for x in vector],
        }


def _protected_spans(sentence: str, protected: list[str], lineno: int) -> list[tuple[int, int]]:
    spans = []
    lowered = sentence.lower()
    for word in protected:
        target = word.lower()
        found = False
        for match in _WORD_RE.finditer(lowered):
            if match.group(0) == target:
                spans.append(match.span())
                found = True
        if not found:
            raise ValueError(f"protected word {word!r} not found in sentence")
    return spans


def export_pll(job: ExportJob) -> Iterator[dict]:
    """Per-token log-probabilities of each sentence, with protected-token flags.

    ``cps`` mode scores token i from a forward pass with position i masked;
    ``aul`` mode scores every token from one unmasked pass.
    """
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    if not getattr(tokenizer, "is_fast", False):
        raise ValueError("pll export needs a fast tokenizer (offset mappings)")
    model = AutoModelForMaskedLM.from_pretrained(job.model).eval()
    mask_id = tokenizer.mask_token_id
    for lineno, obj in _job_lines(job.input_path):
        sentence = str(_need(obj, "sentence", lineno))
        variant = str(_need(obj, "variant", lineno))
        if variant not in ("stereo", "anti"):
            _warn(lineno, f"variant must be 'stereo' or 'anti', got {variant!r}")
            continue
        protected = [str(w) for w in obj.get("protected", [])]
        try:
            spans = _protected_spans(sentence, protected, lineno)
        except ValueError as exc:
            _warn(lineno, str(exc))
            continue
        enc = tokenizer(
            sentence,
            return_offsets_mapping=True,
            truncation=True,
            max_length=job.max_length,
            return_tensors="pt",
        )
        ids = enc["input_ids"][0]
        offsets = enc["offset_mapping"][0].tolist()
        content = [i for i, (start, end) in enumerate(offsets) if end > start]
        if not content:
            _warn(lineno, "sentence has no content tokens")
            continue
        modified = [
            any(start < p_end and p_start < end for p_start, p_end in spans)
            for start, end in (offsets[i] for i in content)
        ]
        with torch.inference_mode():
            if job.pll_mode == "aul":
                logits = model(input_ids=ids.unsqueeze(0)).logits[0]
                logprobs = torch.log_softmax(logits, dim=-1)
                scores = [float(logprobs[i, ids[i]]) for i in content]
            else:
                batch = ids.repeat(len(content), 1)
                for row, position in enumerate(content):
                    batch[row, position] = mask_id
                logits = model(input_ids=batch).logits
                scores = []
                for row, position in enumerate(content):
                    logprobs = torch.log_softmax(logits[row, position], dim=-1)
                    scores.append(float(logprobs[ids[position]]))
        yield {
            "kind": "pll",
            "id": str(obj.get("id", f"line-{lineno}")),
            "pair_id": str(_need(obj, "pair_id", lineno)),
            "variant": variant,
            "tokens": tokenizer.convert_ids_to_tokens([int(ids[i]) for i in content]),
            "logprobs": [min(s, 0.0) for s in scores],
            "modified": modified,
        }


def _single_token_id(tokenizer, word: str) -> int | None:
    ids = tokenizer(word, add_special_tokens=False)["input_ids"]
    return ids[0] if len(ids) == 1 else None


def _mask_positions(ids: torch.Tensor, mask_id: int) -> list[int]:
    return [i for i, token in enumerate(ids.tolist()) if token == mask_id]


def export_masked_slots(job: ExportJob) -> Iterator[dict]:
    """Target and prior log-probabilities for two-mask template lines.

    The template holds two mask tokens; ``mask_index`` picks the target
    slot, the other slot is filled with the ``fill`` word for the target
    pass and stays masked for the prior pass.
    """
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModelForMaskedLM.from_pretrained(job.model).eval()
    mask_token = tokenizer.mask_token
    mask_id = tokenizer.mask_token_id

    def slot_logprob(sentence: str, slot: int, target_id: int, lineno: int) -> float | None:
        enc = tokenizer(sentence, return_tensors="pt", truncation=True, max_length=job.max_length)
        positions = _mask_positions(enc["input_ids"][0], mask_id)
        if slot >= len(positions):
            _warn(lineno, f"expected mask slot {slot} in {sentence!r}")
            return None
        with torch.inference_mode():
            logits = model(**enc).logits[0, positions[slot]]
        return float(torch.log_softmax(logits, dim=-1)[target_id])

    for lineno, obj in _job_lines(job.input_path):
        template = str(_need(obj, "template", lineno))
        target = str(_need(obj, "target", lineno))
        fill = str(_need(obj, "fill", lineno))
        mask_index = int(_need(obj, "mask_index", lineno))
        group_index = int(_need(obj, "group_index", lineno))
        if template.count(mask_token) != 2:
            _warn(lineno, f"template must contain exactly two {mask_token} slots")
            continue
        if mask_index not in (0, 1):
            _warn(lineno, "mask_index must be 0 or 1")
            continue
        target_id = _single_token_id(tokenizer, target)
        if target_id is None:
            _warn(lineno, f"target {target!r} is not a single token")
            continue
        # fill the non-target slot; the remaining mask is the target slot
        parts = template.split(mask_token)
        if mask_index == 0:
            filled = parts[0] + mask_token + parts[1] + fill + parts[2]
        else:
            filled = parts[0] + fill + parts[1] + mask_token + parts[2]
        logp_target = slot_logprob(filled, 0, target_id, lineno)
        logp_prior = slot_logprob(template, mask_index, target_id, lineno)
        if logp_target is None or logp_prior is None:
            continue
        yield {
            "kind": "masked_slot",
            "template_id": str(_need(obj, "template_id", lineno)),
            "target_word": target,
            "group_index": group_index,
            "logp_target": min(logp_target, 0.0),
            "logp_prior": min(logp_prior, 0.0),
        }


def export_completions(job: ExportJob) -> Iterator[dict]:
    """Top-k sampled completions per prompt, prompt prefix stripped."""
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModelForCausalLM.from_pretrained(job.model).eval()
    for lineno, obj in _job_lines(job.input_path):
        prompt = str(_need(obj, "prompt", lineno))
        enc = tokenizer(prompt, return_tensors="pt", truncation=True, max_length=job.max_length)
        prompt_len = enc["input_ids"].shape[1]
        torch.manual_seed(job.seed * 100_003 + lineno)
        try:
            with torch.inference_mode():
                generated = model.generate(
                    input_ids=enc["input_ids"],
                    attention_mask=enc["attention_mask"],
                    do_sample=True,
                    num_return_sequences=job.k,
                    max_length=min(job.max_length, prompt_len + 24),
                    pad_token_id=tokenizer.pad_token_id,
                )
        except Exception as exc:  # generation failure: skip the prompt
            _warn(lineno, f"generation failed: {exc}")
            continue
        completions = [
            tokenizer.decode(seq[prompt_len:], skip_special_tokens=True) for seq in generated
        ]
        yield {
            "kind": "completion",
            "prompt_id": str(_need(obj, "prompt_id", lineno)),
            "completions": completions,
        }


def export_attention(job: ExportJob) -> Iterator[dict]:
    """Attention matrices of every layer and head for each input line.

    Rows are renormalized in float64 so they stay row-stochastic within
    the interchange tolerance after float32 inference.
    """
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModel.from_pretrained(job.model, attn_implementation="eager").eval()
    for lineno, obj in _job_lines(job.input_path):
        text = str(_need(obj, "text", lineno))
        enc = tokenizer(text, return_tensors="pt", truncation=True, max_length=job.max_length)
        with torch.inference_mode():
            attentions = model(**enc, output_attentions=True).attentions
        for layer, tensor in enumerate(attentions):
            heads = tensor[0].to(torch.float64)
            for head in range(heads.shape[0]):
                weights = heads[head]
                weights = weights / weights.sum(dim=-1, keepdim=True)
                yield {
                    "kind": "attention",
                    "layer": layer,
                    "head": head,
                    "weights": [[float(x) for x in row] for row in weights],
                }


_RUNNERS = {
    "embed": export_embeddings,
    "pll": export_pll,
    "masked_slot": export_masked_slots,
    "complete": export_completions,
    "attention": export_attention,
}


def run_job(job: ExportJob) -> int:
    """Run a job, writing NDJSON to the output path; returns records written."""
    written = 0
    with open(job.output_path, "w", encoding="utf-8", newline="\n") as fp:
        for record in _RUNNERS[job.task](job):
            fp.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
            written += 1
    return written
