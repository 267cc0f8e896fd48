"""Exporter acceptance smoke: every emitted file validates, WEAT stays finite.

The masked LM here is a locally constructed stand-in (no model hub in this
environment); interchange validity, determinism, and metric plumbing are
what the smoke asserts, not any particular bias direction.
"""

import json
import math
import subprocess
import sys

from biasaudit.interchange import parse_records
from biasaudit.wordsets import math_arts_gender_words
from lmexport.extract import ExportJob, run_job


def _validate(path) -> int:
    with open(path, "rb") as fp:
        return len(parse_records(fp))


def test_exporter_smoke(model_dirs, tmp_path):
    words = math_arts_gender_words()
    lines = []
    for group, key in (("W1", "math"), ("W2", "arts"), ("A1", "male_terms"), ("A2", "female_terms")):
        for word in words[key]:
            lines.append({"id": f"{group}-{word}", "group": group, "text": word})
    emb_in = tmp_path / "words.ndjson"
    emb_in.write_text("".join(json.dumps(obj) + "\n" for obj in lines))

    emitted = {}
    emitted["embed"] = tmp_path / "embeddings.ndjson"
    assert run_job(
        ExportJob(model=model_dirs["mlm"], task="embed",
                  input_path=str(emb_in), output_path=str(emitted["embed"]))
    ) == len(lines)

    pll_in = tmp_path / "pll_in.ndjson"
    pll_in.write_text(
        json.dumps({"pair_id": "p1", "variant": "stereo",
                    "sentence": "the nurse said she was tired", "protected": ["she"]}) + "\n"
        + json.dumps({"pair_id": "p1", "variant": "anti",
                      "sentence": "the nurse said he was tired", "protected": ["he"]}) + "\n"
    )
    emitted["pll"] = tmp_path / "pll.ndjson"
    run_job(ExportJob(model=model_dirs["mlm"], task="pll",
                      input_path=str(pll_in), output_path=str(emitted["pll"])))

    slots_in = tmp_path / "slots_in.ndjson"
    slots_in.write_text(
        "".join(
            json.dumps({"template_id": "t", "template": "[MASK] is a [MASK] .", "target": target,
                        "group_index": index, "fill": "engineer", "mask_index": 0}) + "\n"
            for index, target in enumerate(["he", "she"])
        )
    )
    emitted["masked_slot"] = tmp_path / "slots.ndjson"
    run_job(ExportJob(model=model_dirs["mlm"], task="masked_slot",
                      input_path=str(slots_in), output_path=str(emitted["masked_slot"])))

    prompts_in = tmp_path / "prompts_in.ndjson"
    prompts_in.write_text(json.dumps({"prompt_id": "p", "prompt": "the engineer is"}) + "\n")
    emitted["complete"] = tmp_path / "completions.ndjson"
    run_job(ExportJob(model=model_dirs["clm"], task="complete",
                      input_path=str(prompts_in), output_path=str(emitted["complete"]), k=3, seed=3))

    att_in = tmp_path / "att_in.ndjson"
    att_in.write_text(json.dumps({"text": "the nurse said she was tired"}) + "\n")
    emitted["attention"] = tmp_path / "attention.ndjson"
    run_job(ExportJob(model=model_dirs["mlm"], task="attention",
                      input_path=str(att_in), output_path=str(emitted["attention"])))

    # every emitted file passes interchange validation with zero errors
    counts = {task: _validate(path) for task, path in emitted.items()}
    assert all(count > 0 for count in counts.values()), counts

    # WEAT over the exported word-list embeddings, through the audit CLI
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(
        json.dumps({"metrics": [
            {"metric": "weat", "inputs": {"embeddings": "embeddings.ndjson"},
             "options": {"n_perm": 500}},
        ]})
    )
    report_path = tmp_path / "report.json"
    proc = subprocess.run(
        [sys.executable, "-m", "biasaudit", "audit",
         "--spec", str(spec_path), "--out", str(report_path), "--seed", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads(report_path.read_text())
    (weat_result,) = report["results"]
    assert weat_result["ok"], weat_result
    effect = weat_result["values"]["effect_size"]
    assert math.isfinite(effect)
    print(f"[acceptance] PASS: exporter smoke: {sum(counts.values())} records validated, "
          f"weat effect {effect:+.4f} (sign not asserted)")
