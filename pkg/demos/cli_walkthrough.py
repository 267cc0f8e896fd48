"""End-to-end CLI walkthrough: build an audit spec and run every subcommand.

Writes inputs into ./demo_output/ and shells out to `python -m biasaudit`.
"""

import json
import math
import subprocess
import sys
from pathlib import Path

OUT = Path(__file__).parent / "demo_output"
OUT.mkdir(exist_ok=True)


def run(*args):
    cmd = [sys.executable, "-m", "biasaudit", *args]
    print(f"$ biasaudit {' '.join(args)}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.stdout:
        print(proc.stdout, end="")
    if proc.returncode != 0:
        print(proc.stderr, end="")
    print(f"(exit {proc.returncode})\n")


# --- inputs -----------------------------------------------------------------
embeddings = [
    {"kind": "embedding", "id": "m", "group": "A1", "text": "male-ish", "vector": [1.0, 0.1]},
    {"kind": "embedding", "id": "f", "group": "A2", "text": "female-ish", "vector": [0.1, 1.0]},
    {"kind": "embedding", "id": "t1", "group": "W1", "text": "topic one", "vector": [1.0, 0.0]},
    {"kind": "embedding", "id": "t2", "group": "W2", "text": "topic two", "vector": [0.0, 1.0]},
]
(OUT / "embeddings.ndjson").write_text(
    "".join(json.dumps(r) + "\n" for r in embeddings)
)
slots = [
    {"kind": "masked_slot", "template_id": "t", "target_word": "he", "group_index": 0,
     "logp_target": math.log(0.4), "logp_prior": math.log(0.2)},
    {"kind": "masked_slot", "template_id": "t", "target_word": "she", "group_index": 1,
     "logp_target": math.log(0.1), "logp_prior": math.log(0.2)},
]
(OUT / "slots.ndjson").write_text("".join(json.dumps(r) + "\n" for r in slots))

spec = {
    "metrics": [
        {"metric": "weat", "inputs": {"embeddings": "embeddings.ndjson"},
         "options": {"n_perm": 1000}},
        {"metric": "lpbs", "inputs": {"slots": "slots.ndjson"}, "options": {}},
    ]
}
(OUT / "spec.json").write_text(json.dumps(spec, indent=2))

texts = [{"text": "He thanked his sister."}, {"text": "No gendered words here."}]
(OUT / "texts.ndjson").write_text("".join(json.dumps(r) + "\n" for r in texts))
(OUT / "pairs.json").write_text(json.dumps([["he", "she"], ["his", "hers"],
                                            ["brother", "sister"]]))

catalog = {
    "datasets": {
        "demo": {"default": {"path": "texts.ndjson", "format": "ndjson", "schema": "prompts",
                             "columns": {"prompt": "text"}}},
    }
}
(OUT / "catalog.json").write_text(json.dumps(catalog, indent=2))

# --- subcommands ------------------------------------------------------------
run("list-datasets", "--catalog", str(OUT / "catalog.json"))
run("audit", "--spec", str(OUT / "spec.json"), "--out", str(OUT / "report.json"),
    "--seed", "7")
print((OUT / "report.json").read_text())
run("audit", "--spec", str(OUT / "spec.json"), "--out", str(OUT / "report.md"),
    "--format", "md", "--seed", "7")
print((OUT / "report.md").read_text())
run("augment", "--input", str(OUT / "texts.ndjson"), "--pairs", str(OUT / "pairs.json"),
    "--mode", "two-sided", "--columns", "text", "--out", str(OUT / "augmented.ndjson"))
print((OUT / "augmented.ndjson").read_text())
run("grad-check", "--trials", "10")
