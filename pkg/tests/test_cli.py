import json
from pathlib import Path

import numpy as np
import pytest

from biasaudit.cli import (
    EXIT_FAILED,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_USAGE,
    AuditSpec,
    MetricRequest,
    load_audit_spec,
    main,
    render_report,
    run_audit,
)
from biasaudit.debias_ops import BiasSubspace
from biasaudit.interchange import EmbeddingRecord, parse_records

FIXTURES = Path(__file__).parent / "fixtures"


class TestRunAudit:
    def test_weat_fixture_effect_size(self):
        spec = AuditSpec(
            metrics=[
                MetricRequest(
                    metric="weat", inputs={"embeddings": "weat2d.ndjson"}, options={"n_perm": 50}
                )
            ]
        )
        report = run_audit(spec, base_dir=str(FIXTURES), seed=0)
        (result,) = report.results
        assert result.ok
        assert result.values["effect_size"] == pytest.approx(2.0, abs=1e-12)
        assert result.values["p_value"] == 0.5
        assert report.provenance["seed"] == 0
        assert "weat2d.ndjson" in report.provenance["inputs"]

    def test_zero_requests(self):
        report = run_audit(AuditSpec(metrics=[]), base_dir=str(FIXTURES), seed=0)
        assert report.results == []

    def test_missing_file_is_partial_failure(self):
        spec = AuditSpec(
            metrics=[
                MetricRequest(metric="weat", inputs={"embeddings": "gone.ndjson"}, options={}),
                MetricRequest(
                    metric="honest",
                    inputs={"completions": "completions.ndjson", "lexicon": "hurt_lexicon.json"},
                    options={},
                ),
            ]
        )
        report = run_audit(spec, base_dir=str(FIXTURES), seed=0)
        assert report.results[0].ok is False
        assert report.results[0].error
        assert report.results[1].ok is True
        assert report.results[1].values["score"] == pytest.approx(2 / 3, abs=1e-12)

    def test_all_metric_kinds_on_bundled_spec(self):
        spec = load_audit_spec(str(FIXTURES / "audit_spec.json"))
        report = run_audit(spec, base_dir=str(FIXTURES), seed=11)
        assert all(r.ok for r in report.results)
        by_index = {r.index: r.values for r in report.results}
        # templates score ln 4 and -ln 2, so the mean is ln(2)/2
        assert by_index[2]["mean"] == pytest.approx(np.log(2) / 2, rel=1e-9)
        assert by_index[4]["bias_rate"] == 0.7
        assert by_index[7]["counts"] == {"male": 0, "female": 1}
        assert by_index[8]["score"] == pytest.approx(2 / 3, abs=1e-12)

    def test_deterministic_given_seed(self):
        spec = load_audit_spec(str(FIXTURES / "audit_spec.json"))
        first = render_report(run_audit(spec, base_dir=str(FIXTURES), seed=3), "json")
        second = render_report(run_audit(spec, base_dir=str(FIXTURES), seed=3), "json")
        assert first == second
        other_seed = render_report(run_audit(spec, base_dir=str(FIXTURES), seed=4), "json")
        assert first != other_seed  # the Monte Carlo p-value moves with the seed


class TestRenderReport:
    def test_empty_csv_has_header_only(self):
        report = run_audit(AuditSpec(metrics=[]), base_dir=str(FIXTURES), seed=0)
        assert render_report(report, "csv") == b"index,metric,ok,value,error\n"

    def test_json_is_canonical(self):
        spec = AuditSpec(
            metrics=[
                MetricRequest(metric="weat", inputs={"embeddings": "weat2d.ndjson"}, options={})
            ]
        )
        report = run_audit(spec, base_dir=str(FIXTURES), seed=0)
        payload = render_report(report, "json")
        assert payload == render_report(report, "json")
        obj = json.loads(payload)
        assert obj["results"][0]["values"]["effect_size"] == 2.0
        assert obj["timestamp"] is None

    def test_md_table(self):
        spec = AuditSpec(
            metrics=[
                MetricRequest(metric="weat", inputs={"embeddings": "weat2d.ndjson"}, options={})
            ]
        )
        report = run_audit(spec, base_dir=str(FIXTURES), seed=0)
        text = render_report(report, "md").decode()
        assert text.splitlines()[0] == "| index | metric | ok | summary |"
        assert "effect_size" in text

    def test_unknown_format(self):
        report = run_audit(AuditSpec(metrics=[]), base_dir=str(FIXTURES), seed=0)
        with pytest.raises(ValueError, match="format"):
            render_report(report, "yaml")


class TestAuditCommand:
    def test_audit_writes_report(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            ["audit", "--spec", str(FIXTURES / "audit_spec.json"), "--out", str(out), "--seed", "5"]
        )
        assert code == EXIT_OK
        obj = json.loads(out.read_text())
        assert len(obj["results"]) == 9

    def test_total_failure_exit_code(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(
            json.dumps(
                {"metrics": [{"metric": "weat", "inputs": {"embeddings": "missing.ndjson"}}]}
            )
        )
        out = tmp_path / "report.json"
        code = main(["audit", "--spec", str(spec), "--out", str(out)])
        assert code == EXIT_FAILED
        assert json.loads(out.read_text())["results"][0]["ok"] is False

    def test_unreadable_spec_exit_code(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text("{broken")
        code = main(["audit", "--spec", str(spec), "--out", str(tmp_path / "r.json")])
        assert code == EXIT_INPUT

    def test_duplicate_input_paths_rejected(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(
            json.dumps(
                {
                    "metrics": [
                        {
                            "metric": "dem_rep",
                            "inputs": {"texts": "same.txt", "lexicon": "same.txt"},
                        }
                    ]
                }
            )
        )
        code = main(["audit", "--spec", str(spec), "--out", str(tmp_path / "r.json")])
        assert code == EXIT_INPUT


class TestUsageErrors:
    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_required_flag(self):
        assert main(["audit", "--out", "x.json"]) == EXIT_USAGE

    def test_bad_choice(self):
        assert main(["grad-check", "--kernel", "nope"]) == EXIT_USAGE


class TestAugmentCommand:
    def _write_input(self, tmp_path, rows):
        path = tmp_path / "in.ndjson"
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        return path

    def test_two_sided(self, tmp_path):
        inp = self._write_input(
            tmp_path,
            [{"text": "He went home", "label": 1}, {"text": "the sky is blue", "label": 0}],
        )
        out = tmp_path / "out.ndjson"
        code = main(
            [
                "augment",
                "--input", str(inp),
                "--pairs", str(FIXTURES / "gendered_pairs.json"),
                "--mode", "two-sided",
                "--columns", "text",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [r["text"] for r in rows] == [
            "He went home",
            "the sky is blue",
            "She went home",
        ]
        assert rows[2]["label"] == 1

    def test_one_sided_all_string_fields(self, tmp_path):
        inp = self._write_input(tmp_path, [{"a": "his book", "b": "her book"}])
        out = tmp_path / "out.ndjson"
        code = main(
            [
                "augment",
                "--input", str(inp),
                "--pairs", str(FIXTURES / "gendered_pairs.json"),
                "--mode", "one-sided",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        (row,) = [json.loads(line) for line in out.read_text().splitlines()]
        assert row == {"a": "hers book", "b": "him book"}

    def test_missing_column_is_input_error(self, tmp_path):
        inp = self._write_input(tmp_path, [{"text": "he ran"}])
        code = main(
            [
                "augment",
                "--input", str(inp),
                "--pairs", str(FIXTURES / "gendered_pairs.json"),
                "--mode", "one-sided",
                "--columns", "body",
                "--out", str(tmp_path / "out.ndjson"),
            ]
        )
        assert code == EXIT_INPUT


class TestDebiasEmbeddingsCommand:
    def test_end_to_end(self, tmp_path):
        rng = np.random.default_rng(73)
        direction = np.array([1.0, 0.0, 0.0, 0.0])
        pair_records = []
        for i in range(4):
            base = rng.standard_normal(4)
            shift = (1.5 + i) * direction
            pair_records.append(
                EmbeddingRecord(
                    id=f"pair{i}", group="A1", text="a", vector=[float(x) for x in base + shift]
                )
            )
            pair_records.append(
                EmbeddingRecord(
                    id=f"pair{i}", group="A2", text="b", vector=[float(x) for x in base - shift]
                )
            )
        pairs_path = tmp_path / "pairs.ndjson"
        from biasaudit.interchange import write_records

        pairs_path.write_bytes(write_records(pair_records))
        inputs = [
            EmbeddingRecord(id=f"x{i}", group="G", text="t", vector=[float(v) for v in rng.standard_normal(4)])
            for i in range(5)
        ]
        in_path = tmp_path / "in.ndjson"
        in_path.write_bytes(write_records(inputs))
        out_path = tmp_path / "out.ndjson"
        sub_path = tmp_path / "subspace.json"
        code = main(
            [
                "debias-embeddings",
                "--pairs-embeddings", str(pairs_path),
                "--components", "1",
                "--input", str(in_path),
                "--out", str(out_path),
                "--subspace-out", str(sub_path),
            ]
        )
        assert code == EXIT_OK
        subspace = BiasSubspace.from_json_obj(json.loads(sub_path.read_text()))
        assert np.allclose(np.abs(subspace.basis), [[1.0, 0.0, 0.0, 0.0]], atol=1e-8)
        with open(out_path, "rb") as fp:
            debiased = parse_records(fp)
        for record in debiased:
            assert abs(np.dot(subspace.basis[0], record.vector)) <= 1e-10

    def test_unpaired_id_is_input_error(self, tmp_path):
        from biasaudit.interchange import write_records

        pairs_path = tmp_path / "pairs.ndjson"
        pairs_path.write_bytes(
            write_records([EmbeddingRecord(id="solo", group="A1", text="a", vector=[1.0, 0.0])])
        )
        code = main(
            [
                "debias-embeddings",
                "--pairs-embeddings", str(pairs_path),
                "--components", "1",
                "--input", str(pairs_path),
                "--out", str(tmp_path / "out.ndjson"),
            ]
        )
        assert code == EXIT_INPUT


class TestListDatasetsCommand:
    def test_names(self, capsys):
        code = main(["list-datasets", "--catalog", str(FIXTURES / "catalog.json")])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines == sorted(lines)
        assert "BUG" in lines

    def test_configs(self, capsys):
        code = main(
            ["list-datasets", "--catalog", str(FIXTURES / "catalog.json"), "--dataset", "BUG"]
        )
        assert code == EXIT_OK
        assert capsys.readouterr().out.splitlines() == ["full", "gold"]

    def test_unknown_dataset(self):
        code = main(
            ["list-datasets", "--catalog", str(FIXTURES / "catalog.json"), "--dataset", "nope"]
        )
        assert code == EXIT_INPUT


class TestGradCheckCommand:
    def test_passes(self, capsys):
        code = main(["grad-check", "--trials", "3", "--seed", "1"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("ok") == 7

    def test_single_kernel(self, capsys):
        code = main(["grad-check", "--kernel", "eat", "--trials", "2"])
        assert code == EXIT_OK
        assert "eat" in capsys.readouterr().out
