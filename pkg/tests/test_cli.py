"""End-to-end command-line interface tests (in-process)."""
import json

import pytest

from emtcalc.cli import main


@pytest.fixture()
def corpus(corpus_dir):
    return corpus_dir


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_canon_writes_rendered_artifact(corpus, capsys, tmp_path):
    out = tmp_path / "kg.json"
    code, _ = run(capsys, "canon", str(corpus / "kg.lag"), "-o", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert set(doc) >= {"expr", "fields", "rendered"}
    assert "phi" in doc["fields"]


def test_canon_artifacts_are_byte_identical(corpus, capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "canon", str(corpus / "gauss_bonnet.lag"),
               "--dim", "D", "-o", str(a))[0] == 0
    assert run(capsys, "canon", str(corpus / "gauss_bonnet.lag"),
               "--dim", "D", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_derive_noether_matches_reference_fixture(corpus, capsys, tmp_path):
    out = tmp_path / "em.json"
    code, _ = run(capsys, "derive", "noether", str(corpus / "em.lag"),
                  "--delta", str(corpus / "em_bessel_hagen.lag"),
                  "-o", str(out))
    assert code == 0
    code, text = run(capsys, "diff", str(out),
                     str(corpus / "em_emt_reference.json"))
    assert code == 0
    assert json.loads(text)["equal"] is True


def test_derive_hilbert_matches_reference_fixture(corpus, capsys, tmp_path):
    out = tmp_path / "em_h.json"
    assert run(capsys, "derive", "hilbert", str(corpus / "em.lag"),
               "-o", str(out))[0] == 0
    assert run(capsys, "diff", str(out),
               str(corpus / "em_emt_reference.json"))[0] == 0


def test_derive_emit_stage(corpus, capsys, tmp_path):
    out = tmp_path / "stage.json"
    code, _ = run(capsys, "derive", "hilbert", str(corpus / "kg.lag"),
                  "--emit-stage", "pruned", "-o", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["stage"] == "pruned"
    heads = {f["head"] for t in doc["expr"]["terms"] for f in t["factors"]}
    assert heads & {"g", "ginv", "sqrtg"}


def test_diff_unequal_exits_one(corpus, capsys, tmp_path):
    a = tmp_path / "kg.json"
    b = tmp_path / "em.json"
    run(capsys, "derive", "noether", str(corpus / "kg.lag"), "-o", str(a))
    run(capsys, "derive", "noether", str(corpus / "em.lag"), "-o", str(b))
    code, text = run(capsys, "diff", str(a), str(b))
    assert code == 1
    assert json.loads(text)["equal"] is False


def test_check_command(corpus, capsys, tmp_path):
    emt = tmp_path / "em.json"
    run(capsys, "derive", "noether", str(corpus / "em.lag"),
        "--delta", str(corpus / "em_bessel_hagen.lag"), "-o", str(emt))
    code, text = run(capsys, "check", str(corpus / "em.lag"),
                     "--emt", str(emt),
                     "--properties", "symmetric,traceless,gauge_invariant")
    assert code == 0
    doc = json.loads(text)
    assert doc["verdict"] == "pass"
    assert all(r["verdict"] == "pass" for r in doc["properties"].values())


def test_check_failed_property_exits_one(corpus, capsys, tmp_path):
    emt = tmp_path / "kg.json"
    run(capsys, "derive", "noether", str(corpus / "kg.lag"), "-o", str(emt))
    code, text = run(capsys, "check", str(corpus / "kg.lag"),
                     "--emt", str(emt), "--properties", "traceless")
    assert code == 1


def test_oracle_compare(corpus, capsys, tmp_path):
    a = tmp_path / "n.json"
    b = tmp_path / "h.json"
    run(capsys, "derive", "noether", str(corpus / "kg.lag"), "-o", str(a))
    run(capsys, "derive", "hilbert", str(corpus / "kg.lag"), "-o", str(b))
    code, text = run(capsys, "oracle-compare", str(a), str(b),
                     "--trials", "5", "--seed", "1", "--degree", "3")
    assert code == 0
    assert json.loads(text)["verdict"] == "equal"


def test_usage_errors_exit_two(corpus, capsys, tmp_path):
    assert run(capsys, "canon", str(tmp_path / "missing.lag"))[0] == 2
    bad = tmp_path / "bad.lag"
    bad.write_text("field phi { rank: 0 }\nlagrangian = phi * chi\n")
    assert run(capsys, "canon", str(bad))[0] == 2
    emt = tmp_path / "kg.json"
    run(capsys, "derive", "noether", str(corpus / "kg.lag"), "-o", str(emt))
    assert run(capsys, "check", str(corpus / "kg.lag"), "--emt", str(emt),
               "--properties", "positive")[0] == 2


def test_invalid_emt_threads_exits_two(corpus, capsys, monkeypatch):
    monkeypatch.setenv("EMT_THREADS", "many")
    assert run(capsys, "canon", str(corpus / "kg.lag"))[0] == 2
    monkeypatch.setenv("EMT_THREADS", "-1")
    assert run(capsys, "canon", str(corpus / "kg.lag"))[0] == 2
    monkeypatch.setenv("EMT_THREADS", "0")
    assert run(capsys, "canon", str(corpus / "kg.lag"))[0] == 0


def test_set_substitutes_parameters(corpus, capsys, tmp_path):
    out = tmp_path / "gbpt.json"
    code, _ = run(capsys, "canon", str(corpus / "gauss_bonnet.lag"),
                  "--set", "A=1/4", "--set", "B=-1", "--set", "C=1/4",
                  "-o", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert all(t["params"] == [] for t in doc["expr"]["terms"])
