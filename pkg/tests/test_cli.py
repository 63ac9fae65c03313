"""End-to-end behaviour of the ``malscan`` command."""

from __future__ import annotations

import json

import pytest

from malscan import __version__
from malscan.cli import main
from malscan.report import from_json

from .conftest import FIXTURES, GOLDEN

SQLI = FIXTURES / "sqli"
XSS_RULE = """\
rules:
  - rule_id: xss-inner
    category: cross_site_scripting
    pattern: 'innerHTML\\s*='
    vector: CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N
    description: HTML assigned from a string
"""


@pytest.fixture(autouse=True)
def _clock(pinned_clock):
    pass


def test_scan_writes_golden_json_and_fails_on_critical(tmp_path):
    out = tmp_path / "report.json"
    assert main(["scan", str(SQLI), "-o", str(out)]) == 1
    assert out.read_text(encoding="utf-8") == (GOLDEN / "sqli_report.json").read_text(encoding="utf-8")


def test_scan_both_formats(tmp_path):
    js, md = tmp_path / "r.json", tmp_path / "out" / "r.md"
    assert main(["scan", str(SQLI), "--format", "both", "-o", str(js), "--markdown-output", str(md)]) == 1
    assert md.read_text(encoding="utf-8") == (GOLDEN / "sqli_report.md").read_text(encoding="utf-8")


def test_scan_json_to_stdout(capsys):
    assert main(["scan", str(SQLI)]) == 1
    assert from_json(capsys.readouterr().out).totals["findings"] == 1


def test_fail_threshold_flag(tmp_path):
    assert main(["scan", str(SQLI), "-o", str(tmp_path / "r.json"), "--fail-threshold", "9.2"]) == 0
    assert main(["scan", str(SQLI), "-o", str(tmp_path / "r.json"), "--fail-threshold", "9.1"]) == 1


def test_config_file_overrides(tmp_path):
    cfg = tmp_path / "malscan.yaml"
    cfg.write_text("flag_threshold: 9.5\nfail_threshold: 9.0\n")
    out = tmp_path / "r.json"
    assert main(["scan", str(SQLI), "--config", str(cfg), "-o", str(out)]) == 0
    report = from_json(out.read_text(encoding="utf-8"))
    assert report.flag_threshold == 9.5 and report.totals["analyzed"] == 0
    # flags win over the file
    assert main(["scan", str(SQLI), "--config", str(cfg), "--threshold", "4", "-o", str(out)]) == 1


def test_bad_config_is_a_usage_error(tmp_path, capsys):
    cfg = tmp_path / "malscan.yaml"
    cfg.write_text("threshold: 3\n")
    assert main(["scan", str(SQLI), "--config", str(cfg)]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_scan_empty_directory(tmp_path, capsys):
    (tmp_path / "src").mkdir()
    assert main(["scan", str(tmp_path / "src")]) == 0
    assert from_json(capsys.readouterr().out).files == ()


def test_scan_missing_path(tmp_path, capsys):
    assert main(["scan", str(tmp_path / "nope")]) == 2
    assert "malscan: error:" in capsys.readouterr().err


def test_both_formats_need_a_path(capsys):
    assert main(["scan", str(SQLI), "--format", "both"]) == 2
    assert "--format both" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["scan", str(SQLI), "--no-such-flag"])
    assert exc.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


# -- rules-check ------------------------------------------------------------------


def test_rules_check_bundled(capsys):
    assert main(["rules-check"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("bundled rules: ") and out.rstrip().endswith("rules OK")


def test_rules_check_file(tmp_path, capsys):
    path = tmp_path / "rules.yaml"
    path.write_text(XSS_RULE)
    assert main(["rules-check", str(path)]) == 0
    assert "1 rule OK" in capsys.readouterr().out


def test_rules_check_empty_file(tmp_path, capsys):
    path = tmp_path / "rules.yaml"
    path.write_text("")
    assert main(["rules-check", str(path)]) == 0
    assert "0 rules OK" in capsys.readouterr().out


def test_rules_check_duplicate_names_line(tmp_path, capsys):
    path = tmp_path / "rules.yaml"
    path.write_text(XSS_RULE + XSS_RULE.split("\n", 1)[1])
    assert main(["rules-check", str(path)]) == 2
    err = capsys.readouterr().err
    assert f"{path}:7:" in err and "duplicate" in err


def test_scan_with_custom_rules(tmp_path):
    rules = tmp_path / "rules.yaml"
    rules.write_text(XSS_RULE)
    out = tmp_path / "r.json"
    # the custom set has no SQL rule, so nothing is flagged
    assert main(["scan", str(SQLI), "--rules", str(rules), "-o", str(out)]) == 0
    assert from_json(out.read_text(encoding="utf-8")).totals["analyzed"] == 0


# -- render -----------------------------------------------------------------------


def test_render_golden(capsys):
    assert main(["render", str(GOLDEN / "sqli_report.json")]) == 0
    assert capsys.readouterr().out == (GOLDEN / "sqli_report.md").read_text(encoding="utf-8")


def test_render_truncated(tmp_path, capsys):
    path = tmp_path / "r.json"
    text = (GOLDEN / "sqli_report.json").read_text(encoding="utf-8")
    path.write_text(text[:300])
    assert main(["render", str(path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_render_version_mismatch(tmp_path, capsys):
    doc = json.loads((GOLDEN / "sqli_report.json").read_text(encoding="utf-8"))
    doc["schema_version"] = "2.0"
    path = tmp_path / "r.json"
    path.write_text(json.dumps(doc))
    assert main(["render", str(path)]) == 2
    assert "schema_version" in capsys.readouterr().err


# -- eval -------------------------------------------------------------------------


def test_eval_command(tmp_path, capsys):
    out = tmp_path / "eval.json"
    assert main(["eval", "--corpus-out", str(tmp_path / "corpus"), "--output", str(out)]) == 0
    table = capsys.readouterr().out
    assert "notes-app" in table and "remediation:" in table
    result = json.loads(out.read_text(encoding="utf-8"))
    assert result["by_profile"]["insecure"]["true_positives"] >= 8
    assert (tmp_path / "corpus" / "manifests" / "notes-app.yaml").is_file()
