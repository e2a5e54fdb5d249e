import json
import os

from extsleuth.cli import main
from corpus import (
    benign_analytics_extension,
    cookie_stealer_crx,
    logic_bomb_extension,
)


def write_fixture(tmp_path, fixture):
    path = tmp_path / fixture.hint
    path.write_bytes(fixture.data)
    if fixture.scenario:
        scenario_path = tmp_path / f"{fixture.name}.scenario.json"
        scenario_path.write_text(json.dumps(fixture.scenario))
        return str(path), str(scenario_path)
    return str(path), None


def test_benign_exit_zero(tmp_path, capsys):
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    assert main(["scan", path]) == 0
    assert "Verdict: Low" in capsys.readouterr().out


def test_malicious_exit_two_and_text_mentions_high(tmp_path, capsys):
    path, _ = write_fixture(tmp_path, cookie_stealer_crx())
    assert main(["scan", path]) == 2
    assert "High" in capsys.readouterr().out


def test_medium_exit_one(tmp_path):
    fixture = logic_bomb_extension()
    path, scenario = write_fixture(tmp_path, fixture)
    assert main(["scan", path, "--scenario", scenario]) == 1


def test_missing_path_exit_three(capsys):
    assert main(["scan", "/does/not/exist.crx"]) == 3


def test_undecodable_artifact_exit_three(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"ABCD")
    assert main(["scan", str(path)]) == 3


def test_json_output_to_file(tmp_path):
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    out = tmp_path / "report.json"
    assert main(["scan", path, "--format", "json", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["verdict"]["level"] == "Low"
    assert report["schema"] == 1


def test_no_dynamic_skips_sandbox(tmp_path):
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    out = tmp_path / "r.json"
    assert main(["scan", path, "--no-dynamic", "--out", str(out),
                 "--format", "json"]) == 0
    report = json.loads(out.read_text())
    assert report["outcome"]["dynamic"] == "skipped"
    assert report["events"]["count"] == 0


def test_mock_llm_attached(tmp_path):
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    out = tmp_path / "r.json"
    main(["scan", path, "--llm", "mock:low", "--out", str(out),
          "--format", "json"])
    report = json.loads(out.read_text())
    assert report["llm"]["riskLevel"] == "Low"
    assert "mock" in report["llm"]["model"]


def test_no_llm_flag_wins(tmp_path):
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    out = tmp_path / "r.json"
    main(["scan", path, "--llm", "mock", "--no-llm", "--out", str(out),
          "--format", "json"])
    assert "llm" not in json.loads(out.read_text())


def test_batch_mode_exit_is_max(tmp_path):
    benign, _ = write_fixture(tmp_path, benign_analytics_extension())
    malicious, _ = write_fixture(tmp_path, cookie_stealer_crx())
    assert main(["scan", benign, malicious, "--workers", "2"]) == 2


def test_store_env_overrides_flag(tmp_path, monkeypatch):
    env_store = tmp_path / "env-store"
    flag_store = tmp_path / "flag-store"
    monkeypatch.setenv("EXTSLEUTH_STORE", str(env_store))
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    assert main(["scan", path, "--store", str(flag_store)]) == 0
    assert env_store.exists()
    assert not flag_store.exists()


def test_cached_second_scan(tmp_path, capsys):
    store = tmp_path / "store"
    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    assert main(["scan", path, "--store", str(store),
                 "--deterministic-timings"]) == 0
    reports_dir = store / "reports"
    first_files = sorted(reports_dir.rglob("*.report.json"))
    assert len(first_files) == 1
    first_bytes = first_files[0].read_bytes()
    assert main(["scan", path, "--store", str(store),
                 "--deterministic-timings"]) == 0
    assert first_files[0].read_bytes() == first_bytes


def test_stdio_adapter_against_bundled_mock(tmp_path):
    import sys

    path, _ = write_fixture(tmp_path, benign_analytics_extension())
    out = tmp_path / "r.json"
    spec = f"stdio:{sys.executable} -m extsleuth.mockmodel --risk medium"
    assert main(["scan", path, "--llm", spec, "--out", str(out),
                 "--format", "json"]) == 0
    report = json.loads(out.read_text())
    assert report["llm"]["riskLevel"] == "Medium"
