import csv
import json
import math

import pytest

from flim.cli import main
from flim.geometry import SceneConfig

SMALL = """
[scheme.gsm2]
n_a = 2
[sim]
snr_db = 215:225:5
n_symbols = 3000
"""


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return path


def test_se_table_flim_column(tmp_path, capsys):
    assert main(["se-table", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "se_table.csv")
    assert rows[0] == ["scheme", "n_t", "n_a", "M", "eta_bpcu"]
    flim = {int(r[1]): float(r[4]) for r in rows[1:] if r[0] == "flim"}
    assert flim == {n: float(math.floor(n * math.log2(3))) for n in range(1, 11)}


def test_cn_map_row_count(tmp_path):
    assert main(["cn-map", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "cn_map.csv")
    assert rows[0] == ["r_cm", "omega_deg", "cn_db"]
    assert len(rows) - 1 == (math.floor(SceneConfig().r_cell / 2.5) + 1) * 360
    summary = json.loads((tmp_path / "cn_summary.json").read_text())
    assert summary["n_points"] == len(rows) - 1


def test_abep_two_schemes_share_grid(tmp_path, small_config):
    out = tmp_path / "run"
    args = ["abep", "--config", str(small_config), "--out", str(out), "--scheme", "flim", "--scheme", "gsm2"]
    assert main(args) == 0
    a, b = _rows(out / "abep_flim.csv"), _rows(out / "abep_gsm2.csv")
    assert a[0] == ["eb_n0_db", "abep", "bit_errors", "bits_sent", "repair_rate", "analytic"]
    assert [r[0] for r in a] == [r[0] for r in b]
    assert len(a) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["codebook_sha256"]) == {"flim", "gsm2"}


def test_manifest_reproduces_bytes(tmp_path, small_config):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["abep", "--config", str(small_config), "--out", str(first), "--seed", "7", "--scheme", "smx"]) == 0
    assert main(["abep", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    assert (first / "abep_smx.csv").read_bytes() == (second / "abep_smx.csv").read_bytes()


def test_bound_is_flagged_analytic(tmp_path, small_config):
    assert main(["bound", "--config", str(small_config), "--out", str(tmp_path), "--scheme", "flim"]) == 0
    rows = _rows(tmp_path / "bound_flim.csv")
    assert all(r[5] == "true" for r in rows[1:])


def test_codebook_export(tmp_path):
    assert main(["codebook", "--out", str(tmp_path), "--scheme", "smx"]) == 0
    doc = json.loads((tmp_path / "codebook_smx.json").read_text())
    assert len(doc["vectors"]) == len(doc["labels"]) == 16


def test_errors_are_json(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sim]\nsnr_db = 10, 5\n")
    assert main(["abep", "--config", str(bad), "--out", str(tmp_path)]) != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ValidationError" and "increasing" in err["message"]
    assert main(["abep", "--scheme", "gsm2", "--out", str(tmp_path)]) != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "n_a" in err["message"]
