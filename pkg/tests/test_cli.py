import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from eqdec.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


def test_audit_writes_csv_and_is_deterministic(tmp_path):
    out = tmp_path / "audit"
    code = run_cli("audit", "--window", 64, "--seed", 5, "--out", out, "--i-max", 4)
    assert code == 0
    csv_a = (out / "audit_a.csv").read_text()
    assert len(csv_a.splitlines()) == 1 + 5  # header plus i_max+1 rows
    out2 = tmp_path / "audit2"
    assert run_cli("audit", "--window", 64, "--seed", 5, "--out", out2, "--i-max", 4) == 0
    assert (out2 / "audit_a.csv").read_text() == csv_a
    assert json.loads((out / "audit.json").read_text())["a"]["delta"] > 0


def test_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("audit", "--config", bad) == 2


def test_unknown_suite_exits_2():
    assert run_cli("lemma-tests", "--suite", "nope") == 2


def test_square_and_verify_and_render(tmp_path):
    out = tmp_path / "sq"
    code = run_cli(
        "square", "--window", 128, "--seed", 5, "--out", out, "--ladder", "8,16"
    )
    assert code == 0
    eqdc = out / "square.eqdc"
    assert eqdc.exists()
    reports = json.loads((out / "square_reports.json").read_text())
    assert len(reports["reports"]) == 2
    assert run_cli("verify", eqdc) == 0
    assert run_cli("render", eqdc, "--side", "a", "--scale", 1) == 0
    assert eqdc.with_suffix(".a.ppm").exists()
    # corrupting the file makes verify fail with exit 1
    raw = bytearray(eqdc.read_bytes())
    raw[300] ^= 0x40
    bad = out / "bad.eqdc"
    bad.write_bytes(bytes(raw))
    assert run_cli("verify", bad) == 1


def test_verify_catches_double_matched_cell(tmp_path):
    out = tmp_path / "sq"
    assert run_cli("square", "--window", 64, "--seed", 3, "--out", out, "--ladder", "8") == 0
    eqdc = out / "square.eqdc"
    from eqdec.io_render import MAGIC

    raw = bytearray(eqdc.read_bytes())
    # piece grid starts after magic, header, and two packed bit grids
    grid_bytes = 64 * (64 // 8)
    base = len(MAGIC) + 16 + 16 + 2 * grid_bytes
    pieces = np.frombuffer(bytes(raw[base : base + 64 * 64 * 2]), dtype="<u2").reshape(64, 64).copy()
    matched = np.argwhere(pieces != 0xFFFF)
    # send two A-cells to one target: give cell2 the offset that lands on cell1's target
    c1, c2 = matched[0], matched[1]
    k1 = int(pieces[tuple(c1)])
    target = c1 + _offset(k1, 8)
    delta = target - c2
    if np.abs(delta).max() <= 8:
        k2 = int((delta[0] + 8) * 17 + delta[1] + 8)
        pieces[tuple(c2)] = k2
        # keep the grid-section hash honest so only injectivity trips
        import hashlib
        import json as js

        piece_bytes = pieces.astype("<u2").tobytes()
        manifest = js.loads(bytes(raw[base + len(piece_bytes) :]).decode())
        manifest["hashes"]["pieces"] = hashlib.sha256(piece_bytes).hexdigest()
        blob = bytes(raw[:base]) + piece_bytes + js.dumps(
            manifest, sort_keys=True, separators=(",", ":")
        ).encode()
        bad = out / "double.eqdc"
        bad.write_bytes(blob)
        assert run_cli("verify", bad) == 1


def _offset(k, m_cap):
    box = 2 * m_cap + 1
    return np.array([k // box - m_cap, k % box - m_cap])


def test_window_too_small_for_ladder_exits_2(tmp_path, capsys):
    code = run_cli("square", "--window", 32, "--seed", 5, "--out", tmp_path, "--ladder", "8,64")
    assert code == 2


def test_baire_cli_small(tmp_path):
    out = tmp_path / "baire"
    code = run_cli(
        "baire", "--window", 384, "--seed", 5, "--out", out, "--radii", "8,24"
    )
    assert code == 0
    reports = json.loads((out / "baire_reports.json").read_text())
    assert all(r["added"] == r["net_size"] for r in reports)
    assert run_cli("verify", out / "baire.eqdc") == 0


def test_lemma_tests_single_suite():
    assert run_cli("lemma-tests", "--suite", "isoperimetry", "--seed", 3) == 0
