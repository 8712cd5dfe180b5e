import json
import zipfile
from pathlib import Path

import numpy as np
import pytest

from pscnn import isa
from pscnn.cli import main
from pscnn.controller import COST_KEYS
from pscnn.model import Conv1d, ModelSpec, Pool, save_bits, save_model

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def small(tmp_path):
    m = ModelSpec(40, 12, [Conv1d(12, 150, 3, pool=2), Pool(2), Conv1d(150, 7, 2)]).randomize(5)
    save_model(m, tmp_path / "m.ini", tmp_path / "m.bin")
    x = np.random.default_rng(0).integers(0, 2, (40, 12))
    save_bits(tmp_path / "x.bits", x)
    assert main(["compile", str(tmp_path / "m.ini"), "-o", str(tmp_path / "m.zip")]) == 0
    return tmp_path


def stats_of(tmp_path, *extra):
    out = tmp_path / "stats.json"
    assert main(["run", str(tmp_path / "m.zip"), "--input", str(tmp_path / "x.bits"),
                 "--stats", str(out), *extra]) == 0
    return json.loads(out.read_text())


def test_compile_compare_run(small, capsys):
    assert main(["compare", str(small / "m.zip"), "--input", str(small / "x.bits")]) == 0
    assert "all 3 layers match" in capsys.readouterr().out
    fused = stats_of(small)
    unfused = stats_of(small, "--unfused")
    assert unfused["cycles"] > fused["cycles"]
    assert fused["freq_hz"] == 10e6
    assert fused["gops"] * fused["latency_s"] * 1e9 == pytest.approx(fused["macs"], rel=1e-9)
    assert main(["compare", str(small / "m.zip"), "--input", str(small / "x.bits"),
                 "--unfused"]) == 0


def test_cost_table(small):
    (small / "costs.json").write_text(json.dumps(dict.fromkeys(COST_KEYS, 1.0)))
    doc = stats_of(small, "--cost-table", str(small / "costs.json"))
    assert doc["energy_note"] == "modeled, relative"
    assert doc["energy_uJ"] == doc["sense_events"] + sum(doc["reads"]) + sum(doc["writes"]) + \
        doc["wrep_rows"] + doc["active_bank_cycles"] + sum(doc["gated_cycles"])
    (small / "bad.json").write_text(json.dumps({"sense": 1.0}))
    assert main(["run", str(small / "m.zip"), "--input", str(small / "x.bits"),
                 "--cost-table", str(small / "bad.json")]) == 1


def test_compare_detects_corruption(small, capsys):
    src, dst = small / "m.zip", small / "bad.zip"
    with zipfile.ZipFile(src) as zin, zipfile.ZipFile(dst, "w") as zout:
        for item in zin.infolist():
            data = zin.read(item.filename)
            if item.filename == "macro.img":
                img = bytearray(data)
                for i in range(0, 36 * 128, 128):
                    img[i] ^= 0b11000000         # swap pair 0 of the first layer: +1 <-> -1
                data = bytes(img)
            zout.writestr(item, data)
    assert main(["compare", str(dst), "--input", str(small / "x.bits")]) == 4
    assert "mismatch at layer 0" in capsys.readouterr().out


def test_halt_only_program(tmp_path, capsys):
    (tmp_path / "h.bin").write_bytes(isa.to_bytes([0xE000_0000]))
    assert main(["run", str(tmp_path / "h.bin")]) == 0
    assert json.loads(capsys.readouterr().out)["cycles"] == 0


def test_runtime_error_exit(tmp_path):
    (tmp_path / "p.bin").write_bytes(isa.to_bytes([isa.encode(isa.Mac(n_out=2))]))
    assert main(["run", str(tmp_path / "p.bin")]) == 3


def test_compile_error_exit(tmp_path):
    save_model(ModelSpec(10, 400, [Conv1d(400, 4, 3)]).randomize(), tmp_path / "t.ini",
               tmp_path / "t.bin")
    assert main(["compile", str(tmp_path / "t.ini"), "-o", str(tmp_path / "t.zip")]) == 2
    (tmp_path / "bad.asm").write_text("MAC n_out=2000\n")
    assert main(["asm", str(tmp_path / "bad.asm"), "-o", str(tmp_path / "b.bin")]) == 2


def test_usage_exits(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["run", "--bogus"])
    assert e.value.code == 1
    assert main(["run", str(tmp_path / "missing.zip")]) == 1


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    text = capsys.readouterr().out
    for flag in ("--freq-hz", "--sigma", "--seed", "--unfused", "--cost-table", "--stats"):
        assert flag in text


def test_margin_zero_sigma(capsys):
    assert main(["margin", "--sigma-grid", "0", "--trials", "200"]) == 0
    row = json.loads(capsys.readouterr().out)["table"][0]
    assert row == {"sigma": 0.0, "twm_rate": 0.0, "bwm_rate": 0.0}
    assert main(["margin", "--mode", "twm", "--sigma-grid", "1,2", "--trials", "100"]) == 0
    assert set(json.loads(capsys.readouterr().out)["table"][1]) == {"sigma", "twm_rate"}


def test_seed_env_fallback(small, monkeypatch):
    monkeypatch.setenv("PSCNN_SEED", "7")
    a = stats_of(small, "--sigma", "3")
    b = stats_of(small, "--sigma", "3", "--seed", "7")
    assert a == b


def test_asm_disasm_round_trip(tmp_path):
    assert main(["asm", str(FIXTURES / "golden.asm"), "-o", str(tmp_path / "g.bin")]) == 0
    assert (tmp_path / "g.bin").read_bytes() == (FIXTURES / "golden.bin").read_bytes()
    assert main(["disasm", str(tmp_path / "g.bin"), "-o", str(tmp_path / "g.asm")]) == 0
    assert main(["asm", str(tmp_path / "g.asm"), "-o", str(tmp_path / "g2.bin")]) == 0
    assert (tmp_path / "g2.bin").read_bytes() == (tmp_path / "g.bin").read_bytes()
