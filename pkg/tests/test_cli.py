import csv
import io as _io
import json

import numpy as np
import pytest

from pairplan import io
from pairplan.cli import main
from pairplan.config import RunConfig


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def plan(capsys, *argv):
    code, out, _ = run(capsys, "plan", *argv)
    assert code == 0
    return json.loads(out)


class TestPlan:
    def test_complete_nine(self, capsys):
        assert plan(capsys, "--strategy", "complete", "--n", "9")["pair_count"] == 72

    def test_oneref_twelve(self, capsys):
        assert plan(capsys, "--strategy", "oneref", "--n", "12")["pair_count"] == 22

    def test_gaps_triangle(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gaps": {"offsets": [1], "b": 2}}))
        doc = plan(capsys, "--config", str(cfg), "--n", "3", "--mode", "both")
        assert doc["pairs"] == [[0, 1], [1, 0], [0, 2], [2, 0], [1, 2], [2, 1]]
        assert doc["pair_count"] == 6
        assert doc["pair_count_undirected"] == 3
        assert doc["connected"] is True

    def test_forward_mode_and_undirected_count(self, capsys):
        doc = plan(capsys, "--strategy", "complete", "--n", "4", "--mode", "forward", "--count", "undirected")
        assert doc["pair_count"] == 6
        assert all(i < j for i, j in doc["pairs"])

    def test_report_fields(self, capsys):
        doc = plan(capsys, "--n", "12")
        for key in ("n", "mode", "edges", "pairs", "total_weight", "pair_count", "estimated_mb"):
            assert key in doc
        assert doc["estimated_mb"] == 2000.0 + 100.0 * doc["pair_count"]
        assert doc["total_weight"] == pytest.approx(sum(e["w"] for e in doc["edges"]))

    def test_dot_format(self, capsys):
        code, out, _ = run(capsys, "plan", "--n", "5", "--format", "dot")
        assert code == 0
        assert out.startswith("graph gaps {")
        assert 'label="1.0000"' in out

    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(capsys, "plan", "--n", "12", "--out", str(a))[0] == 0
        assert run(capsys, "plan", "--n", "12", "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_needs_views(self, capsys):
        code, _, err = run(capsys, "plan")
        assert code == 2
        assert "--n" in err

    def test_views_dir_and_cosine(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        base = rng.uniform(size=(16, 16, 3))
        for k in range(4):
            io.write_png(tmp_path / f"img_{k}.png", np.clip(base + 0.1 * k * rng.uniform(size=base.shape), 0, 1))
        doc = plan(capsys, "--views-dir", str(tmp_path), "--strategy", "cosine")
        assert doc["n"] == 4
        assert doc["views"] == [f"img_{k}.png" for k in range(4)]
        assert doc["pairs"] and all(i != j for i, j in doc["pairs"])
        gaps = plan(capsys, "--views-dir", str(tmp_path))
        assert gaps["n"] == 4

    def test_unreadable_image(self, tmp_path, capsys):
        (tmp_path / "a.png").write_bytes(b"not a png")
        (tmp_path / "b.png").write_bytes(b"nor this")
        code, _, err = run(capsys, "plan", "--views-dir", str(tmp_path))
        assert code == 3
        assert "a.png" in err

    def test_cosine_without_images(self, capsys):
        assert run(capsys, "plan", "--strategy", "cosine", "--n", "4")[0] == 2


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gaps": {"tau": 2.0, "bogus": 1}}))
        code, _, err = run(capsys, "plan", "--config", str(cfg), "--n", "6")
        assert code == 2
        assert "bogus" in err

    def test_invalid_value_names_field(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gaps": {"b": 0}}))
        code, _, err = run(capsys, "plan", "--config", str(cfg), "--n", "6")
        assert code == 2
        assert "gaps.b" in err

    def test_missing_config_is_io_error(self, tmp_path, capsys):
        assert run(capsys, "plan", "--config", str(tmp_path / "nope.json"), "--n", "6")[0] == 3

    def test_roundtrip(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gaps": {"tau": 3.0, "w_min": 0.2, "b": 3}, "strategy": "gaps"}))
        _, first, _ = run(capsys, "plan", "--config", str(cfg), "--n", "10")
        code, dumped, _ = run(capsys, "config", "--config", str(cfg))
        assert code == 0
        again = tmp_path / "again.json"
        again.write_text(dumped)
        _, second, _ = run(capsys, "plan", "--config", str(again), "--n", "10")
        assert first == second
        assert RunConfig.model_validate_json(dumped) == RunConfig.model_validate_json(cfg.read_text())


class TestCompare:
    def rows(self, capsys, *argv):
        code, out, _ = run(capsys, "compare", *argv)
        assert code == 0
        return list(csv.DictReader(_io.StringIO(out)))

    def test_table_columns(self, capsys):
        rows = self.rows(capsys, "--n-range", "3,6,9,12", "--strategies", "complete,oneref")
        by = {(r["strategy"], int(r["n"])): int(r["pairs"]) for r in rows}
        assert [by["complete", n] for n in (3, 6, 9, 12)] == [6, 30, 72, 132]
        assert [by["oneref", n] for n in (3, 6, 9, 12)] == [4, 10, 16, 22]

    def test_window(self, capsys):
        rows = self.rows(capsys, "--n-range", "2", "--strategies", "window")
        assert rows == [{"strategy": "window", "n": "2", "pairs": "2", "estimated_mb": "2200.0"}]

    def test_cosine_rejected(self, capsys):
        assert run(capsys, "compare", "--strategies", "cosine")[0] == 2


class TestRender:
    def test_arch_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(capsys, "render", "--preset", "arch", "--seed", "7", "--out", str(a))[0] == 0
        assert run(capsys, "render", "--preset", "arch", "--seed", "7", "--out", str(b))[0] == 0
        pngs = sorted(p.name for p in a.glob("*.png"))
        assert len(pngs) == 12
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes()
        manifest = json.loads((a / "manifest.json").read_text())
        assert [v["index"] for v in manifest["views"]] == list(range(12))
        depth = io.read_dump(a / manifest["views"][0]["depth"])
        assert depth.shape == (48, 64)

    def test_triad(self, tmp_path, capsys):
        assert run(capsys, "render", "--preset", "triad", "--out", str(tmp_path))[0] == 0
        assert len(list(tmp_path.glob("*.png"))) == 3

    def test_unknown_preset(self, tmp_path, capsys):
        code, _, err = run(capsys, "render", "--preset", "molar", "--out", str(tmp_path))
        assert code != 0
        assert "arch" in err and "triad" in err

    def test_unwritable(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert run(capsys, "render", "--out", str(blocker / "sub"))[0] == 3


class TestLoss:
    def test_identical(self, tmp_path, capsys):
        img = np.random.default_rng(0).uniform(size=(16, 16, 3))
        io.write_png(tmp_path / "a.png", img)
        code, out, _ = run(capsys, "loss", str(tmp_path / "a.png"), str(tmp_path / "a.png"))
        assert code == 0
        assert json.loads(out)["total"] == 0.0

    def test_constant_offset(self, tmp_path, capsys):
        gt = np.random.default_rng(1).uniform(0, 0.8, size=(16, 16, 3))
        io.write_dump(tmp_path / "gt.bin", gt)
        io.write_dump(tmp_path / "off.bin", gt + 0.1)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"wavelet": {"levels": 1, "filter": "haar"}}))
        code, out, _ = run(capsys, "loss", "--config", str(cfg), str(tmp_path / "gt.bin"), str(tmp_path / "off.bin"))
        assert code == 0
        doc = json.loads(out)
        bands = doc["per_band"]["1"]
        for b in ("LH", "HL", "HH"):
            assert bands[b] == pytest.approx(0.0, abs=1e-20)
        # LL carries all of the difference energy: 16*16*3 pixels of 0.1**2
        assert bands["LL"] == pytest.approx(16 * 16 * 3 * 0.01, rel=1e-9)
        assert doc["wavelet"] == pytest.approx(bands["LL"], rel=1e-12)
        assert doc["photometric"] == pytest.approx(0.1, rel=1e-9)

    def test_zero_lambdas_warn(self, tmp_path, capsys, caplog):
        io.write_dump(tmp_path / "a.bin", np.zeros((8, 8)))
        io.write_dump(tmp_path / "b.bin", np.ones((8, 8)))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"wavelet": {"lambdas": {"LL": 0, "LH": 0, "HL": 0, "HH": 0}}}))
        code, out, err = run(capsys, "loss", "--config", str(cfg), str(tmp_path / "a.bin"), str(tmp_path / "b.bin"))
        assert code == 0
        doc = json.loads(out)
        assert doc["wavelet"] == 0.0
        assert doc["warnings"]
        assert any("zero" in r.getMessage() for r in caplog.records)

    def test_dimension_mismatch(self, tmp_path, capsys):
        io.write_dump(tmp_path / "a.bin", np.zeros((8, 8)))
        io.write_dump(tmp_path / "b.bin", np.zeros((8, 6)))
        code, _, err = run(capsys, "loss", str(tmp_path / "a.bin"), str(tmp_path / "b.bin"))
        assert code == 2
        assert "(8, 8)" in err and "(8, 6)" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run(capsys, "loss", str(tmp_path / "x.png"), str(tmp_path / "y.png"))[0] == 3


def test_dwt_dump(tmp_path, capsys):
    img = np.random.default_rng(2).uniform(size=(16, 12, 3))
    io.write_dump(tmp_path / "img.bin", img)
    out = tmp_path / "pyr.bin"
    assert run(capsys, "dwt", str(tmp_path / "img.bin"), "--out", str(out))[0] == 0
    bands = io.read_pyramid_dump(out)
    assert sorted(bands) == [1, 2]
    assert bands[1]["LL"].shape == (3, 8, 6)
    assert bands[2]["HH"].shape == (3, 4, 3)
    energy = sum(np.sum(a**2) for a in bands[1].values())
    assert energy == pytest.approx(np.sum(img**2), rel=1e-9)
    header = json.loads(out.with_suffix(".json").read_text())
    assert header["dtype"] == "<f8" and header["levels"] == 2


def test_log_env(monkeypatch, capsys):
    monkeypatch.setenv("PAIRPLAN_LOG", "debug")
    assert main(["compare", "--n-range", "3"]) == 0
