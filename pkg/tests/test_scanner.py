import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from eqm.cli import main
from eqm.errors import ConfigError
from eqm.scanner import (EXIT_AMBIGUOUS, EXIT_CONFIG, EXIT_COVERAGE, EXIT_OK, EXIT_SOLVER,
                         ScanCell, ScanResult, load_config, read_scan_csv, run_scan)

ROOT = Path(__file__).resolve().parents[1]


def write_cfg(tmp_path, doc, name="cfg.json"):
    doc = {"schema_version": 1, "output": {"dir": str(tmp_path / "out")}, **doc}
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def quartic(sigma):
    return {"p": 2, "t": [[0, 0], [sigma.real, sigma.imag], [0, 0]]}


def svg_description(path):
    for el in ET.parse(path).iter():
        if el.tag.endswith("description") or el.tag.endswith("}description"):
            return el.text
    text = Path(path).read_text()
    assert "provenance" in text
    return text


def test_solve_semicircle_config(tmp_path):
    cfg = ROOT / "configs" / "semicircle.json"
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "solve.json").read_text())
    a = complex(*doc["solve"]["a"][0])
    b = complex(*doc["solve"]["b"][0])
    assert abs(a + 2) < 1e-10 and abs(b - 2) < 1e-10
    assert doc["mass_ok"]
    assert complex(*doc["lagrange"]) == pytest.approx(-1, abs=1e-8)
    assert "config_hash" in doc["provenance"]


def test_solve_quartic_sigma_zero(tmp_path):
    cfg = write_cfg(tmp_path, {"potential": quartic(0j), "q": 1})
    assert main(["solve", "--config", str(cfg)]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "solve.json").read_text())
    b = complex(*doc["solve"]["b"][0])
    assert abs(b) == pytest.approx((16 / 3) ** 0.25, abs=1e-9)
    assert abs(b) == pytest.approx(1.51967, abs=1e-5)


def test_missing_p_is_config_error(tmp_path):
    cfg = write_cfg(tmp_path, {"potential": {"t": [[0, 0]]}, "mode": "solve"})
    assert main(["solve", "--config", str(cfg)]) == EXIT_CONFIG
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("doc", [
    {"potential": {"p": 1, "t": [[0, 0]]}, "bogus": 1},
    {"potential": {"p": 2, "t": [[0, 0]]}},
    {"potential": {"p": 1, "t": [[0, 0]]}, "q": 3},
    {"potential": {"p": 1, "t": [[0, 0]]}, "numerics": {"quad_tol": -1}},
])
def test_invalid_configs_rejected(tmp_path, doc):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, doc))


def test_unreadable_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["classify", "--config", str(p)]) == EXIT_CONFIG


def test_graph_semicircle(tmp_path):
    cfg = write_cfg(tmp_path, {"potential": {"p": 1, "t": [[0, 0]]}, "q": 1})
    assert main(["graph", "--config", str(cfg), "--svg"]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "graph.json").read_text())
    assert doc["census"]["cut"] == 1 and doc["census"]["ray"] == 4
    cut = [e for e in doc["edges"] if e["kind"] == "cut"][0]
    pts = np.array([complex(*z) for z in cut["polyline"]])
    assert np.max(np.abs(pts.imag)) < 1e-8
    # rays leave towards the four diagonal directions
    far = [complex(*e["polyline"][-1]) for e in doc["edges"] if e["kind"] == "ray"]
    angs = sorted(np.mod(np.angle(far), 2 * np.pi))
    assert np.allclose(angs, [math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4, 7 * math.pi / 4],
                       atol=0.05)
    svg = tmp_path / "out" / "graph.svg"
    assert svg.exists() and "provenance" in svg_description(svg)


def test_graph_quartic_humps(tmp_path):
    cfg = write_cfg(tmp_path, {"potential": quartic(1 + 1j), "q": 1})
    assert main(["graph", "--config", str(cfg)]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "graph.json").read_text())
    assert doc["census"]["hump"] == 2 and doc["census"]["cut"] == 1


def test_graph_without_convergence_writes_no_svg(tmp_path):
    seed = {"a": [[-40, 0], [3, 0], [9, 0]], "b": [[2, 0], [7, 0], [50, 5]]}
    cfg = write_cfg(tmp_path, {"potential": quartic(1 + 1j), "q": 3, "seed": seed,
                               "numerics": {"max_iter": 3}})
    assert main(["graph", "--config", str(cfg), "--svg"]) == EXIT_SOLVER
    assert not (tmp_path / "out" / "graph.svg").exists()


def test_solve_without_convergence(tmp_path):
    seed = json.dumps({"a": [[-40, 0], [3, 0], [9, 0]], "b": [[2, 0], [7, 0], [50, 5]]})
    cfg = write_cfg(tmp_path, {"potential": quartic(1 + 1j), "q": 3,
                               "numerics": {"max_iter": 3}})
    assert main(["solve", "--config", str(cfg), "--seed", seed]) == EXIT_SOLVER
    assert not (tmp_path / "out" / "solve.json").exists()


def test_classify_selects_q(tmp_path):
    cfg = write_cfg(tmp_path, {"potential": quartic(1 + 1j)})
    assert main(["classify", "--config", str(cfg)]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "classify.json").read_text())
    assert doc["selected_q"] == 1 and "provenance" in doc


def test_classify_three_cut_config(tmp_path):
    cfg = ROOT / "configs" / "quartic_three_cut.json"
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert doc["selected_q"] == 3


def test_classify_zeros_on_support_exit_code(tmp_path):
    # on the real axis just past sigma = -2 the one-cut h has zeros on the support
    cfg = write_cfg(tmp_path, {"potential": quartic(-2.1 + 0j), "q": 1})
    assert main(["classify", "--config", str(cfg)]) == EXIT_AMBIGUOUS
    doc = json.loads((tmp_path / "out" / "classify.json").read_text())
    rep = doc["reports"]["1"]
    assert rep["verdict"] != "regular"


def test_scan_single_cell_matches_classify(tmp_path):
    sigma = 1 + 1j
    scan = {"axes": [{"index": 2, "component": "re", "range": [1, 1], "n": 1},
                     {"index": 2, "component": "im", "range": [1, 1], "n": 1}]}
    cfg = write_cfg(tmp_path, {"potential": quartic(0j), "mode": "scan", "scan": scan})
    assert main(["scan", "--config", str(cfg), "--svg"]) == EXIT_OK
    rows = read_scan_csv(tmp_path / "out" / "scan.csv")
    assert len(rows) == 1 and rows[0]["verdict"] == "regular" and rows[0]["q"] == "1"
    cfg2 = write_cfg(tmp_path, {"potential": quartic(sigma)}, "c2.json")
    assert main(["classify", "--config", str(cfg2)]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "classify.json").read_text())
    assert doc["selected_q"] == int(rows[0]["q"])
    b = complex(*doc["reports"]["1"]["b"][0])
    assert complex(float(rows[0]["b1_re"]), float(rows[0]["b1_im"])) == pytest.approx(b, abs=1e-9)


def test_scan_outputs_and_determinism(tmp_path, monkeypatch):
    scan = {"axes": [{"index": 2, "component": "re", "range": [0.5, 1.5], "n": 3},
                     {"index": 2, "component": "im", "range": [0.5, 1.0], "n": 2}],
            "block_rows": 1}
    cfg = write_cfg(tmp_path, {"potential": quartic(0j), "mode": "scan", "scan": scan})
    monkeypatch.setenv("EQM_THREADS", "2")
    cache = tmp_path / "cache.json"
    assert main(["scan", "--config", str(cfg), "--svg", "--cache", str(cache)]) == EXIT_OK
    out = tmp_path / "out"
    text = (out / "scan.csv").read_text().splitlines()
    assert text[0].startswith("# provenance: ")
    assert json.loads(text[0][len("# provenance: "):])["config_hash"]
    assert text[1] == ("re_coord,im_coord,verdict,q,a1_re,a1_im,b1_re,b1_im,a2_re,a2_im,"
                       "b2_re,b2_im,a3_re,a3_im,b3_re,b3_im,residual,wall_ms")
    doc = json.loads((out / "scan.json").read_text())
    assert doc["provenance"]["artifact_version"]
    assert len(doc["cells"]) == 6 and doc["resolved_fraction"] == 1.0
    assert "provenance" in svg_description(out / "scan.svg")
    assert cache.exists()
    first = [(r["re_coord"], r["im_coord"], r["verdict"], r["q"])
             for r in read_scan_csv(out / "scan.csv")]
    monkeypatch.setenv("EQM_THREADS", "1")
    assert main(["scan", "--config", str(cfg), "--cache", str(cache)]) == EXIT_OK
    second = [(r["re_coord"], r["im_coord"], r["verdict"], r["q"])
              for r in read_scan_csv(out / "scan.csv")]
    assert first == second


def test_bad_thread_env(tmp_path, monkeypatch):
    scan = {"axes": [{"index": 2, "component": "re", "range": [1, 1], "n": 1}]}
    cfg = write_cfg(tmp_path, {"potential": quartic(0j), "mode": "scan", "scan": scan})
    monkeypatch.setenv("EQM_THREADS", "many")
    assert main(["scan", "--config", str(cfg)]) == EXIT_CONFIG


def test_low_coverage_exit_code(tmp_path, monkeypatch):
    import eqm.scanner as sc

    cells = [ScanCell(0, j, (float(j), 0.0), "unsolvable") for j in range(3)]
    monkeypatch.setattr(sc, "run_scan_grid",
                        lambda cfg, threads, cache: ScanResult((1, 3), [], cells, {}))
    scan = {"axes": [{"index": 2, "component": "re", "range": [0, 2], "n": 3}]}
    cfg = load_config(write_cfg(tmp_path, {"potential": quartic(0j), "mode": "scan",
                                           "scan": scan}))
    code, res = run_scan(cfg, 1, log=lambda m: None)
    assert code == EXIT_COVERAGE and res.resolved_fraction() == 0
