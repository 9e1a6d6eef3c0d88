import json
import math
import re

import pytest

from hamrgg import cells, fixtures, geom, harness
from hamrgg.certificate import CycleCertificate
from hamrgg.harness import ExperimentConfig

from conftest import square_corners


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n=(10,), k=(2,), mode="bogus")
    with pytest.raises(ValueError):
        ExperimentConfig(n=(10,), k=(0,))
    with pytest.raises(ValueError):
        ExperimentConfig(n=(10,), k=(2,), trials=-1)
    with pytest.raises(ValueError):
        ExperimentConfig(n=(500,), k=(2,), mode="oracle")
    cfg = ExperimentConfig(n=10, k=2, p="inf")
    assert cfg.n == (10,) and cfg.p == (math.inf,)


def test_groups_drop_odd_odd_and_tiny_n():
    cfg = ExperimentConfig(n=(3, 8, 9), k=(1, 3), p=(1, 2))
    assert cfg.groups() == [(8, 1, 1.0), (8, 3, 1.0), (8, 1, 2.0), (8, 3, 2.0)]


def test_trial_seed_depends_on_every_coordinate():
    base = harness.trial_seed(0, 10, 2, 2.0, 0)
    others = [harness.trial_seed(1, 10, 2, 2.0, 0), harness.trial_seed(0, 12, 2, 2.0, 0),
              harness.trial_seed(0, 10, 3, 2.0, 0), harness.trial_seed(0, 10, 2, math.inf, 0),
              harness.trial_seed(0, 10, 2, 2.0, 1)]
    assert base not in others
    assert base == harness.trial_seed(0, 10, 2, 2.0, 0)


def test_zero_trials_csv_is_header_only(tmp_path):
    path = tmp_path / "t.csv"
    cfg = ExperimentConfig(n=(8,), k=(2,), trials=0, csv_path=str(path))
    records, summary = harness.run_experiment(cfg)
    assert records == []
    lines = path.read_text().splitlines()
    assert lines == [harness.CSV_HEADER, ",".join(harness.COLUMNS)]
    assert summary["groups"][0]["trials"] == 0
    assert summary["groups"][0]["mindeg_eq_conn"]["wilson95"] is None


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        harness.run_experiment(ExperimentConfig(n=(8, 10), k=(1, 2), trials=4, seed=5, csv_path=str(path)))
    assert a.read_bytes() == b.read_bytes()
    rows = harness.read_csv(str(a))
    assert len(rows) == 2 * 2 * 4
    assert set(rows[0]) == set(harness.COLUMNS)


def test_summary_fields_and_consistency(tmp_path):
    js = tmp_path / "s.json"
    cfg = ExperimentConfig(n=(10,), k=(2,), p=(1, "inf"), trials=6, seed=2, json_path=str(js))
    records, summary = harness.run_experiment(cfg)
    on_disk = json.loads(js.read_text())
    assert on_disk["groups"] == summary["groups"]
    assert summary["format"] == "hamrgg-summary v1"
    assert summary["config"]["p"] == ["1", "inf"]
    for g in summary["groups"]:
        assert g["trials"] == 6
        assert g["mindeg_le_conn"] and g["mindeg_le_pack"]
        assert g["sharp_failures"] == 0
        assert g["counterexamples"] == g["counterexamples_verified"]
        lo, hi = g["mindeg_eq_conn"]["wilson95"]
        frac = g["mindeg_eq_conn"]["count"] / g["mindeg_eq_conn"]["of"]
        assert 0 <= lo <= frac <= hi <= 1
    for r in records:
        assert r.mindeg_index <= r.conn_index
        assert r.sharp == "ok"


def test_wilson_known_value():
    lo, hi = harness.wilson(5, 10)
    # closed form for the Wilson score interval
    z = 1.959963984540054
    c = (0.5 + z * z / 20) / (1 + z * z / 10)
    h = z * math.sqrt(0.25 / 10 + z * z / 400) / (1 + z * z / 10)
    assert lo == pytest.approx(c - h) and hi == pytest.approx(c + h)
    assert harness.wilson(0, 0) is None


def test_read_csv_rejects_foreign_text():
    with pytest.raises(ValueError):
        harness.read_csv("a,b\n1,2\n")


def test_workers_from_env(monkeypatch):
    monkeypatch.setenv("HAMRGG_WORKERS", "3")
    assert harness.workers_from_env() == 3
    monkeypatch.setenv("HAMRGG_WORKERS", "0")
    with pytest.raises(ValueError):
        harness.workers_from_env()
    monkeypatch.delenv("HAMRGG_WORKERS")
    assert harness.workers_from_env(2) == 2


def test_builder_mode_trial_is_named():
    cfg = ExperimentConfig(n=(600,), k=(2,), trials=1, mode="builder")
    rec = harness.run_trial(cfg, 600, 2, 2.0, 0)
    assert rec.mindeg_index <= rec.conn_index
    assert rec.pack_index is None and rec.sharp == ""
    assert rec.builder == "radius-window:radius-window"


# -- SVG ---------------------------------------------------------------------

def test_svg_square_with_cycle():
    ps = square_corners()
    cert = CycleCertificate(2, 4, [[0, 1, 2, 3]], [], 4, 1.0)
    svg = harness.plot_instance(ps, cert)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<circle") == 4
    [poly] = re.findall(r'<polygon class="cycle" points="([^"]+)"', svg)
    assert len(poly.split()) == 4


def test_svg_points_only():
    ps = geom.generate_points(30, 2, seed=0)
    svg = harness.plot_instance(ps)
    assert svg.count("<circle") == 30
    assert "<polygon" not in svg and "<line" not in svg and 'class="cells"' not in svg


def test_svg_matching_lines():
    ps = square_corners()
    cert = CycleCertificate(1, 4, [], [(0, 1), (2, 3)], 4, 1.0)
    svg = harness.plot_instance(ps, cert)
    assert svg.count('class="matching"') == 2


def test_svg_cells_overlay():
    ps, cfg, _ = fixtures.hole_lattice(2)
    cls = cells.tessellate(ps, 0.19, fixtures.DELTA, cfg.M, 2, check_delta=False)
    svg = harness.plot_instance(ps, cls=cls)
    kinds = set(re.findall(r'<rect class="(\w+)"', svg))
    assert kinds == {"dense", "sparse", "bad"}
    assert svg.count('class="bad"') == sum(b.size for b in cls.bad_components)
