import json
from pathlib import Path

import numpy as np
import pytest

from augen.cli import EXIT_CONFIG, EXIT_OK, main
from augen.config import ConfigError, load_config, parse_config

TINY = {
    "field": {"name": "double_gyre", "params": {}},
    "eps": 0.1,
    "grid": {"counts": [16, 8], "time": {"scheme": "ulam", "slices": 6}},
    "eigs": {"k": 3, "mode": "largest-real-part", "tol": 1e-8},
    "extract": {"indices": [1], "phases": [0.0], "times": [0.0, 0.5]},
    "escape": {"n": 2000, "step": 0.16666666666666666, "start": 0.0, "end": 2.0,
               "runs": 1, "index": 1},
    "ulam_compare": {"points_per_box": 40, "step": 0.16666666666666666,
                     "s": 0.0, "t": 1.0, "k": 3},
    "seed": 5,
    "output": "out",
}


def write_config(tmp_path, doc=None, **overrides):
    doc = json.loads(json.dumps(doc if doc is not None else TINY))
    doc.update(overrides)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(doc, indent=1))
    return path


def test_parse_valid():
    cfg = parse_config(json.loads(json.dumps(TINY)))
    assert cfg.scheme == "ulam" and cfg.time_size == 6
    assert cfg.counts == (16, 8)


@pytest.mark.parametrize("mutate,fragment", [
    (lambda d: d.pop("field"), "config.field"),
    (lambda d: d["field"].pop("name"), "config.field.name"),
    (lambda d: d["field"].update(name="nope"), "unknown field"),
    (lambda d: d.update(eps=-1), "config.eps"),
    (lambda d: d["grid"].update(counts=[16]), "config.grid.counts"),
    (lambda d: d["grid"]["time"].update(scheme="cheby"), "scheme"),
    (lambda d: (d["grid"]["time"].pop("slices"),
                d["grid"]["time"].update(scheme="hybrid", modes=4)), "odd"),
    (lambda d: d["eigs"].update(k=0), "config.eigs.k"),
    (lambda d: d["eigs"].update(mode="biggest"), "config.eigs.mode"),
    (lambda d: d["extract"].update(indices=[99]), "config.extract.indices"),
    (lambda d: d.update(time_rule="best"), "config.time_rule"),
    (lambda d: d.update(threads=-2), "config.threads"),
])
def test_parse_rejects_with_path(mutate, fragment):
    doc = json.loads(json.dumps(TINY))
    mutate(doc)
    with pytest.raises(ConfigError, match=fragment):
        parse_config(doc)


def test_load_reports_syntax_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "field": {,}\n}\n')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(path)


def test_cli_config_error_exit_code(tmp_path):
    path = write_config(tmp_path, eps=-3)
    assert main(["eigs", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_cli_missing_config():
    assert main(["eigs"]) == EXIT_CONFIG


def test_cli_assemble_and_eigs_roundtrip(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["assemble", "--config", str(path), "--out", str(out)]) == EXIT_OK
    mtx = (out / "generator.mtx").read_text()
    assert mtx.startswith("%%MatrixMarket")
    assert "config_hash" in mtx

    assert main(["eigs", "--config", str(path), "--out", str(out)]) == EXIT_OK
    spectrum = (out / "spectrum.csv").read_text()
    assert "config_hash" in spectrum
    vecs = np.load(out / "eigenvectors.npy")
    side = json.loads((out / "eigenvectors.json").read_text())
    assert vecs.shape == (3, 6, 16 * 8)
    assert side["n_slices"] == 6 and side["scheme"] == "ulam"
    # kernel eigenvalue present
    evs = [complex(re, im) for re, im in side["eigenvalues"]]
    assert min(abs(v) for v in evs) < 1e-10


def test_cli_idempotent_outputs(tmp_path):
    path = write_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["eigs", "--config", str(path), "--out", str(out)]) == EXIT_OK
    assert (out1 / "spectrum.csv").read_bytes() == (out2 / "spectrum.csv").read_bytes()


def test_cli_extract_escape_flux_compare(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["extract", "--config", str(path), "--out", str(out)]) == EXIT_OK
    slices = sorted(out.glob("slice_ev1_*.csv"))
    sets = sorted(out.glob("sets_ev1_*.json"))
    assert len(slices) == 2 and len(sets) == 2
    doc = json.loads(sets[0].read_text())
    assert set(doc) >= {"header", "time", "plus_boxes", "minus_boxes"}

    assert main(["escape", "--config", str(path), "--out", str(out)]) == EXIT_OK
    table = json.loads((out / "escape.json").read_text())
    fams = {row["family"]: row for row in table["results"]}
    assert set(fams) == {"plus", "minus"}
    assert all(np.isfinite(row["rate_mean"]) for row in table["results"])
    assert (out / "survival_plus_run0.csv").exists()

    assert main(["flux", "--config", str(path), "--out", str(out)]) == EXIT_OK
    flux = json.loads((out / "flux.json").read_text())
    assert flux["max_rel_gap"] <= 1e-8

    assert main(["ulam-compare", "--config", str(path), "--out", str(out)]) == EXIT_OK
    cmp_doc = json.loads((out / "ulam_compare.json").read_text())
    assert len(cmp_doc["rows"]) == 3
    lam1 = complex(cmp_doc["rows"][0]["lambda"]["re"], cmp_doc["rows"][0]["lambda"]["im"])
    assert abs(lam1 - 1.0) < 0.05  # leading transfer eigenvalue near 1


def test_cli_box_family_flux(tmp_path):
    path = write_config(tmp_path, flux={"kind": "box-family", "index": 1, "sign": "+"})
    out = tmp_path / "out"
    assert main(["flux", "--config", str(path), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "flux.json").read_text())
    assert doc["kind"] == "box-family"
    assert np.isfinite(doc["flux"]) and doc["flux"] >= 0.0


def test_cli_seed_override_changes_outputs(tmp_path):
    path = write_config(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["escape", "--config", str(path), "--out", str(out1)]) == EXIT_OK
    assert main(["escape", "--config", str(path), "--out", str(out2),
                 "--seed-override", "123"]) == EXIT_OK
    a = (out1 / "survival_plus_run0.csv").read_text()
    b = (out2 / "survival_plus_run0.csv").read_text()
    assert a != b


def test_reference_configs_parse():
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("double_gyre_ulam.json", "bickley_hybrid.json",
                 "bickley_hybrid_small.json"):
        cfg = load_config(root / name)
        assert cfg.eigs["k"] >= 11


def test_cli_selftest():
    assert main(["selftest", "--out", "/tmp/augen-selftest"]) == EXIT_OK
