import math

import numpy as np
import pytest
from jsonschema import Draft202012Validator

from sfwmarray.array import ModalEnvelope
from sfwmarray.errors import IoError, ParseError, ValidationError
from sfwmarray.io import (
    GRID_HEADER,
    coupler_spec,
    dumps_json,
    jsa_document,
    jsa_from_document,
    load_materials,
    materials_for,
    parse_config,
    read_grid_csv,
    read_json,
    report_schema,
    write_grid_csv,
    write_json,
    write_report_json,
    write_table_csv,
)
from sfwmarray.jsa import GridSpec, JsaGrid, PumpSpec, build_jsa
from sfwmarray.materials import refractive_index


def errors_of(text):
    with pytest.raises(ValidationError) as info:
        parse_config(text=text)
    return info.value.errors


def test_shipped_config(reference_config, lib):
    cfg = reference_config
    assert cfg.array.n_guides == 20 and cfg.array.guide == 7
    assert cfg.array.excitation[8] == 1 and sum(abs(a) for a in cfg.array.excitation) == 1
    assert cfg.array.length is None and cfg.pump.bandwidth is None
    assert cfg.grid == GridSpec(256, 256, 4.0, 4.0)
    spec = coupler_spec(cfg, lib)
    assert spec.wavelength == 1.37 and spec.gap == 0.4 and spec.aux_order == 1


def test_empty_config_uses_defaults():
    cfg = parse_config(text="")
    assert cfg.coupler.target_coupling_length == 500.0
    assert cfg.array.n_guides == 20


def test_negative_gap_names_field():
    errs = errors_of("[coupler]\ngap = -0.1\n")
    assert len(errs) == 1 and "coupler.gap" in errs[0]


def test_excitation_length_mismatch():
    errs = errors_of("[array]\nn_guides = 4\nexcitation = [1, 0, [0, 1]]\n")
    assert any("array.excitation" in e and "array.n_guides" in e for e in errs)
    errs = errors_of("[array]\nn_guides = 4\nexcited_guide = 4\n")
    assert any("array.excited_guide" in e for e in errs)


def test_complex_excitation():
    cfg = parse_config(text="[array]\nn_guides = 3\nguide = 1\nexcitation = [1, 0, [0, 0.5]]\n")
    assert cfg.array.excitation == (1, 0, 0.5j)


def test_all_errors_reported_together():
    errs = errors_of("[coupler]\ngap = -1\nsweep_steps = 0\n[grid]\nn_signal = 1\n[pump]\nshape = 'box'\n")
    joined = "\n".join(errs)
    for field in ("coupler.gap", "coupler.sweep_steps", "grid.n_signal", "pump.shape"):
        assert field in joined
    assert len(errs) >= 4


def test_unknown_keys_rejected():
    errs = errors_of("[coupler]\ngapp = 0.4\n[extra]\nx = 1\n")
    joined = "\n".join(errs)
    assert "gapp" in joined and "extra" in joined


def test_parse_error_has_location():
    with pytest.raises(ParseError, match="line 2"):
        parse_config(text="[coupler]\ngap = = 0.4\n")


def test_missing_files(tmp_path):
    with pytest.raises(IoError):
        parse_config(tmp_path / "nope.toml")
    with pytest.raises(IoError):
        load_materials(tmp_path / "nope.toml")
    cfg = parse_config(text="[materials]\ncore = 'unobtainium'\n")
    with pytest.raises(ValidationError, match="unobtainium"):
        materials_for(cfg)


def test_custom_material_library(tmp_path):
    path = tmp_path / "mats.toml"
    path.write_text(
        'version = "t"\n[materials.glass]\nkind = "constant"\nindex = 1.5\nvalid_range = [0.5, 2.0]\n'
        '[materials.silicon]\nkind = "constant"\nindex = 3.5\nvalid_range = [0.5, 2.0]\n'
        '[materials.silica]\nkind = "constant"\nindex = 1.45\nvalid_range = [0.5, 2.0]\n'
        '[materials.air]\nkind = "constant"\nindex = 1.0\nvalid_range = [0.5, 2.0]\n'
    )
    lib = load_materials(path)
    assert refractive_index(lib["glass"], 1.0) == 1.5
    (tmp_path / "run.toml").write_text('[materials]\npath = "mats.toml"\n')
    cfg = parse_config(tmp_path / "run.toml")
    assert refractive_index(materials_for(cfg)["silicon"], 1.3) == 3.5


def test_grid_csv_round_trip(tmp_path, channels, guide7_envelope):
    jsa = build_jsa(PumpSpec(1.17, 0.0133, 1.37), channels, guide7_envelope, GridSpec(16, 12))
    path = tmp_path / "jsa.csv"
    write_grid_csv(jsa, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == ",".join(GRID_HEADER).encode()
    back = read_grid_csv(path)
    assert np.array_equal(back.signal_axis, jsa.signal_axis)
    assert np.array_equal(back.idler_axis, jsa.idler_axis)
    assert np.array_equal(back.amplitude, jsa.amplitude)


def test_empty_grid_csv(tmp_path):
    empty = JsaGrid(np.zeros(0), np.zeros(0), np.zeros((0, 0), dtype=complex))
    path = tmp_path / "empty.csv"
    write_grid_csv(empty, path)
    assert path.read_text() == ",".join(GRID_HEADER) + "\n"
    assert read_grid_csv(path).amplitude.size == 0


def test_table_csv_format(tmp_path):
    path = tmp_path / "t.csv"
    write_table_csv(("a", "b", "c"), [(0.1, 3, "x,y"), (1 / 3, True, "z")], path)
    lines = path.read_text().split("\n")
    assert lines[1] == '0.10000000000000001,3,"x,y"'
    assert float(lines[2].split(",")[0]) == 1 / 3


def test_json_round_trip(tmp_path, channels):
    env = ModalEnvelope.constant(1.0, 305.0)
    jsa = build_jsa(PumpSpec(1.17, 0.0133, 1.37), channels, env, GridSpec(8, 8))
    path = tmp_path / "jsa.json"
    write_json(jsa_document(jsa), path)
    back = jsa_from_document(read_json(path))
    assert np.array_equal(back.amplitude, jsa.amplitude) and back.normalized
    text = dumps_json({"b": 1, "a": [0.1, None, True]})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text
    with pytest.raises(IoError):
        dumps_json({"x": math.nan})


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ParseError):
        read_json(path)


def test_report_matches_schema(tmp_path, reference_report):
    path = tmp_path / "report.json"
    write_report_json(reference_report, path)
    doc = read_json(path)
    Draft202012Validator(report_schema()).validate(doc)
    assert list(doc) == list(reference_report.to_dict())
    assert doc["baseline_purity"] == reference_report.baseline_purity
