import json

import numpy as np
import pytest

from vacuumlab.config import SCHEMAS, ScenarioConfig, load_config, parse_values
from vacuumlab.errors import CheckpointError, ConfigError
from vacuumlab.io import (atomic_write_bytes, checkpoint_bytes, csv_text, dumps, fmt,
                          load_checkpoint, read_csv, save_checkpoint, tree_digest)


# ---- configs ---------------------------------------------------------------
@pytest.mark.parametrize("kind", sorted(SCHEMAS))
def test_defaults_round_trip(kind):
    cfg = ScenarioConfig.from_dict({"kind": kind})
    again = ScenarioConfig.from_dict(__import__("yaml").safe_load(cfg.dumps()))
    assert again == cfg
    assert again.hash == cfg.hash
    assert again.dumps() == cfg.dumps()


def test_yaml_exponent_strings_accepted(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("kind: euler1d\nperturbation: {kind: bump, amplitude: 1e-3, mode: 2}\ndt: 1e-2\nT_end: 1.0\n")
    cfg = load_config(p)
    assert cfg.params["dt"] == 0.01
    assert cfg.params["perturbation"] == {"kind": "bump", "amplitude": 0.001, "mode": 2}


def test_hash_ignores_output_dir():
    a = ScenarioConfig.from_dict({"kind": "affine", "output_dir": "x"})
    b = ScenarioConfig.from_dict({"kind": "affine", "output_dir": "y"})
    assert a.hash == b.hash
    assert a.hash != ScenarioConfig.from_dict({"kind": "affine", "gamma": 1.2}).hash


@pytest.mark.parametrize("doc,path", [
    ({}, "kind"),
    ({"kind": "nope"}, "kind"),
    ({"kind": "euler1d", "gamma": 0.9}, "gamma"),
    ({"kind": "euler1d", "n_nodes": 4}, "n_nodes"),
    ({"kind": "euler1d", "n_nodes": 64.5}, "n_nodes"),
    ({"kind": "euler1d", "perturbation": {"kind": "wave"}}, "perturbation.kind"),
    ({"kind": "euler1d", "perturbation": {"amplitude": 2.0}}, "perturbation.amplitude"),
    ({"kind": "euler1d", "dt": 0.03, "T_end": 1.0}, "dt"),
    ({"kind": "euler1d", "filter": True, "family": "uniform"}, "filter"),
    ({"kind": "affine", "fit_window": [10, 5]}, "fit_window"),
    ({"kind": "affine", "A0": [[1, 0], [0, 1]]}, "A0"),
    ({"kind": "affine", "bogus": 1}, "bogus"),
    ({"kind": "weights-suite", "kappas": [0.5]}, "kappas[0]"),
])
def test_validation_names_the_field(doc, path):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict(doc)
    assert exc.value.path == path


def test_with_value_and_axes():
    cfg = ScenarioConfig.from_dict({"kind": "euler1d"})
    assert cfg.with_value("gamma", 3.0).params["gamma"] == 3.0
    assert cfg.with_value("perturbation.amplitude", 0.0).params["perturbation"]["amplitude"] == 0.0
    assert cfg.value_of("perturbation.mode") == 1
    with pytest.raises(ConfigError):
        cfg.with_value("nope", 1)
    with pytest.raises(ConfigError):
        cfg.with_value("gamma", -1)


def test_parse_values():
    assert parse_values("1.2, 1.5,2") == [1.2, 1.5, 2]
    assert parse_values("") == []
    assert parse_values("true,x") == [True, "x"]


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("kind: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)


# ---- serialization ---------------------------------------------------------
def test_fmt_round_trips_floats():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fmt(v)) == v
    assert fmt(np.int64(3)) == "3" and fmt(True) == "true" and fmt(None) == ""


def test_csv_round_trip(tmp_path):
    rows = [[0.0, 1 / 3, 2e-17], [1.0, np.pi, -4.0]]
    atomic_write_bytes(tmp_path / "a.csv", csv_text(["t", "a", "b"], rows).encode())
    header, back = read_csv(tmp_path / "a.csv")
    assert header == ["t", "a", "b"]
    assert back == [[float(v) for v in r] for r in rows]


def test_dumps_is_canonical():
    a = dumps({"b": np.float64(0.5), "a": [np.int32(1), np.array([1.0, 2.0])]})
    assert a == dumps({"a": [1, [1.0, 2.0]], "b": 0.5})
    assert json.loads(a)["a"] == [1, [1.0, 2.0]]


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write_bytes(tmp_path / "sub" / "f.bin", b"abc")
    atomic_write_bytes(tmp_path / "sub" / "f.bin", b"xyz")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.bin"]
    assert (tmp_path / "sub" / "f.bin").read_bytes() == b"xyz"
    assert set(tree_digest(tmp_path)) == {"sub/f.bin"}


# ---- checkpoints -----------------------------------------------------------
def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"v": rng.standard_normal(17), "m": rng.standard_normal((3, 4))}
    meta = {"dt": 0.1, "step_index": 7}
    save_checkpoint(tmp_path / "c.vlck", meta, arrays)
    m2, a2 = load_checkpoint(tmp_path / "c.vlck")
    assert m2 == meta
    for k in arrays:
        assert a2[k].tobytes() == arrays[k].tobytes()
    assert checkpoint_bytes(meta, arrays) == (tmp_path / "c.vlck").read_bytes()


def test_checkpoint_corruption_detected(tmp_path):
    p = tmp_path / "c.vlck"
    save_checkpoint(p, {"dt": 0.1}, {"v": np.arange(5.0)})
    raw = bytearray(p.read_bytes())
    raw[-10] ^= 0x01
    p.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(p)


def test_checkpoint_wrong_magic_and_version(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(b"hello")
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    good = checkpoint_bytes({}, {})
    p.write_bytes(good.replace(b"version 1", b"version 9"))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(p)
