import json
import struct
import subprocess
import sys
import xml.etree.ElementTree as ET
import zlib
from importlib import resources

import jsonschema
import pytest

from kere.cli import main

SCHEMA = json.loads(resources.files("kere").joinpath("schema/report.schema.json").read_text())
HYP = '{"surface": "Sphere", "kind": "mobius", "params": {"a": 2, "b": 0, "c": 0, "d": 1}}'
ROT = '{"surface": "Sphere", "kind": "mobius", "params": {"a": [0.6, 0.8], "b": 0, "c": 0, "d": 1}}'
TOR = '{"surface": "Torus", "kind": "torus_translation", "params": {"alpha": 0.4142135623730951, "beta": 0.7320508075688772}}'


def run_json(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


def check_png(data: bytes):
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos, chunks = 8, {}
    while pos < len(data):
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        tag, body = data[pos + 4:pos + 8], data[pos + 8:pos + 8 + n]
        (crc,) = struct.unpack(">I", data[pos + 8 + n:pos + 12 + n])
        assert crc == zlib.crc32(tag + body) & 0xFFFFFFFF
        chunks[tag] = chunks.get(tag, b"") + body
        pos += 12 + n
    w, h, depth, ctype = struct.unpack(">IIBB", chunks[b"IHDR"][:10])
    assert (depth, ctype) == (8, 2)
    assert len(zlib.decompress(chunks[b"IDAT"])) == h * (1 + 3 * w)
    assert b"IEND" in chunks


def test_classify_stdout_validates(capsys):
    code, doc = run_json(capsys, "--command", "classify", "--map", HYP)
    assert code == 0
    jsonschema.validate(doc, SCHEMA)
    assert doc["result"]["class"] == "Hyperbolic"
    assert doc["result"]["singular_clusters"] == 2


def test_map_from_file(tmp_path, capsys):
    p = tmp_path / "m.json"
    p.write_text(TOR)
    code, doc = run_json(capsys, "--map", str(p))
    assert code == 0 and doc["result"]["class"] == "TorusTranslation"


@pytest.mark.parametrize("argv", [
    ["--command", "classify"],                                  # no map
    ["--map", HYP, "--horizon", "0"],                           # bad budget
    ["--map", HYP, "--format", "json,gif"],                     # bad format
    ["--map", HYP, "--format", "png"],                          # png needs --out
    ["--map", '{"kind": "nope"}'],                              # unknown kind
    ["--map", "/nonexistent/map.json"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_argparse_error_exit_2():
    r = subprocess.run([sys.executable, "-m", "kere", "--command", "explode"],
                       capture_output=True, text=True)
    assert r.returncode == 2


def test_bad_thread_env_exit_2(monkeypatch, capsys):
    monkeypatch.setenv("KERE_THREADS", "zero")
    assert main(["--map", HYP]) == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert capsys.readouterr().out.startswith("kere ")


def test_render_outputs(tmp_path):
    out = tmp_path / "r"
    assert main(["--command", "render", "--map", ROT, "--horizon", "200",
                 "--out", str(out), "--format", "json,svg,png"]) == 0
    doc = json.loads((out / "render.json").read_text())
    jsonschema.validate(doc, SCHEMA)
    root = ET.parse(out / "render.svg").getroot()
    assert root.tag.endswith("svg")
    assert any(el.tag.endswith("polyline") or el.tag.endswith("circle") for el in root.iter())
    check_png((out / "render.png").read_bytes())


def test_analyze_and_conjugate(tmp_path):
    out = tmp_path / "a"
    assert main(["--command", "analyze", "--map", HYP, "--grid", "16", "--horizon", "100",
                 "--out", str(out), "--format", "json,csv"]) == 0
    doc = json.loads((out / "analyze.json").read_text())
    jsonschema.validate(doc, SCHEMA)
    assert (out / "singular.csv").read_text().splitlines()[0]
    out = tmp_path / "c"
    assert main(["--command", "conjugate", "--map", TOR, "--grid", "16",
                 "--out", str(out), "--format", "json,svg"]) == 0
    doc = json.loads((out / "conjugate.json").read_text())
    jsonschema.validate(doc, SCHEMA)
    assert doc["result"]["status"] == "determined"
    assert float(doc["result"]["conjugacy"]["residual"]) < 1e-6


def test_conjugate_without_construction_is_undetermined(capsys):
    code, doc = run_json(capsys, "--command", "conjugate", "--map", HYP)
    assert code == 0
    jsonschema.validate(doc, SCHEMA)
    assert doc["result"]["status"] == "undetermined"


def test_output_is_deterministic(capsys):
    _, a = run_json(capsys, "--map", ROT, "--seed", "3")
    _, b = run_json(capsys, "--map", ROT, "--seed", "3")
    assert json.dumps(a) == json.dumps(b)


def test_render_torus_translation_has_orbit_polyline(tmp_path):
    golden = '{"surface": "Torus", "kind": "torus_translation", "params": {"alpha": 0.6180339887498949, "beta": 0}}'
    out = tmp_path / "t"
    assert main(["--command", "render", "--map", golden, "--out", str(out), "--format", "svg"]) == 0
    root = ET.parse(out / "render.svg").getroot()
    assert any(el.tag.endswith("polyline") and el.get("class") == "orbit" for el in root.iter())


def test_analyze_rotation_profile_reports_full_singular_set(capsys):
    code, doc = run_json(capsys, "--command", "analyze", "--map",
                         '{"surface": "Sphere", "kind": "rotation_profile", "params": {}}')
    assert code == 0
    jsonschema.validate(doc, SCHEMA)
    assert float(doc["result"]["singular_fraction"]) >= 0.95
    assert doc["config"]["budgets"]["horizon"] == 500
