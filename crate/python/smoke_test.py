"""Smoke test for the Python bindings.

Build with `cargo build -p blender-forge-py` and copy
target/debug/libblender_forge.so next to this file as blender_forge.so.
"""

import json
import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import blender_forge as bf  # noqa: E402

SPECS = pathlib.Path(__file__).resolve().parent.parent / "specs"


def main():
    doc = json.loads((SPECS / "sf1.json").read_text())
    spec = json.dumps(doc["cycle"])

    witnesses = json.loads(bf.check_a1(spec, 4, 1))
    assert witnesses and all(w["valid"] for w in witnesses)

    c = json.loads(bf.coeffs(spec, 116, 163))
    assert c["k"] == 116 and math.isfinite(c["A_km"])

    wide = json.dumps({**doc["cycle"], "c_frac": 0.5})
    cert = json.loads(bf.certify_ifs(wide, [0.5] * 5, [-0.04, -0.02, 0.0, 0.02, 0.04]))
    assert cert["blender_kind"] == "cs"

    out, code = bf.run("pipeline", json.dumps(doc), seed=3)
    env = json.loads(out)
    assert code == 0 and env["schema"] == bf.SCHEMA
    assert env["result"]["case"] == "SF-1"
    assert env["result"]["verdicts"]["certified"] == ["cs"]

    out, code = bf.run("moduli", json.dumps({"cycle": {}}))
    assert code == 1 and json.loads(out)["error"]["kind"] == "invalid_spec"

    try:
        bf.coeffs(json.dumps({**doc["cycle"], "lambda": 2.0}), 1, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid spec accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
