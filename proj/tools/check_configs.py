"""Validate the sample configs against docs/config.schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(__file__).resolve().parent.parent
schema = json.loads((root / "docs" / "config.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)
bad = 0
for path in sorted((root / "configs").glob("*.json")):
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {e.json_path}: {e.message}")
    bad += bool(errors)
# a few documents the parser rejects must be rejected here too
for doc in ({"bogus": 1}, {"solver": {"eta": 1}}, {"noise": {"kind": "huber", "sd": 1}},
            {"data": {"path": "a.csv", "dgp": {"kind": "kang_schafer"}}}):
    if validator.is_valid(doc):
        print(f"schema accepts {doc}")
        bad += 1
sys.exit(1 if bad else 0)
