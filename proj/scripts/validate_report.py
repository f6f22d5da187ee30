"""Validates report.json files against schema/report.schema.json."""

import json
import pathlib
import sys

import jsonschema

schema_path = pathlib.Path(__file__).resolve().parent.parent / "schema" / "report.schema.json"
schema = json.loads(schema_path.read_text())
validator = jsonschema.Draft7Validator(schema)
failed = False
for arg in sys.argv[1:]:
    report = json.loads(pathlib.Path(arg).read_text())
    errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
    for e in errors:
        print(f"{arg}: {'/'.join(map(str, e.path))}: {e.message}")
    failed |= bool(errors)
    if not errors:
        print(f"{arg}: ok")
sys.exit(1 if failed else 0)
