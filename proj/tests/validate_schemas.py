"""Validates shipped configs and CLI reports against the JSON schemas."""

import glob
import json
import os
import sys

import jsonschema


def main(root, work):
    config_schema = json.load(open(os.path.join(root, "schemas", "config.schema.json")))
    report_schema = json.load(open(os.path.join(root, "schemas", "report.schema.json")))
    configs = sorted(glob.glob(os.path.join(root, "configs", "*.json")))
    for path in configs:
        jsonschema.validate(json.load(open(path)), config_schema)
    reports = [json.load(open(p)) for p in sorted(glob.glob(os.path.join(work, "fb", "*.json")))]
    for v in sorted(glob.glob(os.path.join(work, "v1", "verify.json"))):
        reports.extend(json.load(open(v))["reports"])
    if not configs or not reports:
        sys.exit("nothing to validate")
    for r in reports:
        jsonschema.validate(r, report_schema)
    print(f"{len(configs)} configs and {len(reports)} reports valid")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
