"""JSON Schemas for the evaluation report and the results table."""

from jsonschema import validate

_UNIT = {"type": "number", "minimum": 0, "maximum": 1}
_METRICS = {"type": "object", "required": ["sensitivity", "specificity", "auc"],
            "properties": {"sensitivity": _UNIT, "specificity": _UNIT, "auc": _UNIT}}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["model", "feature_set", "seed", "k", "group_by_subject", "class_weighted",
                 "config_digest", "timestamp", "folds", "means"],
    "properties": {
        "model": {"enum": ["rf", "svm", "lr", "ann", "cnn"]},
        "feature_set": {"enum": ["acoustic", "linguistic"]},
        "seed": {"type": "integer"},
        "k": {"type": "integer", "minimum": 2},
        "folds": {
            "type": "array", "minItems": 2,
            "items": {
                "type": "object",
                "required": ["fold", "n_train", "n_test", "tp", "fp", "tn", "fn",
                             "sensitivity", "specificity", "auc", "fpr", "tpr", "flags"],
                "properties": {
                    "sensitivity": _UNIT, "specificity": _UNIT, "auc": _UNIT,
                    "fpr": {"type": "array", "items": _UNIT},
                    "tpr": {"type": "array", "items": _UNIT},
                    "flags": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "means": _METRICS,
    },
}

TABLE_SCHEMA = {
    "type": "object",
    "required": ["rows", "summary"],
    "properties": {
        "rows": {
            "type": "array", "minItems": 10, "maxItems": 10,
            "items": {**_METRICS,
                      "required": ["feature_set", "model", "sensitivity", "specificity", "auc"],
                      "properties": {**_METRICS["properties"],
                                     "feature_set": {"enum": ["acoustic", "linguistic"]},
                                     "model": {"enum": ["rf", "svm", "lr", "ann", "cnn"]}}},
        },
        "summary": {"type": "object"},
    },
}


def validate_report(doc: dict) -> None:
    validate(doc, REPORT_SCHEMA)
    k = doc["k"]
    if len(doc["folds"]) != k:
        raise ValueError(f"report has {len(doc['folds'])} folds, expected {k}")


def validate_table(doc: dict) -> None:
    validate(doc, TABLE_SCHEMA)
    cells = {(r["feature_set"], r["model"]) for r in doc["rows"]}
    if len(cells) != 10:
        raise ValueError("results table must cover every feature set x model cell exactly once")
