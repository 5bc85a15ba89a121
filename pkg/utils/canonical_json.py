import json
from pathlib import Path


def dumps_canonical(payload) -> str:
    """Sorted keys, no insignificant whitespace: equal payloads give equal bytes."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def write_json(path, payload, indent=2):
    """
    Writes `payload` as deterministic, human-diffable JSON (sorted keys, trailing newline).

    Args:
        path: Destination file; parent directories are created.
        payload: Any JSON-serializable object.
        indent (int): Indentation used for readability.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=indent, ensure_ascii=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
