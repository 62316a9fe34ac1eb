"""Structured text format shared by concepts, rule sets, machines, snapshots
and certificates.

Documents are UTF-8 JSON with sorted keys and two-space indentation, one
scalar per line, so diffs stay line-stable. Content hashes are the lowercase
hex SHA-256 of that canonical rendering. Trace files are JSON Lines where the
writer fixes the key order of every record.

Tuples have no JSON counterpart; :func:`to_plain` writes them as lists and
:func:`from_plain` turns every list back into a tuple. Objects that go through
the machine value path must therefore only use lists for tuple values.
"""
import hashlib
import json
from pathlib import Path


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def loads(text):
    return json.loads(text)


def content_hash(obj):
    return hashlib.sha256(dumps(obj).encode("utf-8")).hexdigest()


def write(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dumps(obj)
    path.write_text(data, encoding="utf-8")
    return content_hash(obj)


def read(path):
    return loads(Path(path).read_text(encoding="utf-8"))


def record_line(record):
    """One trace record; key order is the caller's insertion order."""
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def to_plain(value):
    if isinstance(value, tuple):
        return [to_plain(v) for v in value]
    return value


def from_plain(value):
    if isinstance(value, list):
        return tuple(from_plain(v) for v in value)
    return value


class Store:
    """Content-addressed directory: ``<root>/<kind>/<hash>.json``."""

    def __init__(self, root):
        self.root = Path(root)

    def put(self, kind, obj):
        h = content_hash(obj)
        path = self.root / kind / f"{h}.json"
        if not path.exists():
            write(path, obj)
        return h

    def get(self, kind, h):
        from .errors import UnresolvableHashError

        path = self.root / kind / f"{h}.json"
        if not path.exists():
            raise UnresolvableHashError(f"no {kind} with hash {h} in {self.root}")
        obj = read(path)
        if content_hash(obj) != h:
            raise UnresolvableHashError(f"{path} does not hash to its name")
        return obj

    def has(self, kind, h):
        return (self.root / kind / f"{h}.json").exists()
