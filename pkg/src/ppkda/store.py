"""Durable encrypted-template persistence.

One JSON document per user under the store root.  Writes go through a
temp file plus atomic rename, so a crash never leaves a half-written
template visible.  User ids are restricted to [A-Za-z0-9_-] to keep
them safe as file names.
"""

from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path
from typing import Any

from .errors import InvalidUserId, NotFound, StorageIO

_USER_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


def validate_user_id(user_id: str) -> str:
    if not isinstance(user_id, str) or not _USER_ID_RE.match(user_id):
        raise InvalidUserId(f"user id {user_id!r} must match [A-Za-z0-9_-]+")
    return user_id


class TemplateStore:
    """Concurrent readers, one writer per user id."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, user_id: str) -> Path:
        return self.root / f"{validate_user_id(user_id)}.json"

    def put(self, user_id: str, document: dict[str, Any]) -> None:
        path = self._path(user_id)
        tmp = path.with_suffix(".json.tmp")
        data = json.dumps(document, separators=(",", ":"))
        with self._write_lock:
            try:
                tmp.write_text(data, encoding="utf-8")
                os.replace(tmp, path)
            except OSError as exc:
                raise StorageIO(f"cannot persist template for {user_id}: {exc}") from exc

    def get(self, user_id: str) -> dict[str, Any]:
        path = self._path(user_id)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise NotFound(f"no template for user {user_id}") from None
        except OSError as exc:
            raise StorageIO(f"cannot read template for {user_id}: {exc}") from exc
        return json.loads(text)

    def exists(self, user_id: str) -> bool:
        return self._path(user_id).exists()

    def user_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))
