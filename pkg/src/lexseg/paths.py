"""Resolution of user-supplied resource paths against ``LEXSEG_DATA_ROOT``."""

from __future__ import annotations

import os
from pathlib import Path

DATA_ROOT_ENV = "LEXSEG_DATA_ROOT"


def data_root() -> Path | None:
    root = os.environ.get(DATA_ROOT_ENV)
    return Path(root) if root else None


def resolve_resource(path) -> Path | None:
    """``path`` as given if it exists, else relative to the data root, else ``None``."""
    if path is None:
        return None
    p = Path(path).expanduser()
    if p.exists():
        return p
    root = data_root()
    if root is not None and not p.is_absolute() and (root / p).exists():
        return root / p
    return None
