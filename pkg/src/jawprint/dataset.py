"""Dataset directory layout: discovery and session loading.

Layout (one tree per corpus):

    <root>/<user_id>/profile.json                      user metadata
    <root>/<user_id>/<activity>/session<1|2>/<location>.csv
    <root>/<user_id>/<activity>/landmarks/<location>.csv (+ .meta.json)

``location`` is one of chin, upper_left_cheek, lower_right_cheek and
``activity`` one of seated, walk_flat, walk_stairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingFile, MissingSession
from .signal import (
    Activity,
    LOCATION_ORDER,
    RecordingSession,
    SensorLocation,
    load_stream,
)


@dataclass(frozen=True)
class UserMeta:
    user_id: str
    language_tag: str = "native"  # native | non-native


def session_dir(root, user_id: str, activity: Activity, session_index: int) -> Path:
    return Path(root) / user_id / activity.value / f"session{session_index}"


def landmark_dir(root, user_id: str, activity: Activity) -> Path:
    return Path(root) / user_id / activity.value / "landmarks"


def load_session(root, user_id: str, activity: Activity, session_index: int) -> RecordingSession:
    """Load all three location streams; fails if any is absent."""
    base = session_dir(root, user_id, activity, session_index)
    if not base.is_dir():
        raise MissingSession(f"{user_id}/{activity.value}/session{session_index} not found under {root}")
    streams = {}
    for loc in LOCATION_ORDER:
        path = base / f"{loc.value}.csv"
        if not path.is_file():
            raise MissingFile(str(path))
        streams[loc] = load_stream(path, loc)
    return RecordingSession(user_id=user_id, activity=activity, session_index=session_index, streams=streams)


def load_user_meta(root, user_id: str) -> UserMeta:
    path = Path(root) / user_id / "profile.json"
    if not path.is_file():
        return UserMeta(user_id=user_id)
    blob = json.loads(path.read_text(encoding="utf-8"))
    return UserMeta(user_id=user_id, language_tag=blob.get("language_tag", "native"))


def save_user_meta(root, meta: UserMeta) -> None:
    path = Path(root) / meta.user_id / "profile.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"user_id": meta.user_id, "language_tag": meta.language_tag}, indent=2) + "\n", encoding="utf-8")


class Dataset:
    """A dataset root plus lazily discovered users/activities."""

    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise MissingFile(str(self.root))

    def users(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def activities(self, user_id: str) -> list[Activity]:
        base = self.root / user_id
        found = []
        for act in Activity:
            if (base / act.value).is_dir():
                found.append(act)
        return found

    def has_session(self, user_id: str, activity: Activity, session_index: int) -> bool:
        return session_dir(self.root, user_id, activity, session_index).is_dir()

    def session(self, user_id: str, activity: Activity, session_index: int) -> RecordingSession:
        return load_session(self.root, user_id, activity, session_index)

    def meta(self, user_id: str) -> UserMeta:
        return load_user_meta(self.root, user_id)
