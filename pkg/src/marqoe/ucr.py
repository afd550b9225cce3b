"""User context repository: a directory store with one JSON document per user.

Writes go through a temp file plus ``os.replace`` so a crash can never
leave a partial document behind, and per-user locks serialize concurrent
writers.  Only derived data lives here (configs, QoE history); raw pose
rows never enter the store.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import asdict, dataclass, field

from .errors import EmptyRange, InvalidInput, NotFound
from .trace import USER_ID_PATTERN


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    bandwidth_hz: float
    predicted: float
    realized: float


@dataclass
class UserContextRecord:
    user_id: str
    dataset: str = ""
    trace_path: str = ""
    grid_bounds: tuple[float, ...] = ()
    predictor_overrides: dict = field(default_factory=dict)
    channel_overrides: dict = field(default_factory=dict)
    history: list[HistoryEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["grid_bounds"] = list(self.grid_bounds)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "UserContextRecord":
        history = [HistoryEntry(**h) for h in doc.get("history", [])]
        return cls(
            user_id=doc["user_id"],
            dataset=doc.get("dataset", ""),
            trace_path=doc.get("trace_path", ""),
            grid_bounds=tuple(doc.get("grid_bounds", ())),
            predictor_overrides=doc.get("predictor_overrides", {}),
            channel_overrides=doc.get("channel_overrides", {}),
            history=history,
        )


class UserContextStore:
    def __init__(self, directory: str):
        self.directory = os.path.abspath(directory)
        os.makedirs(self.directory, exist_ok=True)
        self._registry_lock = threading.Lock()
        self._user_locks: dict[str, threading.Lock] = {}

    def _lock_for(self, user_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._user_locks.setdefault(user_id, threading.Lock())

    def _path_for(self, user_id: str) -> str:
        if not USER_ID_PATTERN.match(user_id):
            raise NotFound(f"invalid user id {user_id!r}")
        return os.path.join(self.directory, f"{user_id}.json")

    def user_ids(self) -> list[str]:
        return sorted(name[:-5] for name in os.listdir(self.directory)
                      if name.endswith(".json"))

    def get(self, user_id: str) -> UserContextRecord:
        path = self._path_for(user_id)
        try:
            with open(path, encoding="utf-8") as fh:
                return UserContextRecord.from_dict(json.load(fh))
        except FileNotFoundError:
            raise NotFound(f"no context record for {user_id!r}") from None

    def put(self, record: UserContextRecord) -> None:
        path = self._path_for(record.user_id)
        with self._lock_for(record.user_id):
            self._write_atomic(path, record)

    def _write_atomic(self, path: str, record: UserContextRecord) -> None:
        payload = json.dumps(record.to_dict(), sort_keys=True, indent=1)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def history_append(self, user_id: str, epoch: int, bandwidth_hz: float,
                       predicted: float, realized: float) -> None:
        """Atomically append one QoE history entry (record created if absent)."""
        path = self._path_for(user_id)
        with self._lock_for(user_id):
            try:
                with open(path, encoding="utf-8") as fh:
                    record = UserContextRecord.from_dict(json.load(fh))
            except FileNotFoundError:
                record = UserContextRecord(user_id)
            record.history.append(
                HistoryEntry(epoch, bandwidth_hz, predicted, realized))
            record.history.sort(key=lambda h: h.epoch)
            self._write_atomic(path, record)


def query_history(store: UserContextStore, user_id: str,
                  epoch_from: int | None = None, epoch_to: int | None = None,
                  aggregate: str = "series"):
    """Aggregate realized QoE over an epoch range.

    ``series`` returns the raw (epoch, bandwidth, predicted, realized)
    tuples; ``mean``/``min``/``max`` reduce the realized values.  An empty
    selection raises EmptyRange.
    """
    record = store.get(user_id)
    entries = [h for h in record.history
               if (epoch_from is None or h.epoch >= epoch_from)
               and (epoch_to is None or h.epoch <= epoch_to)]
    if not entries:
        raise EmptyRange(
            f"no history for {user_id!r} in epochs [{epoch_from}, {epoch_to}]")
    if aggregate == "series":
        return [asdict(h) for h in entries]
    realized = [h.realized for h in entries]
    if aggregate == "mean":
        return sum(realized) / len(realized)
    if aggregate == "min":
        return min(realized)
    if aggregate == "max":
        return max(realized)
    raise InvalidInput(f"unknown aggregate {aggregate!r}")
