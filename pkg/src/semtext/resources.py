from __future__ import annotations
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from threading import RLock
from typing import Dict, Optional, Union
import logging, os, re

logger = logging.getLogger("semtext.resources")

DATA_DIR_ENV = "SEMTEXT_DATA_DIR"

TAG_GROUPS = "tag_groups.tsv"
TAG_PHRASES = "tag_phrases.tsv"
ABBREVIATIONS = "abbreviations.tsv"
STOPWORDS = "stopwords.txt"

_VERSION_LINE = re.compile(r"^#\s*version\s*:\s*(\d+)\s*$", re.IGNORECASE)


class ResourceError(RuntimeError):
    """Raised when a data file is missing or malformed."""


@dataclass
class _Cache:
    last_modified_time: float = -1.0
    version: int | None = None
    rows: list[tuple[str, ...]] = field(default_factory=list)


def packaged_data_dir() -> Path:
    return Path(str(resources.files("semtext") / "data"))


def resolve_data_file(name: Union[str, Path], data_dir: Optional[Union[str, Path]] = None) -> Path:
    """
    Locate a data file.

    Explicit paths are used as given. Bare names are looked up in `data_dir`,
    then $SEMTEXT_DATA_DIR, then the packaged data directory. A name missing from
    an override directory falls back to the packaged copy with a warning.
    """
    candidate = Path(name).expanduser()
    if candidate.is_absolute() or candidate.parent != Path("."):
        if not candidate.is_file():
            raise ResourceError(f"data file not found: {candidate}")
        return candidate

    override = data_dir or os.environ.get(DATA_DIR_ENV)
    if override:
        p = Path(override).expanduser() / candidate.name
        if p.is_file():
            return p
        logger.warning("%s not found in %s; using the packaged copy", candidate.name, override)

    packaged = packaged_data_dir() / candidate.name
    if not packaged.is_file():
        raise ResourceError(f"packaged data file missing: {packaged}")
    return packaged


class DataFiles:
    """
    Mtime-cached reader for the editable data files.
    Tables hold one `key<TAB>value` per line; word lists one word per line.
    Blank lines and `#` comments are skipped; a leading `# version: N` line is recorded.
    A file edited on disk is re-read on the next lookup.
    """

    def __init__(self, data_dir: Optional[Union[str, Path]] = None):
        self.data_dir: Optional[Path] = Path(data_dir) if data_dir else None
        self._caches: Dict[Path, _Cache] = {}
        self._lock = RLock()

    def _load_if_file_changed(self, path: Path) -> _Cache:
        with self._lock:
            cache = self._caches.get(path)
            try:
                current_modified_time = path.stat().st_mtime
            except FileNotFoundError as e:
                raise ResourceError(f"data file not found: {path}") from e

            if cache is not None and cache.last_modified_time == current_modified_time:
                return cache

            version: int | None = None
            rows: list[tuple[str, ...]] = []
            for raw in path.read_text(encoding="utf-8").splitlines():
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    m = _VERSION_LINE.match(line)
                    if m and version is None:
                        version = int(m.group(1))
                    continue
                rows.append(tuple(part.strip() for part in raw.rstrip("\r\n").split("\t")))

            cache = _Cache(last_modified_time=current_modified_time, version=version, rows=rows)
            self._caches[path] = cache
            logger.debug("Loaded %d rows (version=%s) from %s", len(rows), version, path)
            return cache

    def version(self, name: Union[str, Path]) -> int | None:
        return self._load_if_file_changed(resolve_data_file(name, self.data_dir)).version

    def table(self, name: Union[str, Path]) -> Dict[str, str]:
        """Return the `key -> value` mapping of a tab-separated table. Keys are lowercased."""
        path = resolve_data_file(name, self.data_dir)
        out: Dict[str, str] = {}
        for lineno, row in enumerate(self._load_if_file_changed(path).rows, 1):
            if len(row) != 2 or not row[0] or not row[1]:
                raise ResourceError(f"{path}: row {lineno} must be 'key<TAB>value', got {row!r}")
            out[row[0].lower()] = row[1]
        return out

    def words(self, name: Union[str, Path]) -> frozenset[str]:
        path = resolve_data_file(name, self.data_dir)
        return frozenset(row[0].lower() for row in self._load_if_file_changed(path).rows if row[0])


_default_files: DataFiles | None = None
_default_lock = RLock()


def default_data_files() -> DataFiles:
    global _default_files
    with _default_lock:
        if _default_files is None:
            _default_files = DataFiles()
        return _default_files
