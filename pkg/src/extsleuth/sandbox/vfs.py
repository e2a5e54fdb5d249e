"""In-memory filesystem presented to sandboxed guests.

Artifact files are seeded read-write under /ext with a scratch area at
/tmp. Nothing here ever touches the host filesystem.
"""

from __future__ import annotations

EXT_ROOT = "/ext"
TMP_ROOT = "/tmp"


class VirtualFs:
    def __init__(self, artifact_files=None):
        self._files: dict[str, bytes] = {}
        self._dirs: set[str] = {"/", EXT_ROOT, TMP_ROOT}
        for entry in artifact_files or []:
            self.write(f"{EXT_ROOT}/{entry.path}", entry.data)

    def normalize(self, path: str, cwd: str = EXT_ROOT) -> str:
        path = str(path).replace("\\", "/")
        # Windows-style drive paths from win32-flavored guests land in /tmp.
        if len(path) >= 2 and path[1] == ":":
            path = TMP_ROOT + "/" + path[2:].lstrip("/")
        if not path.startswith("/"):
            path = cwd.rstrip("/") + "/" + path
        parts: list[str] = []
        for seg in path.split("/"):
            if seg in ("", "."):
                continue
            if seg == "..":
                if parts:
                    parts.pop()
                continue
            parts.append(seg)
        return "/" + "/".join(parts)

    def read(self, path: str) -> bytes | None:
        return self._files.get(self.normalize(path))

    def write(self, path: str, data: bytes) -> None:
        norm = self.normalize(path)
        self._files[norm] = bytes(data)
        parent = norm.rsplit("/", 1)[0] or "/"
        while parent not in self._dirs:
            self._dirs.add(parent)
            parent = parent.rsplit("/", 1)[0] or "/"

    def exists(self, path: str) -> bool:
        norm = self.normalize(path)
        return norm in self._files or norm in self._dirs

    def is_dir(self, path: str) -> bool:
        return self.normalize(path) in self._dirs

    def unlink(self, path: str) -> bool:
        return self._files.pop(self.normalize(path), None) is not None

    def mkdir(self, path: str) -> None:
        norm = self.normalize(path)
        self._dirs.add(norm)
        parent = norm.rsplit("/", 1)[0] or "/"
        while parent not in self._dirs:
            self._dirs.add(parent)
            parent = parent.rsplit("/", 1)[0] or "/"

    def readdir(self, path: str) -> list[str] | None:
        norm = self.normalize(path)
        if norm not in self._dirs:
            return None
        prefix = norm.rstrip("/") + "/"
        names = set()
        for candidate in list(self._files) + list(self._dirs):
            if candidate.startswith(prefix) and candidate != norm:
                names.add(candidate[len(prefix):].split("/", 1)[0])
        return sorted(names)

    def size(self, path: str) -> int | None:
        data = self.read(path)
        return None if data is None else len(data)
