"""Artifact ingestion: kind detection, archive unpacking, manifest parsing.

Accepts Chrome extensions (CRX3 or plain ZIP), VS Code extensions (VSIX)
and NPM packages (gzipped tarball) and produces a uniform in-memory
artifact model for the analysis pipeline.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import logging
import re
import struct
import tarfile
import zipfile
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

CHROME_EXTENSION = "chrome-extension"
VSCODE_EXTENSION = "vscode-extension"
NPM_PACKAGE = "npm-package"

ARTIFACT_KINDS = (CHROME_EXTENSION, VSCODE_EXTENSION, NPM_PACKAGE)

CODE_SUFFIXES = (".js", ".mjs", ".cjs", ".ts")

CRX_MAGIC = b"Cr24"
ZIP_MAGIC = b"PK"
GZIP_MAGIC = b"\x1f\x8b"

# Conventional in-package privacy policy file names, matched case-insensitively
# against the basename anywhere in the artifact.
POLICY_BASENAMES = ("privacy.md", "privacy.txt", "privacy_policy.html")


class IngestError(Exception):
    """Base class for ingestion failures."""


class UnknownArtifactKind(IngestError):
    pass


class CorruptArchive(IngestError):
    pass


class UnsafePath(IngestError):
    """A single archive entry tried to escape the artifact root."""


class MissingManifest(IngestError):
    pass


class MalformedManifest(IngestError):
    pass


@dataclass(frozen=True)
class FileEntry:
    path: str
    data: bytes

    @property
    def is_code(self) -> bool:
        return self.path.lower().endswith(CODE_SUFFIXES)

    @property
    def size_bytes(self) -> int:
        return len(self.data)


@dataclass
class ContentScript:
    matches: list[str] = field(default_factory=list)
    scripts: list[str] = field(default_factory=list)


@dataclass
class ManifestInfo:
    name: str = ""
    version: str = ""
    publisher: str = ""
    description: str = ""
    permissions: list[str] = field(default_factory=list)
    host_patterns: list[str] = field(default_factory=list)
    content_scripts: list[ContentScript] = field(default_factory=list)
    background_scripts: list[str] = field(default_factory=list)
    activation_events: list[str] = field(default_factory=list)
    lifecycle_scripts: dict[str, str] = field(default_factory=dict)
    main_entry: str = ""
    contributions: list[str] = field(default_factory=list)
    missing_scripts: list[str] = field(default_factory=list)
    # Directory of the manifest inside the archive ("" at root,
    # "extension" for a typical VSIX). Script paths resolve against it.
    root_prefix: str = ""


@dataclass
class ExtensionArtifact:
    kind: str
    files: list[FileEntry]
    manifest: ManifestInfo
    privacy_policy_text: str | None = None
    digest: str = ""

    def __post_init__(self):
        self.files = sorted(self.files, key=lambda f: f.path)
        if not self.digest:
            self.digest = compute_digest(self.files)
        self._by_path = {f.path: f for f in self.files}

    def get(self, path: str) -> FileEntry | None:
        return self._by_path.get(path)

    def code_files(self) -> list[FileEntry]:
        return [f for f in self.files if f.is_code]


def compute_digest(files: list[FileEntry]) -> str:
    """SHA-256 over (path, bytes) pairs in sorted path order."""
    h = hashlib.sha256()
    for f in sorted(files, key=lambda f: f.path):
        h.update(f.path.encode("utf-8"))
        h.update(b"\x00")
        h.update(struct.pack("<Q", len(f.data)))
        h.update(f.data)
    return h.hexdigest()


def normalize_entry_path(raw: str) -> str:
    """Normalize an archive entry path; raises UnsafePath on traversal."""
    path = raw.replace("\\", "/")
    if path.startswith("/") or re.match(r"^[A-Za-z]:", path):
        raise UnsafePath(raw)
    parts = []
    for seg in path.split("/"):
        if seg in ("", "."):
            continue
        if seg == "..":
            raise UnsafePath(raw)
        parts.append(seg)
    if not parts:
        raise UnsafePath(raw)
    return "/".join(parts)


def detect_artifact_kind(data: bytes, hint_name: str = "") -> str:
    """Map archive bytes (plus a filename hint) to one of ARTIFACT_KINDS."""
    if not data:
        raise UnknownArtifactKind("empty input")
    if data.startswith(CRX_MAGIC):
        return CHROME_EXTENSION
    if data.startswith(ZIP_MAGIC):
        names = _zip_names(data)
        if hint_name.lower().endswith(".vsix") or any(
            n in ("extension.vsixmanifest", "extension/vsixmanifest") for n in names
        ):
            return VSCODE_EXTENSION
        if "manifest.json" in names and _declares_manifest_version(data):
            return CHROME_EXTENSION
        raise UnknownArtifactKind("ZIP without a recognizable manifest")
    if data.startswith(GZIP_MAGIC):
        if _tgz_has_package_json(data):
            return NPM_PACKAGE
        raise UnknownArtifactKind("gzip archive without package/package.json")
    raise UnknownArtifactKind("no magic-byte rule matched")


def _zip_names(data: bytes) -> list[str]:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            return zf.namelist()
    except (zipfile.BadZipFile, OSError):
        return []


def _declares_manifest_version(data: bytes) -> bool:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            manifest = json.loads(zf.read("manifest.json"))
        return isinstance(manifest, dict) and "manifest_version" in manifest
    except Exception:
        return False


def _tgz_has_package_json(data: bytes) -> bool:
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tf:
            return any(
                m.name.lstrip("./") in ("package/package.json", "package.json")
                for m in tf.getmembers()
            )
    except (tarfile.TarError, OSError, EOFError):
        return False


def unpack_artifact(data: bytes, kind: str) -> list[FileEntry]:
    """Extract archive bytes into FileEntry values. Traversal entries are
    skipped individually; structural corruption raises CorruptArchive."""
    if kind == CHROME_EXTENSION:
        if data.startswith(CRX_MAGIC):
            data = _strip_crx_header(data)
        return _unpack_zip(data)
    if kind == VSCODE_EXTENSION:
        return _unpack_zip(data)
    if kind == NPM_PACKAGE:
        return _unpack_tgz(data)
    raise UnknownArtifactKind(kind)


def _strip_crx_header(data: bytes) -> bytes:
    """Return the embedded ZIP of a CRX2/CRX3 container. Signatures are not
    verified; the tool analyzes content, not provenance."""
    if len(data) < 12:
        raise CorruptArchive("CRX truncated before header")
    magic, version = data[:4], struct.unpack_from("<I", data, 4)[0]
    if magic != CRX_MAGIC:
        raise CorruptArchive("bad CRX magic")
    if version == 3:
        (header_len,) = struct.unpack_from("<I", data, 8)
        offset = 12 + header_len
    elif version == 2:
        if len(data) < 16:
            raise CorruptArchive("CRX2 truncated before key lengths")
        key_len, sig_len = struct.unpack_from("<II", data, 8)
        offset = 16 + key_len + sig_len
    else:
        raise CorruptArchive(f"unsupported CRX version {version}")
    if offset > len(data):
        raise CorruptArchive("CRX header length exceeds file size")
    return data[offset:]


def _unpack_zip(data: bytes) -> list[FileEntry]:
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except (zipfile.BadZipFile, OSError) as exc:
        raise CorruptArchive(f"bad ZIP: {exc}") from exc
    entries = []
    with zf:
        for info in zf.infolist():
            if info.is_dir():
                continue
            try:
                path = normalize_entry_path(info.filename)
            except UnsafePath:
                log.warning("skipping unsafe zip entry %r", info.filename)
                continue
            entries.append(FileEntry(path, zf.read(info)))
    return _dedupe(entries)


def _unpack_tgz(data: bytes) -> list[FileEntry]:
    try:
        raw = gzip.decompress(data)
        tf = tarfile.open(fileobj=io.BytesIO(raw), mode="r:")
    except (OSError, EOFError, tarfile.TarError) as exc:
        raise CorruptArchive(f"bad tarball: {exc}") from exc
    entries = []
    with tf:
        for member in tf.getmembers():
            if not member.isfile():
                continue
            try:
                path = normalize_entry_path(member.name)
            except UnsafePath:
                log.warning("skipping unsafe tar entry %r", member.name)
                continue
            parts = path.split("/")
            if parts[0] == "package":
                parts = parts[1:]
            if not parts:
                continue
            fh = tf.extractfile(member)
            if fh is None:
                continue
            entries.append(FileEntry("/".join(parts), fh.read()))
    return _dedupe(entries)


def _dedupe(entries: list[FileEntry]) -> list[FileEntry]:
    # Last entry wins on duplicate paths, matching archive extraction order.
    by_path = {e.path: e for e in entries}
    return sorted(by_path.values(), key=lambda e: e.path)


def parse_manifest(files: list[FileEntry], kind: str) -> ManifestInfo:
    """Parse the kind-appropriate manifest out of unpacked files."""
    by_path = {f.path: f for f in files}
    if kind == CHROME_EXTENSION:
        raw, prefix = _load_json_manifest(by_path, ["manifest.json"])
        return _parse_chrome_manifest(raw, prefix, by_path)
    if kind == VSCODE_EXTENSION:
        raw, prefix = _load_json_manifest(
            by_path, ["package.json", "extension/package.json"]
        )
        return _parse_vscode_manifest(raw, prefix, by_path)
    if kind == NPM_PACKAGE:
        raw, prefix = _load_json_manifest(by_path, ["package.json"])
        return _parse_npm_manifest(raw, prefix, by_path)
    raise UnknownArtifactKind(kind)


def _load_json_manifest(by_path, candidates) -> tuple[dict, str]:
    for candidate in candidates:
        entry = by_path.get(candidate)
        if entry is None:
            continue
        try:
            raw = json.loads(entry.data.decode("utf-8-sig"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedManifest(f"{candidate}: {exc}") from exc
        if not isinstance(raw, dict):
            raise MalformedManifest(f"{candidate}: top level is not an object")
        prefix = candidate.rsplit("/", 1)[0] if "/" in candidate else ""
        return raw, prefix
    raise MissingManifest(f"none of {candidates} present")


def _str_list(value) -> list[str]:
    if not isinstance(value, list):
        return []
    return [v for v in value if isinstance(v, str)]


def _author_name(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, dict):
        return str(value.get("name", ""))
    return ""


def _parse_chrome_manifest(raw: dict, prefix: str, by_path) -> ManifestInfo:
    info = ManifestInfo(
        name=str(raw.get("name", "")),
        version=str(raw.get("version", "")),
        publisher=_author_name(raw.get("author")),
        description=str(raw.get("description", "")),
        permissions=_str_list(raw.get("permissions")),
        host_patterns=_str_list(raw.get("host_permissions")),
        root_prefix=prefix,
    )
    background = raw.get("background")
    if isinstance(background, dict):
        worker = background.get("service_worker")
        if isinstance(worker, str):
            info.background_scripts.append(worker)
        info.background_scripts.extend(_str_list(background.get("scripts")))
    for cs in raw.get("content_scripts") or []:
        if not isinstance(cs, dict):
            continue
        info.content_scripts.append(
            ContentScript(matches=_str_list(cs.get("matches")),
                          scripts=_str_list(cs.get("js")))
        )
    referenced = list(info.background_scripts)
    for cs in info.content_scripts:
        referenced.extend(cs.scripts)
    for script in referenced:
        if _resolve_script(script, prefix, by_path) is None:
            info.missing_scripts.append(script)
    return info


def _parse_vscode_manifest(raw: dict, prefix: str, by_path) -> ManifestInfo:
    info = ManifestInfo(
        name=str(raw.get("name", "")),
        version=str(raw.get("version", "")),
        publisher=str(raw.get("publisher", "")),
        description=str(raw.get("description", "")),
        activation_events=_str_list(raw.get("activationEvents")),
        root_prefix=prefix,
    )
    contributes = raw.get("contributes")
    if isinstance(contributes, dict):
        info.contributions = sorted(str(k) for k in contributes)
    main = raw.get("main")
    if isinstance(main, str) and main:
        resolved = _resolve_script(main, prefix, by_path)
        if resolved is None:
            info.main_entry = main
            info.missing_scripts.append(main)
        else:
            info.main_entry = resolved
    return info


def _parse_npm_manifest(raw: dict, prefix: str, by_path) -> ManifestInfo:
    info = ManifestInfo(
        name=str(raw.get("name", "")),
        version=str(raw.get("version", "")),
        publisher=_author_name(raw.get("author")),
        description=str(raw.get("description", "")),
        root_prefix=prefix,
    )
    scripts = raw.get("scripts")
    if isinstance(scripts, dict):
        for hook in ("preinstall", "install", "postinstall"):
            if isinstance(scripts.get(hook), str):
                info.lifecycle_scripts[hook] = scripts[hook]
    main = raw.get("main")
    if not isinstance(main, str) or not main:
        main = "index.js"
    resolved = _resolve_script(main, prefix, by_path)
    if resolved is None:
        info.main_entry = main
        if isinstance(raw.get("main"), str):
            info.missing_scripts.append(main)
    else:
        info.main_entry = resolved
    return info


def _resolve_script(ref: str, prefix: str, by_path) -> str | None:
    """Resolve a manifest script reference to an in-archive path."""
    ref = ref.lstrip("./")
    base = f"{prefix}/{ref}" if prefix else ref
    for candidate in (base, base + ".js", base + "/index.js"):
        try:
            normalized = normalize_entry_path(candidate)
        except UnsafePath:
            return None
        if normalized in by_path:
            return normalized
    return None


def extract_metadata(files: list[FileEntry], manifest: ManifestInfo) -> tuple[str, str | None]:
    """Return (description, privacy policy text or None)."""
    policy = None
    candidates = [
        f for f in files if f.path.rsplit("/", 1)[-1].lower() in POLICY_BASENAMES
    ]
    if candidates:
        entry = min(candidates, key=lambda f: (f.path.count("/"), f.path))
        text = entry.data.decode("utf-8", errors="replace")
        if entry.path.lower().endswith(".html"):
            text = strip_html_tags(text)
        policy = text
    return manifest.description, policy


def strip_html_tags(text: str) -> str:
    """Remove every <...> run and collapse whitespace."""
    return re.sub(r"\s+", " ", re.sub(r"<[^>]*>", " ", text)).strip()


def ingest(data: bytes, hint_name: str = "", kind: str | None = None) -> ExtensionArtifact:
    """Full ingestion: detect (unless forced), unpack, parse, extract."""
    if kind is None:
        kind = detect_artifact_kind(data, hint_name)
    files = unpack_artifact(data, kind)
    manifest = parse_manifest(files, kind)
    _, policy = extract_metadata(files, manifest)
    return ExtensionArtifact(kind=kind, files=files, manifest=manifest,
                             privacy_policy_text=policy)
