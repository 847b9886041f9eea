"""App packages: on-disk layout, canonical bytes and detached signatures.

A package is a directory (or zip archive) holding ``manifest.xml``,
``program.avir``, ``assets/`` and, once the market has signed it,
``signature.bin``.  An optional ``VERSION`` file carries the version string.
"""

from __future__ import annotations

import hashlib
import io
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from ..errors import AVGuardError, BadSignature, PackageUnreadable, Tampered
from ..ir import parse_program
from ..ir.program import AppProgram
from ..manifest import AppManifest, parse_manifest

MAGIC = b"AVPKG/1\n"
SIG_MAGIC = b"AVSIG/1\n"
MANIFEST = "manifest.xml"
PROGRAM = "program.avir"
ASSETS = "assets"
SIGNATURE = "signature.bin"
VERSION = "VERSION"
DEFAULT_VERSION = "0.0.0"


def _normalize(data: bytes) -> bytes:
    return data.replace(b"\r\n", b"\n")


@dataclass(frozen=True)
class AppPackage:
    manifest: AppManifest
    program: AppProgram
    assets: dict = field(default_factory=dict)  # name -> bytes
    version: str = DEFAULT_VERSION
    signature: bytes | None = None
    manifest_text: str = ""
    program_text: str = ""

    @property
    def app_id(self) -> str:
        return self.manifest.app_id

    def files(self) -> dict[str, bytes]:
        """Every signed file, by package-relative name."""
        out = {
            MANIFEST: _normalize(self.manifest_text.encode("utf-8")),
            PROGRAM: _normalize(self.program_text.encode("utf-8")),
        }
        for name, data in self.assets.items():
            out[f"{ASSETS}/{name}"] = bytes(data)
        return out

    def canonical_bytes(self) -> bytes:
        return serialize(self)

    def digest(self) -> str:
        return hashlib.sha256(serialize(self)).hexdigest()

    def with_signature(self, signature: bytes | None) -> "AppPackage":
        return replace(self, signature=signature)


def build_package(manifest_text: str, program_text: str, assets: dict | None = None,
                  version: str = DEFAULT_VERSION, signature: bytes | None = None) -> AppPackage:
    assets = {k: bytes(v) for k, v in (assets or {}).items()}
    manifest_text = manifest_text.replace("\r\n", "\n")
    program_text = program_text.replace("\r\n", "\n")
    try:
        manifest = parse_manifest(manifest_text)
        program = parse_program(program_text, assets)
    except AVGuardError as exc:
        raise PackageUnreadable(f"{type(exc).__name__}: {exc}") from exc
    if "\n" in version or not version.strip():
        raise PackageUnreadable(f"bad version string {version!r}")
    return AppPackage(manifest, program, assets, version.strip(), signature, manifest_text, program_text)


def serialize(pkg: AppPackage) -> bytes:
    """Deterministic byte form that signatures cover: magic, version, then
    each file in sorted name order as ``file <name> <length>`` + bytes."""
    return serialize_files(pkg.files(), pkg.version)


def serialize_files(files: dict[str, bytes], version: str) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(f"version {version}\n".encode("utf-8"))
    for name, data in sorted(files.items()):
        out.write(f"file {name} {len(data)}\n".encode("utf-8"))
        out.write(data)
        out.write(b"\n")
    return out.getvalue()


def deserialize(data: bytes) -> AppPackage:
    if not data.startswith(MAGIC):
        raise PackageUnreadable("not a canonical package")
    pos = len(MAGIC)

    def line():
        nonlocal pos
        end = data.find(b"\n", pos)
        if end < 0:
            raise PackageUnreadable("truncated package")
        text = data[pos:end].decode("utf-8")
        pos = end + 1
        return text

    head = line()
    if not head.startswith("version "):
        raise PackageUnreadable("missing version line")
    version = head[len("version "):]
    files = {}
    while pos < len(data):
        parts = line().split(" ")
        if len(parts) != 3 or parts[0] != "file" or not parts[2].isdigit():
            raise PackageUnreadable("bad file header")
        n = int(parts[2])
        body = data[pos:pos + n]
        if len(body) != n or data[pos + n:pos + n + 1] != b"\n":
            raise PackageUnreadable(f"truncated file {parts[1]}")
        files[parts[1]] = body
        pos += n + 1
    return _from_files(files, version, None)


def _from_files(files: dict[str, bytes], version: str, signature: bytes | None) -> AppPackage:
    for required in (MANIFEST, PROGRAM):
        if required not in files:
            raise PackageUnreadable(f"package has no {required}")
    extra = set(files) - {MANIFEST, PROGRAM} - {k for k in files if k.startswith(ASSETS + "/")}
    if extra:
        raise PackageUnreadable(f"unexpected files: {', '.join(sorted(extra))}")
    assets = {k[len(ASSETS) + 1:]: v for k, v in files.items() if k.startswith(ASSETS + "/")}
    try:
        return build_package(files[MANIFEST].decode("utf-8"), files[PROGRAM].decode("utf-8"), assets, version,
                             signature)
    except UnicodeDecodeError as exc:
        raise PackageUnreadable(str(exc)) from exc


@dataclass(frozen=True)
class RawPackage:
    """Package files as read from disk, before any parsing."""

    files: dict
    version: str
    signature: bytes | None

    def canonical_bytes(self) -> bytes:
        return serialize_files(self.files, self.version)

    def parse(self) -> AppPackage:
        return _from_files(self.files, self.version, self.signature)


def load_raw(path) -> RawPackage:
    path = Path(path)
    try:
        if path.is_dir():
            files = {}
            for p in sorted(path.rglob("*")):
                if p.is_file():
                    files[p.relative_to(path).as_posix()] = p.read_bytes()
        elif zipfile.is_zipfile(path):
            with zipfile.ZipFile(path) as zf:
                files = {n: zf.read(n) for n in zf.namelist() if not n.endswith("/")}
        else:
            raise PackageUnreadable(f"{path} is neither a package directory nor an archive")
    except OSError as exc:
        raise PackageUnreadable(f"cannot read {path}: {exc}") from exc
    signature = files.pop(SIGNATURE, None)
    version = files.pop(VERSION, None)
    try:
        version = version.decode("utf-8").strip() if version is not None else DEFAULT_VERSION
    except UnicodeDecodeError as exc:
        raise PackageUnreadable(f"bad VERSION file: {exc}") from exc
    files = {k: _normalize(v) if k in (MANIFEST, PROGRAM) else v for k, v in files.items()}
    return RawPackage(files, version, signature)


def load_package(path) -> AppPackage:
    return load_raw(path).parse()


def save_package(pkg: AppPackage, path) -> Path:
    """Write ``pkg`` as a package directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name, data in pkg.files().items():
        target = path / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    (path / VERSION).write_text(pkg.version + "\n")
    sig = path / SIGNATURE
    if pkg.signature is not None:
        sig.write_bytes(pkg.signature)
    elif sig.exists():
        sig.unlink()
    return path


# ---------------------------------------------------------------- signatures

def make_signature(data: bytes, key: Ed25519PrivateKey) -> bytes:
    """Hash-then-sign envelope: magic, SHA-256 of the canonical bytes and an
    Ed25519 signature over that digest."""
    digest = hashlib.sha256(data).digest()
    return SIG_MAGIC + digest + key.sign(SIG_MAGIC + digest)


def check_signature(pkg: AppPackage | RawPackage, public_key: Ed25519PublicKey, label: str = "") -> None:
    """Raise unless ``pkg`` carries a market signature over its exact bytes.

    A signature that does not verify is :class:`BadSignature`; a valid
    signature over different bytes is :class:`Tampered`."""
    label = label or getattr(pkg, "app_id", "package")
    sig = pkg.signature
    if not sig:
        raise BadSignature(f"{label}: package is not signed")
    if not sig.startswith(SIG_MAGIC) or len(sig) != len(SIG_MAGIC) + 32 + 64:
        raise BadSignature(f"{label}: malformed signature")
    signed_digest = sig[len(SIG_MAGIC):len(SIG_MAGIC) + 32]
    try:
        public_key.verify(sig[len(SIG_MAGIC) + 32:], SIG_MAGIC + signed_digest)
    except InvalidSignature:
        raise BadSignature(f"{label}: signature does not verify under the market key") from None
    if hashlib.sha256(pkg.canonical_bytes()).digest() != signed_digest:
        raise Tampered(f"{label}: package bytes differ from the signed bytes")
