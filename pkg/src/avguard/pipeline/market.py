"""Desk-scale app market: a key pair, approval records and a package index.

The registry is a directory::

    keys/market.key      Ed25519 private key (PEM)
    keys/market.pub      public key (PEM)
    index.json           app_id -> version, package hash, approval record
    packages/<id>-<version>.avpkg   canonical bytes of each signed package

``index.json`` is replaced atomically (write to a temporary file, then
rename), so a concurrent reader sees either the old or the new index.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from ..errors import AVGuardError, Conflict, NotApproved
from ..manifest import AppManifest, detect_conflicts
from .package import AppPackage, RawPackage, check_signature, deserialize, make_signature

APPROVED = "approved"


def generate_key() -> Ed25519PrivateKey:
    return Ed25519PrivateKey.generate()


def private_key_pem(key: Ed25519PrivateKey) -> bytes:
    return key.private_bytes(serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
                             serialization.NoEncryption())


def public_key_pem(key: Ed25519PublicKey) -> bytes:
    return key.public_bytes(serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo)


def load_private_key(path) -> Ed25519PrivateKey:
    key = serialization.load_pem_private_key(Path(path).read_bytes(), password=None)
    if not isinstance(key, Ed25519PrivateKey):
        raise AVGuardError(f"{path} is not an Ed25519 private key")
    return key


def load_public_key(path) -> Ed25519PublicKey:
    key = serialization.load_pem_public_key(Path(path).read_bytes())
    if not isinstance(key, Ed25519PublicKey):
        raise AVGuardError(f"{path} is not an Ed25519 public key")
    return key


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def package_hash(pkg) -> str:
    return hashlib.sha256(pkg.canonical_bytes()).hexdigest()


def sign_package(pkg: AppPackage, private_key: Ed25519PrivateKey, approvals) -> AppPackage:
    """Attach a market signature; ``approvals`` maps package hash to the
    approval record and must hold an approved record for these exact bytes."""
    h = package_hash(pkg)
    record = approvals.get(h) if approvals is not None else None
    if not record or record.get("final_verdict") != APPROVED:
        raise NotApproved(f"{pkg.app_id} {pkg.version}: no approval for package {h[:12]}")
    return pkg.with_signature(make_signature(pkg.canonical_bytes(), private_key))


@dataclass(frozen=True)
class InstallOutcome:
    app_id: str
    version: str
    installed: tuple[AppManifest, ...]  # the vehicle's apps after the install


def verify_and_install(pkg: AppPackage | RawPackage, public_key: Ed25519PublicKey,
                       installed: list[AppManifest]) -> InstallOutcome:
    """Vehicle-side admission: the market signature is the only trust anchor."""
    check_signature(pkg, public_key)
    if isinstance(pkg, RawPackage):
        pkg = pkg.parse()
    conflicts = detect_conflicts(list(installed), pkg.manifest)
    if conflicts:
        raise Conflict(conflicts)
    return InstallOutcome(pkg.app_id, pkg.version, tuple(installed) + (pkg.manifest,))


class MarketRegistry:
    def __init__(self, root):
        self.root = Path(root)

    # -- layout
    @property
    def key_path(self) -> Path:
        return self.root / "keys" / "market.key"

    @property
    def public_key_path(self) -> Path:
        return self.root / "keys" / "market.pub"

    @property
    def index_path(self) -> Path:
        return self.root / "index.json"

    @classmethod
    def open(cls, root, create: bool = True) -> "MarketRegistry":
        reg = cls(root)
        if not reg.key_path.exists():
            if not create:
                raise AVGuardError(f"{root} is not a market registry")
            key = generate_key()
            atomic_write(reg.key_path, private_key_pem(key))
            os.chmod(reg.key_path, 0o600)
            atomic_write(reg.public_key_path, public_key_pem(key.public_key()))
        if not reg.index_path.exists():
            reg._write_index({"apps": {}, "approvals": {}})
        return reg

    def private_key(self) -> Ed25519PrivateKey:
        return load_private_key(self.key_path)

    def public_key(self) -> Ed25519PublicKey:
        return load_public_key(self.public_key_path)

    # -- index
    def _read_index(self) -> dict:
        return json.loads(self.index_path.read_text())

    def _write_index(self, index: dict) -> None:
        atomic_write(self.index_path, (json.dumps(index, indent=2, sort_keys=True) + "\n").encode("utf-8"))

    @property
    def approvals(self) -> dict:
        return self._read_index()["approvals"]

    def index(self) -> dict:
        return self._read_index()["apps"]

    def record_vetting(self, pkg: AppPackage, report) -> dict:
        """Store the vetting outcome for these exact package bytes."""
        index = self._read_index()
        record = {
            "app_id": pkg.app_id,
            "version": pkg.version,
            "final_verdict": report.final_verdict,
        }
        index["approvals"][package_hash(pkg)] = record
        self._write_index(index)
        return record

    def sign(self, pkg: AppPackage) -> AppPackage:
        signed = sign_package(pkg, self.private_key(), self.approvals)
        h = package_hash(signed)
        index = self._read_index()
        index["apps"][signed.app_id] = {"version": signed.version, "hash": h, "approval": index["approvals"][h]}
        self._write_index(index)
        stem = self.root / "packages" / f"{signed.app_id}-{signed.version}"
        atomic_write(Path(f"{stem}.avpkg"), signed.canonical_bytes())
        atomic_write(Path(f"{stem}.sig"), signed.signature)
        return signed

    def check(self) -> list[str]:
        """Index entries whose stored bytes or signature no longer check out."""
        problems = []
        key = self.public_key()
        for app_id, entry in self.index().items():
            stem = self.root / "packages" / f"{app_id}-{entry['version']}"
            p, s = Path(f"{stem}.avpkg"), Path(f"{stem}.sig")
            if not p.exists() or not s.exists():
                problems.append(f"{app_id}: stored package missing")
                continue
            data = p.read_bytes()
            if hashlib.sha256(data).hexdigest() != entry["hash"]:
                problems.append(f"{app_id}: stored package does not match its hash")
                continue
            try:
                check_signature(deserialize(data).with_signature(s.read_bytes()), key)
            except AVGuardError as exc:
                problems.append(f"{app_id}: {exc}")
        return problems


__all__ = [
    "APPROVED", "InstallOutcome", "MarketRegistry", "generate_key", "load_private_key",
    "load_public_key", "package_hash", "private_key_pem", "public_key_pem", "sign_package", "verify_and_install",
]
