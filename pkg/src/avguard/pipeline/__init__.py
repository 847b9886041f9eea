"""Market pipeline: packages, vetting, signing, installation and the CLI."""

from .market import InstallOutcome, MarketRegistry, sign_package, verify_and_install
from .package import AppPackage, RawPackage, build_package, deserialize, load_package, load_raw, save_package, serialize
from .vet import APPROVED, REJECTED_DYNAMIC, REJECTED_STATIC, VetReport, vet_package

__all__ = [
    "APPROVED", "AppPackage", "InstallOutcome", "MarketRegistry", "REJECTED_DYNAMIC", "REJECTED_STATIC",
    "RawPackage", "VetReport", "build_package", "deserialize", "load_package", "load_raw", "save_package",
    "serialize", "sign_package", "verify_and_install", "vet_package",
]
