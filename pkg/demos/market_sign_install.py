"""Market round trip in a scratch directory: vet, sign only what was
approved, install on a vehicle holding nothing but the market's public
key, and watch a one-byte edit get refused."""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

from avguard.pipeline.cli import main as cli
from avguard.pipeline.corpus import package_path


def run(*argv):
    print(f"$ avguard {' '.join(argv)}", flush=True)
    code = cli(list(argv))
    print(f"  exit {code}\n", flush=True)
    return code


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        market, vehicle = tmp / "market", tmp / "vehicle"
        app = tmp / "path_follower_corrected.avpkg"
        shutil.copytree(package_path("path_follower_corrected"), app)
        leak = tmp / "privacy_leak.avpkg"
        shutil.copytree(package_path("privacy_leak"), leak)

        run("vet", str(leak), "--market", str(market))
        run("sign", str(leak), "--market", str(market))
        # the full dynamic vetting of the path follower takes about a minute
        run("vet", str(app), "--market", str(market), "--out", str(tmp / "report.json"))
        run("sign", str(app), "--market", str(market))
        run("install", str(app), "--market-key", str(market / "keys" / "market.pub"), "--vehicle", str(vehicle))

        prog = app / "program.avir"
        prog.write_bytes(prog.read_bytes().replace(b"1.0", b"1.5", 1))
        run("install", str(app), "--market-key", str(market / "keys" / "market.pub"),
            "--vehicle", str(tmp / "other_vehicle"))


if __name__ == "__main__":
    main()
