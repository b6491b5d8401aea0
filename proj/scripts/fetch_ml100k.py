#!/usr/bin/env python3
# Copyright 2026 The attrunlearn Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Fetches MovieLens 100K and writes u.data / u.user in the original layout.

Tries the GroupLens archive first. When that host is unreachable it falls back
to the copy bundled in the RecBole wheel (fetched through pip), whose
ml-100k.inter / ml-100k.user files are the same records with a typed header.
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def from_grouplens(out: pathlib.Path) -> bool:
    try:
        with urllib.request.urlopen(GROUPLENS_URL, timeout=20) as resp:
            blob = resp.read()
    except Exception as exc:  # noqa: BLE001
        print(f"grouplens unavailable: {exc}", file=sys.stderr)
        return False
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        (out / "u.data").write_bytes(zf.read("ml-100k/u.data"))
        (out / "u.user").write_bytes(zf.read("ml-100k/u.user"))
    return True


def from_recbole(out: pathlib.Path) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        cmd = [sys.executable, "-m", "pip", "download", "recbole==1.2.1",
               "--no-deps", "-q", "-d", tmp]
        if subprocess.run(cmd, check=False).returncode != 0:
            return False
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        base = "recbole/dataset_example/ml-100k/"
        with zipfile.ZipFile(wheel) as zf:
            inter = zf.read(base + "ml-100k.inter").decode().splitlines()
            users = zf.read(base + "ml-100k.user").decode().splitlines()
    # Drop the typed header row; ratings stay tab separated, users become
    # pipe separated as in the original u.user.
    (out / "u.data").write_text("\n".join(inter[1:]) + "\n")
    (out / "u.user").write_text(
        "\n".join("|".join(line.split("\t")) for line in users[1:]) + "\n")
    return True


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/ml-100k")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if (out / "u.data").exists() and (out / "u.user").exists():
        print(f"{out} already populated")
        return 0
    if from_grouplens(out) or from_recbole(out):
        n = sum(1 for _ in (out / "u.data").open())
        print(f"wrote {out}/u.data ({n} ratings) and {out}/u.user")
        return 0
    print("could not fetch MovieLens 100K", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
