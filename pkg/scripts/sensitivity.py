"""Run every sensitivity sweep and write one CSV per axis.

Usage: python scripts/sensitivity.py [out_dir] [n_paths]
"""

import os
import sys

from varreins import cli


def main(argv) -> int:
    out_dir = argv[0] if argv else "sweeps"
    paths = argv[1] if len(argv) > 1 else "1000000"
    os.makedirs(out_dir, exist_ok=True)
    status = 0
    for axis in cli.AXES:
        extra = ["--T", "5"] if axis == "epsilon" else []
        out = os.path.join(out_dir, f"{axis}.csv")
        code = cli.main(["sweep", "--axis", axis, "--paths", paths, "--out", out, *extra])
        print(f"{axis}: {out} (exit {code})")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
