"""Check analytic gradients, Hessians, traces and the bound against the
finite-difference oracle for every activation.

    python3 scripts/verify_all.py [--samples 25]
"""

import argparse
import sys

from hessbound import cli

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, default=25)
    args = ap.parse_args()
    status = 0
    for M, N in [(1, 1), (2, 3), (3, 4)]:
        print(f"== M={M} N={N}")
        status |= cli.main(["verify", "--M", str(M), "--N", str(N), "--samples", str(args.samples)])
    sys.exit(status)
