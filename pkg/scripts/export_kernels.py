#!/usr/bin/env python3
"""Train the deployable families and emit their C kernels plus golden
vectors, ready for the conformance harness:

    python scripts/export_kernels.py --out out/kernels
    make -C harness KERNEL_DIR=../out/kernels run

GP kernels are skipped: their interpolation weights exceed what
single-precision inference can reproduce at the conformance tolerance.
"""

import argparse
import sys
from pathlib import Path

from tinyconv import codegen, families, lowering, oracle

DEPLOY_FAMILIES = {
    "temperature": ["linear", "quadratic", "lut-20", "nn-3-1",
                    "gru-tanh-sigmoid", "ar1ma1", "original"],
    "pressure": ["linear", "quadratic", "lut-400", "nn-3-1", "original"],
    "humidity": ["linear", "quadratic", "lut-400", "nn-3-1", "original"],
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/kernels")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--vectors", type=int, default=1000)
    args = ap.parse_args()

    calib = oracle.default_calibration()
    named = []
    for quantity, fams in DEPLOY_FAMILIES.items():
        for family in fams:
            if family == "original":
                prog = lowering.lower_reference(quantity, calib)
            else:
                model = families.train_family(family, quantity, calib, args.seed)
                prog = lowering.lower(model, quantity, name=f"{quantity}_{family}")
            name = f"bme680_{quantity}_{family}".replace("-", "_")
            named.append((name, prog))
            print(f"lowered {name}")
    written = codegen.write_kernels(named, Path(args.out),
                                    n_vectors=args.vectors, seed=args.seed)
    print(f"wrote {len(written)} kernels to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
