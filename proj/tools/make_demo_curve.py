#!/usr/bin/env python3
"""Regenerates data/curves/demo9k.14c, the synthetic demonstration curve.

The curve is a smooth monotone trend with small multi-scale wiggles and a
slowly varying one-sigma band, formatted like published .14c releases
(descending cal BP, comma-delimited, two trailing Delta-14C columns that
calchron ignores). It is NOT a published calibration product; use a real
IntCal release for actual dating work.
"""

import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "curves", "demo9k.14c")

HEADER = """\
# demo9k: synthetic demonstration calibration curve (not a published product)
# regenerate with tools/make_demo_curve.py
# columns: cal BP, 14C age BP, one-sigma BP, Delta14C (permil), Delta14C sigma
"""


def mu(theta: float) -> float:
    return (
        0.9 * theta
        + 60.0
        + 6.0 * math.sin(2.0 * math.pi * theta / 500.0)
        + 3.0 * math.sin(2.0 * math.pi * theta / 180.0 + 0.8)
        + 1.5 * math.sin(2.0 * math.pi * theta / 90.0 + 2.1)
    )


def gamma(theta: float) -> float:
    return (
        11.0
        + 4.0 * math.sin(2.0 * math.pi * theta / 1300.0 + 0.4)
        + 2.0 * math.sin(2.0 * math.pi * theta / 370.0 + 1.7)
    )


def main() -> None:
    rows = []
    for theta in range(9500, -1, -5):
        m = mu(theta)
        g = gamma(theta)
        # Conventional Delta14C transform, for cosmetic realism only.
        d14c = 1000.0 * (math.exp(theta / 8267.0 - m / 8033.0) - 1.0)
        d14c_sd = g * math.exp(theta / 8267.0) / 8.033
        rows.append(f"{theta},{m:.1f},{g:.1f},{d14c:.1f},{d14c_sd:.1f}")
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as f:
        f.write(HEADER)
        f.write("\n".join(rows))
        f.write("\n")
    print(f"wrote {OUT} ({len(rows)} knots)")


if __name__ == "__main__":
    main()
