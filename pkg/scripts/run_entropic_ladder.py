#!/usr/bin/env python3
"""Entropic sanity ladder on the two-state log market.

For each penalty weight theta the robust value sits between the worst case
over every model (zero, the log utility of the budget) and the classical
value under the reference; it decreases as theta grows because the penalty
(1/theta) * KL weakens and the adversary gains freedom.

Run with --write to pin the oracle-verified values into
tests/fixtures/entropic_ladder.json; the acceptance suite replays them.
"""

import argparse
import json
import math
from pathlib import Path

from ambigopt import (
    EntropicPenalty,
    FiniteMarket,
    MeasureFamily,
    Variational,
    log_utility,
    oracle_u,
    robust_primal_solve,
)

THETAS = (0.25, 1.0, 4.0)
X = 1.0


def build():
    market = FiniteMarket([1.0], [[2.0], [0.5]], [0.5, 0.5])
    family = MeasureFamily.full_simplex(market.reference)
    return market, family, log_utility()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--write", action="store_true",
                        help="pin the fixture file")
    args = parser.parse_args()
    market, family, u = build()
    classical = 0.5 * (math.log(1.5) + math.log(0.75))
    rows = {}
    print(f"{'theta':>6} {'solver':>20} {'oracle':>20} {'bound':>10}")
    for theta in THETAS:
        spec = Variational(penalty=EntropicPenalty(theta=theta))
        rep = robust_primal_solve(market, spec, family, u, X)
        ov = oracle_u(market, spec, family, u, X)
        agree = abs(rep.primal_value - ov.value) <= max(2e-3, ov.grid_bound)
        print(f"{theta:6.2f} {rep.primal_value:20.12f} {ov.value:20.12f} "
              f"{ov.grid_bound:10.2e} {'ok' if agree else 'DISAGREE'}")
        if not agree:
            return 1
        rows[str(theta)] = {"solver": rep.primal_value, "oracle": ov.value,
                            "oracle_bound": ov.grid_bound}
    print(f"bounds: worst case 0.0, classical {classical:.12f}")
    values = [rows[str(t)]["solver"] for t in THETAS]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:])), \
        "ladder must decrease as theta grows"
    assert all(-1e-6 <= v <= classical + 1e-6 for v in values)
    if args.write:
        out = (Path(__file__).resolve().parent.parent / "tests" / "fixtures"
               / "entropic_ladder.json")
        out.parent.mkdir(parents=True, exist_ok=True)
        payload = {"market": {"s0": [1.0], "st": [[2.0], [0.5]],
                              "p": [0.5, 0.5]},
                   "x": X, "classical": classical, "values": rows}
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"pinned {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
