"""Query lower bound versus measured swap-exponentiation cost for the depolarizing pair.

    python scripts/discrimination_bounds.py --n 1
    python scripts/discrimination_bounds.py --n 2     # slower: 16 x 16 channel, about a minute per cell
"""

import argparse
from dataclasses import dataclass, field

from csvt import bounds


@dataclass
class TableConfig:
    n: int = 1
    p: float = 1.0
    q: float = 0.9
    deltas: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    times: list = field(default_factory=lambda: [0.25, 0.5, 1.0])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1)
    a = ap.parse_args()
    cfg = TableConfig(n=a.n)
    if a.n > 1:
        cfg.deltas, cfg.times = [0.1], [0.5]
    inst = bounds.build_instance(cfg.n, cfg.p, cfg.q)
    print("identity check residuals:", {k: f"{v:.1e}" for k, v in bounds.closed_form_report(inst).items()})
    print(f"commutator norm {bounds.verify_commutation(inst)['commutator_norm']:.1e}, t* = {inst.derived['t_star']:.4f}")
    print("delta   t      lower bound   measured queries   tomography d^6/eps^2")
    for r in bounds.bound_table(inst, cfg.deltas, cfg.times):
        print(f"{r['delta']:<7} {r['t']:<6} {r['lower_bound']:<13.4f} {r['measured_upper_queries']:<18} "
              f"{r['tomo_baseline']:.3g}")


if __name__ == "__main__":
    main()
