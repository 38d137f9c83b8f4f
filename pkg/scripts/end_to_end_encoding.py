"""Arcsin-corrected encoding of (2/pi) H built from approximate controlled evolutions.

For each delta the per-query step count is doubled until the controlled
evolution's bracket upper bound is at most delta; the composed circuit is
then compared with the exact-query circuit under both distance bounds.

    python scripts/end_to_end_encoding.py
"""

import argparse
from dataclasses import dataclass, field

from csvt import channels as chn
from csvt import encoding as enc


@dataclass
class EndToEndConfig:
    deltas: list = field(default_factory=lambda: [0.1, 0.05])
    k: float = 0.5
    seed: int = 3


def steps_for(ch, k, delta, start=16):
    n = start
    while enc.controlled_variant(ch, k, n).distance_bracket[1] > delta:
        n *= 2
    return n


def run(cfg: EndToEndConfig):
    ch = chn.random_channel(2, 4, cfg.seed)
    out = []
    for delta in cfg.deltas:
        n = steps_for(ch, cfg.k, delta)
        rep = enc.arcsin_encoding_channel(ch, cfg.k, delta, n)
        out.append((delta, n, rep))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=3)
    a = ap.parse_args()
    print("delta  steps  queries  block_err  tight_upper  bracket_upper  total(tight)  total(bracket)  <= 2 delta")
    for delta, n, r in run(EndToEndConfig(seed=a.seed)):
        tight = r.upper_vs_exact_circuit + r.block_error
        loose = r.bracket_vs_exact_circuit[1] + r.block_error
        print(f"{delta:<6} {n:<6} {r.channel_uses:<8} {r.block_error:<10.3e} {r.upper_vs_exact_circuit:<12.3e} "
              f"{r.bracket_vs_exact_circuit[1]:<14.3e} {tight:<13.3e} {loose:<15.3e} "
              f"{tight <= 2 * delta} / {loose <= 2 * delta}")


if __name__ == "__main__":
    main()
