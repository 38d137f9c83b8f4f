"""Batch experiment driver.

    csvt <command> --config cfg.json [--seed N] [--out DIR] [--emit-gnuplot]

Every run writes manifest.json echoing the resolved config, seed and
library version; passing that manifest back as --config reproduces the
run byte for byte. Exit codes: 0 success, 2 validation failure, 3 cap
violation.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds
from . import channels as chn
from . import encoding as enc
from . import estimators as est
from . import io
from .errors import CapError, ValidationError

COMMANDS = ("channel-gen", "encode-converge", "moments", "first-moment", "discriminate", "spectrum")
NAMED = {
    "identity": lambda d, a: chn.identity_channel(d),
    "completely_depolarizing": lambda d, a: chn.completely_depolarizing(d),
    "trace_and_replace": lambda d, a: chn.trace_and_replace(d),
    "depolarizing": lambda d, a: chn.depolarizing(a),
}


@dataclass
class RunConfig:
    command: str
    channel: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = "out"
    seed: int = 0


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _plain(x):
    return bool(x) if isinstance(x, (bool, np.bool_)) else float(x)


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c, "")) for c in columns])
    path.write_text(buf.getvalue())


def child_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def pool_map(fn, items):
    """Ordered map over a thread pool bounded by CSVT_THREADS (default 1)."""
    try:
        workers = max(1, int(os.environ.get("CSVT_THREADS", "1")))
    except ValueError:
        raise ValidationError("CSVT_THREADS must be an integer") from None
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# --- config -------------------------------------------------------------------

def load_config(path: str, command: str, seed: int | None, out: str | None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    if "config" in raw and "version" in raw:  # a manifest from a previous run
        raw = dict(raw["config"])
    cmd = raw.get("command", command)
    if cmd != command:
        raise ValidationError(f"config is for command {cmd!r}, not {command!r}")
    cfg = RunConfig(command, dict(raw.get("channel", {})), dict(raw.get("params", {})),
                    raw.get("out", "out"), int(raw.get("seed", 0)))
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    return cfg


def make_channel(spec: dict, seed: int) -> tuple[str, chn.KrausChannel]:
    """(channel_id, channel) from a file, a named channel or a generator spec."""
    if "file" in spec:
        obj = io.read_json(spec["file"])
        return Path(spec["file"]).stem, io.channel_from_json(obj)
    d = int(spec.get("d", 2))
    if d < 1:
        raise ValidationError("channel dimension must be positive")
    if "named" in spec:
        name = spec["named"]
        if name not in NAMED:
            raise ValidationError(f"unknown named channel {name!r}; choose from {sorted(NAMED)}")
        return name, NAMED[name](d, float(spec.get("a", 0.5)))
    s = int(spec.get("seed", seed))
    if spec.get("unital", False):
        return f"unital_d{d}_s{s}", chn.random_unital_channel(d, s)
    env = int(spec.get("env_dim", d * d))
    if env < 1:
        raise ValidationError("env_dim must be at least 1")
    return f"random_d{d}_e{env}_s{s}", chn.random_channel(d, env, s)


def channel_batch(cfg: RunConfig) -> list[tuple[str, chn.KrausChannel]]:
    spec = cfg.channel
    count = int(spec.get("count", 1))
    if count == 1 or "file" in spec or "named" in spec:
        return [make_channel(spec, cfg.seed)]
    seeds = child_seeds(cfg.seed, count)
    return [make_channel({k: v for k, v in spec.items() if k != "count"} | {"seed": s}, s)
            for s in seeds]


def write_manifest(cfg: RunConfig, out: Path) -> None:
    manifest = {"command": cfg.command, "config": asdict(cfg), "seed": cfg.seed, "version": __version__}
    io.write_json(out / "manifest.json", manifest)


def meta(cfg: RunConfig, mode: str) -> dict:
    return {"seed": cfg.seed, "mode": mode, "version": __version__}


def gnuplot(out: Path, name: str, data: str, using: str, logscale: bool = False,
            xlabel: str = "", ylabel: str = "") -> None:
    lines = ["set datafile separator ','", f"set xlabel '{xlabel}'", f"set ylabel '{ylabel}'"]
    if logscale:
        lines.append("set logscale xy")
    lines.append(f"plot '{data}' every ::1 using {using} with linespoints title '{name}'")
    (out / f"{name}.gp").write_text("\n".join(lines) + "\n")


# --- commands -----------------------------------------------------------------

def cmd_channel_gen(cfg: RunConfig, out: Path, plot: bool) -> dict:
    cid, ch = make_channel(cfg.channel, cfg.seed)
    io.write_json(out / "channel.json", io.channel_to_json(ch))
    rep = chn.lemma_suite(ch)
    io.write_json(out / "lemma_report.json", {
        "channel_id": cid, "values": {k: _plain(v) for k, v in rep.values.items()},
        "passed": {k: bool(v) for k, v in rep.passed.items()}, "ok": bool(rep.ok),
        "version": __version__})
    return {"channel_id": cid, "ok": rep.ok}


CONVERGE_COLS = ["d", "k", "n_steps", "query_count", "dt", "total_time", "dist_lower",
                 "dist_upper", "target", "seed", "mode", "version"]


def cmd_encode_converge(cfg: RunConfig, out: Path, plot: bool) -> dict:
    cid, ch = make_channel(cfg.channel, cfg.seed)
    if ch.d > enc.MAX_D:
        raise CapError(f"d={ch.d} exceeds the block-encoding cap d <= {enc.MAX_D}")
    p = cfg.params
    ks = p.get("k", [0.5])
    ks = ks if isinstance(ks, list) else [ks]
    grid = [int(n) for n in p.get("n_steps", [8, 16, 32, 64, 128])]
    if any(n < 1 for n in grid):
        raise ValidationError("n_steps entries must be positive")

    def run(item):
        k, n = item
        try:
            e = enc.approx_U_EA(ch, float(k), n)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        lo, hi = e.distance_bracket
        return {"d": ch.d, "k": k, "n_steps": n, "query_count": e.query_count, "dt": e.dt,
                "total_time": e.dt * n, "dist_lower": lo, "dist_upper": hi,
                "target": "expm(-iH)"} | meta(cfg, "exact")

    rows = pool_map(run, [(k, n) for k in ks for n in grid])
    write_csv(out / "converge.csv", rows, CONVERGE_COLS)
    slopes = {}
    for k in ks:
        sub = [r for r in rows if r["k"] == k]
        if len(sub) >= 2:
            x = np.log([r["n_steps"] for r in sub])
            y = np.log([r["dist_upper"] for r in sub])
            slopes[str(k)] = float(np.polyfit(x, y, 1)[0])
    for k, s in slopes.items():
        print(f"k={k}: log-log slope of dist_upper vs n_steps = {s:.4f}")
    io.write_json(out / "summary.json", {"channel_id": cid, "slopes": slopes})
    if plot:
        gnuplot(out, "converge", "converge.csv", "3:8", True, "n_steps", "dist_upper")
    return {"slopes": slopes}


MOMENT_COLS = ["channel_id", "q", "eps", "delta", "k", "encoder", "mode", "estimate", "exact",
               "abs_error", "swap_moment", "queries", "samples", "eps_H", "eps_F", "eps_poly",
               "delta_prime", "degree", "seed", "version"]


def cmd_moments(cfg: RunConfig, out: Path, plot: bool) -> dict:
    p = cfg.params
    qs = p.get("q", [4])
    qs = qs if isinstance(qs, list) else [qs]
    if any(float(q) <= 2 for q in qs):
        raise ValidationError("moments need q > 2")
    eps, delta = float(p.get("eps", 1e-2)), float(p.get("delta", 0.05))
    k = float(p.get("k", 0.5))
    modes = p.get("mode", ["exact"])
    modes = modes if isinstance(modes, list) else [modes]
    encoder = p.get("encoder", "exact")
    batch = channel_batch(cfg)
    items = [(i, cid, ch, float(q), m) for i, (cid, ch) in enumerate(batch) for q in qs for m in modes]
    seeds = child_seeds(cfg.seed, len(items))
    runs = out / "runs"
    runs.mkdir(exist_ok=True)

    def run(arg):
        (i, cid, ch, q, mode), s = arg
        kk = k if k <= 0.5 or chn.is_unital(ch) else 0.5
        rep = est.moment_pipeline(ch, q, eps, delta, kk, encoder, mode, seed=s)
        sw = ""
        if float(q).is_integer() and int(q) % 2 == 0:
            try:
                sw = est.swap_moment(ch, int(q))
            except CapError:
                sw = ""
        return rep, {"channel_id": cid, "q": q, "eps": eps, "delta": delta, "k": kk,
                     "encoder": encoder, "mode": mode, "estimate": rep.estimate,
                     "exact": rep.target_exact, "abs_error": rep.abs_error, "swap_moment": sw,
                     "queries": rep.queries, "samples": rep.samples, **rep.budget,
                     "degree": rep.extra["degree"], "seed": s, "version": __version__}

    results = pool_map(run, list(zip(items, seeds)))
    rows = []
    for j, (rep, row) in enumerate(results):
        io.write_json(runs / f"run_{j:04d}.json", rep.to_dict() | {"channel_id": row["channel_id"]})
        rows.append(row)
    write_csv(out / "moments.csv", rows, MOMENT_COLS)
    worst = max(r["abs_error"] for r in rows)
    print(f"{len(rows)} runs; max |S_q estimate - exact| = {worst:.3e}")
    if plot:
        gnuplot(out, "moments", "moments.csv", "9:8", False, "exact", "estimate")
    return {"max_abs_error": worst}


FIRST_COLS = ["channel_id", "eps", "delta", "mode", "estimate", "exact", "abs_error", "L",
              "eps1", "eps2", "eps3", "truncation_only", "verdict", "queries", "samples",
              "seed", "version"]


def cmd_first_moment(cfg: RunConfig, out: Path, plot: bool) -> dict:
    p = cfg.params
    eps, delta = float(p.get("eps", 0.1)), float(p.get("delta", 0.05))
    mode = p.get("mode", "exact")
    batch = channel_batch(cfg)
    seeds = child_seeds(cfg.seed, len(batch))

    def run(arg):
        (cid, ch), s = arg
        rep = est.first_moment_fc(ch, eps, delta, mode, seed=s)
        verdict = ("not entanglement-breaking" if rep.estimate > 1 + eps
                   else "consistent with entanglement-breaking")
        x = rep.extra
        return {"channel_id": cid, "eps": eps, "delta": delta, "mode": mode,
                "estimate": rep.estimate, "exact": rep.target_exact, "abs_error": rep.abs_error,
                "L": x["L"], "eps1": x["eps1"], "eps2": x["eps2"], "eps3": x["eps3"],
                "truncation_only": x["truncation_only"], "verdict": verdict,
                "queries": rep.queries, "samples": rep.samples, "seed": s, "version": __version__}

    rows = pool_map(run, list(zip(batch, seeds)))
    write_csv(out / "first_moment.csv", rows, FIRST_COLS)
    for r in rows:
        print(f"{r['channel_id']}: estimate {r['estimate']:.4f} (exact {r['exact']:.4f}), "
              f"L={r['L']}, {r['verdict']}")
    if plot:
        gnuplot(out, "first_moment", "first_moment.csv", "6:5", False, "exact", "estimate")
    return {"rows": len(rows)}


DISC_COLS = ["n", "p", "q", "delta_trace", "delta_trace_closed", "d_reshuffled_opnorm",
             "d_reshuffled_opnorm_closed", "fidelity", "fidelity_closed", "commutator_norm",
             "t_star", "arc", "arc_predicted", "seed", "mode", "version"]
TABLE_COLS = ["n", "p", "q", "delta", "t", "lower_bound", "measured_upper_queries",
              "tomo_baseline", "seed", "mode", "version"]


def cmd_discriminate(cfg: RunConfig, out: Path, plot: bool) -> dict:
    p = cfg.params
    n = int(p.get("n", 1))
    if n > bounds.MAX_QUBITS:
        raise CapError(f"n={n} exceeds the discrimination cap n <= {bounds.MAX_QUBITS}")
    pairs = p.get("pq", [[1.0, 0.9]])
    dgrid = [float(x) for x in p.get("delta_grid", [0.2, 0.1])]
    tgrid = [float(x) for x in p.get("t_grid", [0.5, 1.0])]
    measure = bool(p.get("measure_upper", True))
    for a, b in pairs:
        if not (0 <= a <= 1 and 0 <= b <= 1):
            raise ValidationError(f"depolarizing parameters ({a}, {b}) outside [0, 1]")

    def run(pair):
        a, b = float(pair[0]), float(pair[1])
        inst = bounds.build_instance(n, a, b)
        com = bounds.verify_commutation(inst)
        d, dp = inst.d, abs(a - b)
        ts = inst.derived["t_star"]
        arc, pred = bounds.eigenphase_arc(inst, ts / 10) if np.isfinite(ts) else (0.0, 0.0)
        row = {"n": n, "p": a, "q": b, "delta_trace": inst.derived["delta_trace"],
               "delta_trace_closed": 1.5 * dp,
               "d_reshuffled_opnorm": inst.derived["d_reshuffled_opnorm"],
               "d_reshuffled_opnorm_closed": np.sqrt(d / 2) * dp,
               "fidelity": inst.derived["fidelity"],
               "fidelity_closed": bounds.fidelity_closed_form(a, b),
               "commutator_norm": com["commutator_norm"], "t_star": ts, "arc": arc,
               "arc_predicted": pred} | meta(cfg, "exact")
        table = [r | meta(cfg, "exact") for r in bounds.bound_table(inst, dgrid, tgrid, measure)]
        return row, table

    results = pool_map(run, pairs)
    write_csv(out / "identities.csv", [r for r, _ in results], DISC_COLS)
    write_csv(out / "bound_table.csv", [t for _, tab in results for t in tab], TABLE_COLS)
    worst = max(r["commutator_norm"] for r, _ in results)
    print(f"{len(results)} instances; max commutator norm {worst:.3e}")
    if plot:
        gnuplot(out, "bound_table", "bound_table.csv", "5:6", True, "t", "lower bound")
    return {"max_commutator": worst}


SPECTRUM_COLS = ["channel_id", "index", "recovered", "svd", "abs_error", "seed", "mode", "version"]


def cmd_spectrum(cfg: RunConfig, out: Path, plot: bool) -> dict:
    spec = dict(cfg.channel)
    if not any(k in spec for k in ("file", "named")):
        spec.setdefault("unital", True)
    batch = channel_batch(RunConfig(cfg.command, spec, cfg.params, cfg.out, cfg.seed))
    rows = []
    for cid, ch in batch:
        rec = est.unital_spectrum(ch)
        sv = chn.spectrum(ch).singular_values
        rows += [{"channel_id": cid, "index": i, "recovered": r, "svd": s, "abs_error": abs(r - s)}
                 | meta(cfg, "exact") for i, (r, s) in enumerate(zip(rec, sv))]
    write_csv(out / "spectrum.csv", rows, SPECTRUM_COLS)
    worst = max(r["abs_error"] for r in rows)
    print(f"max |recovered - svd| = {worst:.3e}")
    if plot:
        gnuplot(out, "spectrum", "spectrum.csv", "4:3", False, "svd", "recovered")
    return {"max_abs_error": worst}


HANDLERS = {
    "channel-gen": cmd_channel_gen,
    "encode-converge": cmd_encode_converge,
    "moments": cmd_moments,
    "first-moment": cmd_first_moment,
    "discriminate": cmd_discriminate,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csvt", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config or a manifest.json from a previous run")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--emit-gnuplot", action="store_true", help="also write plain-text gnuplot scripts")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, args.seed, args.out)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(cfg, out)
        HANDLERS[args.command](cfg, out, args.emit_gnuplot)
    except CapError as exc:
        print(f"cap violation: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError, KeyError, TypeError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
