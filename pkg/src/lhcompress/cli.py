"""Command-line experiment runner.

Subcommands: ``info``, ``schedule``, ``blind-demo``, ``encode``, ``decode``,
``simulate`` and ``exact``. Settings come from flags, optionally layered over
a JSON ``--config`` file whose keys mirror the long flag names (dashes become
underscores).

Exit codes: 0 success, 2 configuration error, 3 when some exact quantity was
skipped for exceeding the compute budget.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from ._validation import check_ensemble
from .analysis import (
    DEFAULT_BUDGET,
    BudgetExceededError,
    alice_distribution,
    average_error,
    average_fidelity,
    blind_counterexample,
    bob_distribution,
    fidelity,
    fidelity_lower_bound,
    sequence_error,
    windowed_max_error,
)
from .codec import (
    DEFAULT_LITERAL_CAP,
    FAST,
    MODES,
    CodecParams,
    MalformedMessageError,
    decode,
    encode,
    message_bit_length,
    pack_message,
    parse_s_policy,
    read_stream,
    schedule_params,
    unpack_message,
    write_stream,
)
from .ensemble import Ensemble, EnsembleError, average_state, entropy_bits, levitin_holevo
from .sequence import SequenceSpec
from .shared_randomness import SharedSeed, sample_source_labels

SCHEMA = "lhcompress-report v1"
EXACT_FIDELITY_MAX_N = 12
EXIT_CONFIG = 2
EXIT_BUDGET = 3

SIMULATE_COLUMNS = [
    "N", "seq_index", "n_counts", "bits", "error_flag",
    "E_exact", "EK_exact", "F_bound", "F_exact", "I_ref",
]
EXACT_COLUMNS = [
    "N", "S_log2", "E", "E_K_max_on_window", "fidelity_bound",
    "fidelity_exact", "bits_per_signal", "I_reference",
]


class ConfigError(Exception):
    pass


def fmt(value) -> str:
    """Stable text for report cells; blank for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, str)):
        return str(value)
    return format(float(value), ".12g")


def _num(value):
    return None if value is None else float(fmt(value))


@dataclass
class ExperimentConfig:
    ensemble: Ensemble
    seed: SharedSeed
    n_grid: list[int]
    s_policy: tuple
    mode: str = FAST
    trials: int = 100
    out: Path | None = None
    literal_cap: int = DEFAULT_LITERAL_CAP
    budget: int = DEFAULT_BUDGET
    jobs: int = 1
    exact: bool = True

    def params(self, N: int) -> CodecParams:
        try:
            return schedule_params(N, self.ensemble, self.s_policy, self.mode, self.literal_cap)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_grid(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        items = [int(v) for v in value]
    else:
        try:
            items = [int(v) for v in str(value).split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad N grid {value!r}") from exc
    if not items or any(n < 1 for n in items) or items != sorted(set(items)):
        raise ConfigError(f"N grid must be nonempty, positive and strictly ascending: {value!r}")
    return items


DEFAULTS = {
    "seed": None,
    "session_label": None,
    "n": "8,16,32",
    "s_policy": "margin:0.25",
    "mode": FAST,
    "trials": 100,
    "out": None,
    "literal_cap": DEFAULT_LITERAL_CAP,
    "budget": DEFAULT_BUDGET,
    "jobs": 1,
    "no_exact": False,
}


def load_config(args: argparse.Namespace, *, need_seed: bool = True) -> ExperimentConfig:
    raw = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")

    def get(name):
        value = getattr(args, name, None)
        if value is None or value is False:
            value = raw.get(name, value if value is not None else DEFAULTS.get(name))
        return value

    ens_src = get("ensemble")
    if ens_src is None:
        raise ConfigError("--ensemble is required")
    if isinstance(ens_src, str) and args.config and not Path(ens_src).is_absolute() and getattr(args, "ensemble", None) is None:
        ens_src = str(Path(args.config).parent / ens_src)
    try:
        ensemble = check_ensemble(ens_src)
    except (OSError, EnsembleError) as exc:
        raise ConfigError(f"bad ensemble: {exc}") from exc

    label = get("session_label")
    if label is None:
        label = Path(ens_src).stem if isinstance(ens_src, str) else "experiment"
    seed_text = get("seed")
    if seed_text is None:
        if need_seed:
            raise ConfigError("--seed (64 hex characters) is required")
        seed_text = "00" * 32
    try:
        seed = SharedSeed.from_hex(str(seed_text), label)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    try:
        policy = parse_s_policy(get("s_policy"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mode = get("mode")
    if mode not in MODES:
        raise ConfigError(f"--mode must be one of {MODES}")
    try:
        trials = int(get("trials"))
        literal_cap = int(get("literal_cap"))
        budget = int(get("budget"))
        jobs = int(get("jobs"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if trials < 1:
        raise ConfigError("--trials must be at least 1")
    out = get("out")
    return ExperimentConfig(
        ensemble=ensemble,
        seed=seed,
        n_grid=_parse_grid(get("n")),
        s_policy=policy,
        mode=mode,
        trials=trials,
        out=Path(out) if out else None,
        literal_cap=literal_cap,
        budget=budget,
        jobs=max(1, jobs),
        exact=not bool(get("no_exact")),
    )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# simulate


def _simulate_chunk(task):
    """Encode, decode and score one slice of sequence indices (process-pool safe)."""
    ensemble, seed, params, N, indices, budget, exact = task
    L = ensemble.L
    bits = message_bit_length(params, L)
    I_ref = levitin_holevo(ensemble)
    ek_cache, f_cache = {}, {}
    rows, records, flagged = [], [], False
    for seq_index in indices:
        labels = sample_source_labels(seed, ensemble.weights, N, seq_index)
        spec = SequenceSpec(tuple(int(v) for v in labels), L)
        msg = encode(spec, ensemble, params, seed, seq_index)
        decode(msg, ensemble, params, seed, seq_index, spec)
        payload, nbits = pack_message(msg, params, L)
        records.append((seq_index, payload, nbits))

        ek = f_exact = None
        if exact:
            key = spec.counts
            if key not in ek_cache:
                try:
                    rep = SequenceSpec.contiguous(key)
                    ek_cache[key] = float(sequence_error(rep, ensemble, params.S, budget))
                    if N <= EXACT_FIDELITY_MAX_N:
                        f_cache[key] = fidelity(
                            alice_distribution(rep, ensemble, budget),
                            bob_distribution(rep, ensemble, params.S, budget),
                            budget,
                        )
                except BudgetExceededError:
                    ek_cache[key] = None
            ek = ek_cache[key]
            f_exact = f_cache.get(key)
            flagged = flagged or ek is None
        rows.append({
            "N": N,
            "seq_index": seq_index,
            "n_counts": ";".join(str(c) for c in spec.counts),
            "bits": bits,
            "error_flag": msg.error,
            "EK_exact": ek,
            "F_bound": None if ek is None else fidelity_lower_bound(ek),
            "F_exact": f_exact,
            "I_ref": I_ref,
        })
    return rows, records, flagged


def _chunks(indices: list[int], jobs: int) -> list[list[int]]:
    size = max(1, math.ceil(len(indices) / (jobs * 4)))
    return [indices[i:i + size] for i in range(0, len(indices), size)]


def run_experiment(cfg: ExperimentConfig) -> tuple[dict[str, bytes], bool]:
    """Run the seeded simulation; returns ``({filename: contents}, flagged)``.

    Sequence indices are global across the N grid (``position * trials + t``)
    so no two rows share protocol randomness.
    """
    files: dict[str, bytes] = {}
    all_rows, summary, flagged = [], [], False
    I_ref = levitin_holevo(cfg.ensemble)
    for g, N in enumerate(cfg.n_grid):
        params = cfg.params(N)
        indices = list(range(g * cfg.trials, (g + 1) * cfg.trials))
        tasks = [
            (cfg.ensemble, cfg.seed, params, N, chunk, cfg.budget, cfg.exact)
            for chunk in _chunks(indices, cfg.jobs)
        ]
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(_simulate_chunk, tasks))
        else:
            results = [_simulate_chunk(t) for t in tasks]
        rows = [r for res in results for r in res[0]]
        records = [r for res in results for r in res[1]]
        flagged = flagged or any(res[2] for res in results)
        rows.sort(key=lambda r: (r["N"], r["seq_index"]))
        records.sort(key=lambda r: r[0])

        E = None
        if cfg.exact:
            try:
                E = average_error(N, cfg.ensemble, params.S, cfg.budget)
            except BudgetExceededError:
                flagged = True
        for r in rows:
            r["E_exact"] = E
        all_rows.extend(rows)

        buf = io.BytesIO()
        write_stream(buf, records)
        files[f"stream_N{N}.lhc"] = buf.getvalue()
        summary.append({
            "N": N,
            "S_log2": _num(params.S.log2),
            "trials": cfg.trials,
            "error_rate": _num(sum(r["error_flag"] for r in rows) / len(rows)),
            "E": _num(E),
            "bits_per_signal": _num(message_bit_length(params, cfg.ensemble.L) / N),
            "I_reference": _num(I_ref),
        })
    files["simulate.csv"] = _csv_text(SIMULATE_COLUMNS, all_rows).encode()
    files["summary.json"] = _json_text({"schema": SCHEMA, "rows": summary}).encode()
    return files, flagged


def exact_report(cfg: ExperimentConfig) -> tuple[list[dict], bool]:
    rows, flagged = [], False
    I_ref = levitin_holevo(cfg.ensemble)
    for N in cfg.n_grid:
        params = cfg.params(N)
        row = {
            "N": N,
            "S_log2": params.S.log2,
            "bits_per_signal": message_bit_length(params, cfg.ensemble.L) / N,
            "I_reference": I_ref,
        }
        try:
            E = average_error(N, cfg.ensemble, params.S, cfg.budget)
            row["E"] = E
            row["fidelity_bound"] = fidelity_lower_bound(E)
            row["E_K_max_on_window"] = windowed_max_error(N, cfg.ensemble, params.S, budget=cfg.budget)
            if N <= EXACT_FIDELITY_MAX_N:
                row["fidelity_exact"] = average_fidelity(N, cfg.ensemble, params.S, cfg.budget)
        except BudgetExceededError:
            flagged = True
            row["budget_exceeded"] = True
        rows.append(row)
    return rows, flagged


# ---------------------------------------------------------------------------
# subcommands


def cmd_info(args) -> int:
    cfg = load_config(args, need_seed=False)
    e = cfg.ensemble
    rho = average_state(e)
    print(f"d = {e.d}, L = {e.L}")
    print("average state: " + " ".join(f"{float(v):.6f}" for v in rho.eigenvalues))
    print(f"S(rho) = {entropy_bits(rho):.4f}")
    print(f"I = {levitin_holevo(e):.4f}")
    return 0


def cmd_schedule(args) -> int:
    cfg = load_config(args, need_seed=False)
    I_ref = levitin_holevo(cfg.ensemble)
    print("N\tlog2_S\tindex_bits\tmessage_bits\tbits_per_signal\tf_N")
    for N in cfg.n_grid:
        p = cfg.params(N)
        bits = message_bit_length(p, cfg.ensemble.L)
        print(f"{N}\t{p.S.log2:.4f}\t{p.index_width}\t{bits}\t{bits / N:.4f}\t{p.S.log2 / N - I_ref:.4f}")
    return 0


def cmd_blind_demo(args) -> int:
    grid = _parse_grid(args.n) if args.n else list(range(4, 129, 4)) + [4000]
    print("N\tflip_error\tlog2_q\tlog2_g\tlog2(g)/N")
    for N in grid:
        if N % 4:
            raise ConfigError(f"blind demo needs multiples of 4, got {N}")
        r = blind_counterexample(N)
        print(f"{N}\t{r.flip_error}\t{math.log2(r.q):.4f}\t{math.log2(r.g):.4f}\t{r.rate_bits_per_signal:.4f}")
    print("S(rho) = 0.8113 bits per signal (limit of log2(g)/N)")
    return 0


def _read_labels(path, L: int) -> list[tuple[int, ...]]:
    out = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read labels: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            seq = tuple(int(v) for v in line.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"bad label line {line!r}") from exc
        if any(not 0 <= k < L for k in seq):
            raise ConfigError(f"label outside range(0, {L}) in {line!r}")
        out.append(seq)
    return out


def _single_n(cfg: ExperimentConfig) -> int:
    if len(cfg.n_grid) != 1:
        raise ConfigError("encode/decode take a single --n value")
    return cfg.n_grid[0]


def _sequences(cfg, args, N):
    L = cfg.ensemble.L
    if getattr(args, "labels", None):
        seqs = _read_labels(args.labels, L)
        if any(len(s) != N for s in seqs):
            raise ConfigError(f"every label sequence must have length {N}")
        return seqs
    return [
        tuple(int(v) for v in sample_source_labels(cfg.seed, cfg.ensemble.weights, N, i))
        for i in range(cfg.trials)
    ]


def cmd_encode(args) -> int:
    cfg = load_config(args)
    if cfg.out is None:
        raise ConfigError("--out is required")
    N = _single_n(cfg)
    params = cfg.params(N)
    L = cfg.ensemble.L
    records, label_lines = [], []
    for i, labels in enumerate(_sequences(cfg, args, N)):
        msg = encode(SequenceSpec(labels, L), cfg.ensemble, params, cfg.seed, i)
        payload, nbits = pack_message(msg, params, L)
        records.append((i, payload, nbits))
        label_lines.append(",".join(map(str, labels)))
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_stream(cfg.out / "stream.lhc", records)
    _write_text(cfg.out / "labels.txt", "\n".join(label_lines) + "\n")
    print(f"wrote {len(records)} records to {cfg.out / 'stream.lhc'}")
    return 0


def cmd_decode(args) -> int:
    cfg = load_config(args)
    if not args.input:
        raise ConfigError("--in is required")
    N = _single_n(cfg)
    params = cfg.params(N)
    L = cfg.ensemble.L
    labels = _sequences(cfg, args, N) if (args.labels or params.mode == FAST) else None
    lines = []
    try:
        for seq_index, payload, nbits in read_stream(args.input):
            msg = unpack_message(payload, nbits, params, L)
            spec = None
            if labels is not None:
                if seq_index >= len(labels):
                    raise ConfigError(f"no label sequence for record {seq_index}")
                spec = SequenceSpec(labels[seq_index], L)
            s = decode(msg, cfg.ensemble, params, cfg.seed, seq_index, spec)
            lines.append(f"{seq_index},{int(msg.error)},{''.join(str(int(v)) for v in s)}")
    except (OSError, MalformedMessageError) as exc:
        raise ConfigError(f"cannot decode {args.input}: {exc}") from exc
    text = "seq_index,error_flag,string\n" + "\n".join(lines) + "\n"
    if cfg.out:
        _write_text(cfg.out / "decoded.txt", text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    if cfg.out is None:
        raise ConfigError("--out is required")
    files, flagged = run_experiment(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (cfg.out / name).write_bytes(data)
    print(f"wrote {', '.join(sorted(files))} to {cfg.out}")
    return EXIT_BUDGET if flagged else 0


def cmd_exact(args) -> int:
    cfg = load_config(args, need_seed=False)
    rows, flagged = exact_report(cfg)
    csv_text = _csv_text(EXACT_COLUMNS, rows)
    records = [{k: (_num(v) if isinstance(v, (float, Fraction)) else v) for k, v in r.items()} for r in rows]
    if cfg.out:
        _write_text(cfg.out / "exact.csv", csv_text)
        _write_text(cfg.out / "report.json", _json_text({"schema": SCHEMA, "rows": records}))
    sys.stdout.write(csv_text)
    return EXIT_BUDGET if flagged else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of default settings")
    common.add_argument("--ensemble", help="ensemble description (JSON)")
    common.add_argument("--seed", help="shared seed, 64 hex characters")
    common.add_argument("--session-label", dest="session_label")
    common.add_argument("--n", help="comma-separated ascending N grid")
    common.add_argument("--s-policy", dest="s_policy",
                        help="explicit:<S> | margin:<delta> | paper:<K>,<alpha>")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--trials", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--literal-cap", dest="literal_cap", type=int)
    common.add_argument("--budget", type=int, help="max count classes for exact sums")
    common.add_argument("--jobs", type=int, help="worker processes for simulate")
    common.add_argument("--no-exact", dest="no_exact", action="store_true",
                        help="skip exact error and fidelity columns")

    parser = argparse.ArgumentParser(prog="lhcompress", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("info", parents=[common], help="entropy and Levitin-Holevo value").set_defaults(func=cmd_info)
    sub.add_parser("schedule", parents=[common], help="codebook sizes over the N grid").set_defaults(func=cmd_schedule)
    blind = sub.add_parser("blind-demo", help="blind-scenario counting table")
    blind.add_argument("--n", help="comma-separated multiples of 4")
    blind.set_defaults(func=cmd_blind_demo)
    enc = sub.add_parser("encode", parents=[common], help="compress label sequences to an LHC1 stream")
    enc.add_argument("--labels", help="file of label sequences, one per line")
    enc.set_defaults(func=cmd_encode)
    dec = sub.add_parser("decode", parents=[common], help="decode an LHC1 stream to basis strings")
    dec.add_argument("--in", dest="input", help="LHC1 stream file")
    dec.add_argument("--labels", help="label sequences (needed in fast mode unless sampled)")
    dec.set_defaults(func=cmd_decode)
    sub.add_parser("simulate", parents=[common], help="seeded Monte Carlo run with reports").set_defaults(func=cmd_simulate)
    sub.add_parser("exact", parents=[common], help="exact error/fidelity table").set_defaults(func=cmd_exact)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"lhcompress: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
