"""Benchmark CLI: ``helix {matvec,matmul,ffn,roofline}``.

All randomness comes from ``--seed``. CSV output leaves out wall-clock
columns so that two runs with the same seed and config produce identical
bytes; the table and ``--json`` output include them.

Exit codes: 0 all correctness checks passed, 1 a check failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from . import kernels as K
from . import roofline as R
from . import transformer as T
from .backend import LevelExhausted, make_backend
from .packing import PACKERS, SeededMatrix, is_pow2, pack_rowmajor, unpack_rowmajor
from .params import PARAMS_ENV, CkksParams, ParamsError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
METHODS = ("row", "diag", "bsgs")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """The knobs that determine an experiment's output (everything but wall time)."""

    experiment: str
    backend: str | None
    params: str | None
    seed: int
    repeats: int
    options: tuple = ()

    @classmethod
    def from_args(cls, args) -> "ExperimentConfig":
        skip = {"command", "func", "backend", "params", "seed", "repeats", "json", "csv", "svg", "parallel"}
        opts = tuple(sorted((k, v) for k, v in vars(args).items() if k not in skip))
        return cls(args.command, args.backend, args.params, args.seed, args.repeats, opts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["options"] = {k: v for k, v in self.options}
        return d


def load_presets() -> dict:
    text = resources.files("helix").joinpath("presets.json").read_text()
    return json.loads(text)


def resolve_params(path=None, backend=None) -> CkksParams:
    path = path or os.environ.get(PARAMS_ENV)
    params = CkksParams.load(path) if path else CkksParams.default()
    if backend and backend != params.backend:
        params = params.with_backend(backend)
    return params


def _tolerance(backend: str, ref: np.ndarray) -> float:
    if backend == "reference":
        return 1e-9 * max(1.0, float(np.max(np.abs(ref))) if ref.size else 1.0)
    return 1e-2


def _timed(fn, repeats: int):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, float(np.mean(times))


def _run_cells(cells, fn, parallel: int) -> list:
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _modeled(trace, params) -> tuple:
    return R.measure_trace(trace, model=R.CostModel.for_params(params))


# --- experiments ---------------------------------------------------------


def _chunked_matvec(M, x, chunk: int = 1024) -> np.ndarray:
    rows = M.shape[0]
    return np.concatenate([M[i : min(i + chunk, rows), :] @ x for i in range(0, rows, chunk)])


def matvec_cell(params, method, rows, cols, seed, repeats=1, preset="", level=None) -> dict:
    kind = params.backend
    rng = np.random.default_rng([seed, rows, cols])
    if preset:
        M = SeededMatrix(rows, cols, seed=seed)
        x = rng.integers(-4, 5, cols).astype(np.float64)
        ref = _chunked_matvec(M, x)
    else:
        M = rng.integers(-4, 5, (rows, cols)).astype(np.float64)
        x = rng.integers(-4, 5, cols).astype(np.float64)
        if kind == "lattice":
            M, x = M / 8, x / 4
        ref = M @ x
    level = params.max_level if level is None else level

    def run():
        P = PACKERS[method](M, params.slot_count)
        be = make_backend(params, rotations=K.required_rotations(P), seed=seed)
        ct = K.encrypt_input(be, x, P, level)
        y, rep = K.matvec(be, P, ct)
        outs = [be.decrypt(c) for c in y] if isinstance(y, list) else be.decrypt(y)
        return P, rep, K.decode_output(outs, P)

    (P, rep, got), wall = _timed(run, repeats)
    err = float(np.max(np.abs(got - ref)))
    ops, nbytes = _modeled(rep.trace, params)
    return {
        "preset": preset,
        "method": method,
        "rows": rows,
        "cols": cols,
        "correct": bool(err <= _tolerance(kind, ref)),
        "max_abs_err": err,
        "rotations": rep.rotations,
        "expected_rotations": K.expected_rotations(P),
        "pt_muls": rep.pt_muls,
        "ct_muls": rep.ct_muls,
        "adds": rep.adds,
        "levels": rep.levels_consumed,
        "modeled_ops": ops,
        "modeled_bytes": nbytes,
        "wall_s": wall,
    }


def matmul_cell(params, d, level, seed, repeats=1) -> dict:
    kind = params.backend
    n = params.slot_count
    if not is_pow2(d):
        raise UsageError(f"d = {d} is not a power of two")
    if d * d > n:
        raise UsageError(f"d = {d} needs d^2 = {d * d} slots, only {n} available")
    if level < 2:
        raise UsageError("matmul requires a multiplicative level of 2 (input level >= 2)")
    if level > params.max_level:
        raise UsageError(f"level {level} exceeds L = {params.max_level}")
    rng = np.random.default_rng([seed, d])
    A = rng.integers(-2, 3, (d, d)).astype(np.float64)
    B = rng.integers(-2, 3, (d, d)).astype(np.float64)
    if kind == "lattice":
        A, B = A / 4, B / 4
    ref = A @ B

    def run():
        be = make_backend(params, rotations=K.matmul_rotations(d), seed=seed)
        ca = be.encrypt(pack_rowmajor(A, n).payload(0), level)
        cb = be.encrypt(pack_rowmajor(B, n).payload(0), level)
        c, rep = K.matmul_ctct(be, ca, cb, d)
        return rep, unpack_rowmajor(be.decrypt(c), d)

    (rep, got), wall = _timed(run, repeats)
    err = float(np.max(np.abs(got - ref)))
    ops, nbytes = _modeled(rep.trace, params)
    expected = K.matmul_expected(d)
    return {
        "d": d,
        "level": level,
        "correct": bool(err <= _tolerance(kind, ref)),
        "max_abs_err": err,
        "rotations": rep.rotations,
        "expected_rotations": expected["rotations"],
        "pt_muls": rep.pt_muls,
        "ct_muls": rep.ct_muls,
        "levels": rep.levels_consumed,
        "modeled_ops": ops,
        "modeled_bytes": nbytes,
        "wall_s": wall,
    }


def ffn_rows(params, d_h, degree, seed, repeats=1, interval=T.DEFAULT_INTERVAL, flop_dh=768, l_boot=T.DEFAULT_L_BOOT) -> tuple:
    """Rows for the with-GeLU, no-GeLU and merged FFN, plus a summary dict."""
    kind = params.backend
    base = T.FfnConfig.random(d_h, seed=seed, degree=degree, scale=0.125)
    base.interval = tuple(interval)
    x = np.random.default_rng([seed, d_h]).integers(-2, 3, d_h).astype(np.float64) * 0.5
    variants = {
        "with-gelu": base,
        "no-gelu": T.FfnConfig(d_h, base.W1, base.W2, activation=None),
        "merged": T.prune_and_merge(base),
    }
    plan_variant = {"with-gelu": "gelu", "no-gelu": "none", "merged": "merged"}
    flop_ratio = T.merge_flop_ratio(flop_dh)
    rows = []
    for name, cfg in variants.items():
        ref = T.ffn_reference(cfg, x)

        def run(cfg=cfg):
            be = make_backend(params, rotations=T.ffn_rotations(cfg, params.slot_count), seed=seed)
            ct = T.encrypt_token(be, cfg, x)
            y, rep = T.ffn_forward(be, cfg, ct)
            return rep, be.decrypt(y)[:d_h]

        (rep, got), wall = _timed(run, repeats)
        err = float(np.max(np.abs(got - ref)))
        ops, nbytes = _modeled(rep.trace, params)
        plan = T.ffn_plan(plan_variant[name], L=l_boot, l_boot=l_boot, degree=127)
        rows.append({
            "variant": name,
            "d_h": d_h,
            "correct": bool(err <= max(_tolerance(kind, ref), 1e-6 if kind == "reference" else 0)),
            "max_abs_err": err,
            "total_ops": rep.trace.total,
            "rotations": rep.rotations,
            "pt_muls": rep.pt_muls,
            "ct_muls": rep.ct_muls,
            "adds": rep.adds,
            "levels": rep.levels_consumed,
            "bootstraps": rep.bootstraps,
            "plan_bootstraps_deg127": plan.bootstraps,
            "flop_ratio": flop_ratio if name == "merged" else 1.0,
            "modeled_ops": ops,
            "modeled_bytes": nbytes,
            "wall_s": wall,
        })
    totals = [r["total_ops"] for r in rows]
    summary = {
        "ordering_ok": bool(totals[2] < totals[1] < totals[0]),
        "flop_ratio_preset_d_h": flop_dh,
        "flop_ratio": flop_ratio,
    }
    return rows, summary


# --- output --------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def rows_csv(rows: list) -> str:
    cols = [c for c in rows[0] if c != "wall_s"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def rows_table(rows: list) -> str:
    cols = list(rows[0])
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def rows_svg(rows: list, label_keys, value_key: str, title: str) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "helix-cli", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        labels = ["/".join(str(r[k]) for k in label_keys) for r in rows]
        ax.bar(range(len(rows)), [r[value_key] for r in rows])
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
        ax.set_ylabel(value_key)
        ax.set_title(title)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def _emit(args, experiment: str, rows: list, summary: dict | None = None, svg: str | None = None) -> None:
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_csv(rows))
    if args.svg and svg is not None:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(svg)
    if args.json:
        doc = {"experiment": experiment, "config": ExperimentConfig.from_args(args).to_dict(), "rows": rows}
        if summary:
            doc["summary"] = summary
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(rows_table(rows))
        for k, v in (summary or {}).items():
            print(f"{k}: {_fmt(v)}")


# --- subcommands ---------------------------------------------------------


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _level_range(text: str) -> list:
    if "-" in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return _int_list(text)


def cmd_matvec(args) -> int:
    methods = METHODS if args.method == "all" else (args.method,)
    cells = []
    if args.preset:
        if args.backend == "lattice":
            raise UsageError("preset-sized matrices are counter runs on the reference backend")
        presets = load_presets()
        params = CkksParams.generate(ring_degree=presets["ring_degree"])
        names = list(presets["models"]) if args.preset == "all" else [args.preset]
        for name in names:
            m = presets["models"][name]
            for method in methods:
                cells.append((params, method, m["d_ff"], m["d_h"], name))
    else:
        params = resolve_params(args.params, args.backend)
        if args.rows < 1 or args.cols < 1:
            raise UsageError("--rows and --cols must be positive")
        for method in methods:
            cells.append((params, method, args.rows, args.cols, ""))
    rows = _run_cells(
        cells,
        lambda c: matvec_cell(c[0], c[1], c[2], c[3], args.seed, args.repeats, preset=c[4], level=args.level),
        args.parallel,
    )
    svg = rows_svg(rows, ("preset", "method", "rows", "cols"), "rotations", "matvec rotations") if args.svg else None
    _emit(args, "matvec", rows, svg=svg)
    return EXIT_OK if all(r["correct"] for r in rows) else EXIT_FAIL


def cmd_matmul(args) -> int:
    params = resolve_params(args.params, args.backend)
    levels = args.levels or [2]
    cells = sorted((d, lvl) for d in args.dims for lvl in levels)
    for d, lvl in cells:  # validate before running anything
        if not is_pow2(d):
            raise UsageError(f"d = {d} is not a power of two")
        if lvl < 2:
            raise UsageError("matmul requires a multiplicative level of 2 (input level >= 2)")
    rows = _run_cells(cells, lambda c: matmul_cell(params, c[0], c[1], args.seed, args.repeats), args.parallel)
    svg = rows_svg(rows, ("d", "level"), "modeled_bytes", "matmul modeled DRAM bytes") if args.svg else None
    _emit(args, "matmul", rows, svg=svg)
    return EXIT_OK if all(r["correct"] for r in rows) else EXIT_FAIL


def cmd_ffn(args) -> int:
    params = resolve_params(args.params, args.backend)
    if args.d_h < 1:
        raise UsageError("--d-h must be positive")
    flop_dh = load_presets()["models"][args.flop_preset]["d_h"]
    rows, summary = ffn_rows(params, args.d_h, args.degree, args.seed, args.repeats, tuple(args.interval), flop_dh)
    svg = rows_svg(rows, ("variant",), "total_ops", "FFN homomorphic op counts") if args.svg else None
    _emit(args, "ffn", rows, summary, svg)
    ok = all(r["correct"] for r in rows) and summary["ordering_ok"]
    return EXIT_OK if ok else EXIT_FAIL


def cmd_roofline(args) -> int:
    try:
        if args.profile:
            profile = R.MachineProfile.load(args.profile)
        else:
            profile = R.MachineProfile(args.peak_gops, args.bandwidth_gbs, args.profile_name)
        model = R.CostModel(args.N, args.L, args.dnum)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc))
    levels = args.roof_levels
    if not levels or min(levels) < 1 or max(levels) > model.L:
        raise UsageError(f"levels must lie in [1, {model.L}]")
    report = R.roofline_report(profile, model, levels=levels)
    rows = [
        {
            "primitive": r.primitive,
            "level": r.level,
            "ops": r.int_ops,
            "bytes": r.bytes,
            "intensity": r.intensity,
            "attainable": r.attainable_gops,
            "bound": r.bound,
        }
        for r in report.rows
    ]
    if args.csv:
        R.emit_roofline(report, csv_path=args.csv)
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(R.report_svg(report))
    summary = {"ridge_point": profile.ridge_point, "memory_bound_rows": sum(r["bound"] == "memory" for r in rows)}
    if args.json:
        doc = {"experiment": "roofline", "config": ExperimentConfig.from_args(args).to_dict(), "rows": rows, "summary": summary}
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(rows_table(rows))
        print(f"ridge point {profile.ridge_point:.6g} ops/byte; {summary['memory_bound_rows']}/{len(rows)} rows memory-bound")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=("reference", "lattice"), default=None,
                        help="slot backend (default: the params file's, else reference)")
    common.add_argument("--params", default=None, help=f"params JSON (fallback: ${PARAMS_ENV})")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--repeats", type=int, default=3, help="timed repetitions per cell (mean reported)")
    common.add_argument("--json", action="store_true", help="print JSON instead of a table")
    common.add_argument("--csv", default=None, help="write rows as CSV (no wall-clock columns)")
    common.add_argument("--svg", default=None, help="write an SVG plot")
    common.add_argument("--parallel", type=int, default=1, help="worker threads for independent cells")

    parser = argparse.ArgumentParser(prog="helix", description="Encrypted linear-algebra benchmarks on a toy CKKS stack")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matvec", parents=[common], help="row / diagonal / BSGS matrix-vector products")
    p.add_argument("--method", choices=METHODS + ("all",), default="all")
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--level", type=int, default=None, help="input level (default L)")
    p.add_argument("--preset", choices=("gpt2", "phi3", "llama", "all"), default=None,
                   help="FFN up-projection dims of a model preset (reference backend, N=2^16)")
    p.set_defaults(func=cmd_matvec)

    p = sub.add_parser("matmul", parents=[common], help="ciphertext-ciphertext matmul sweep")
    p.add_argument("--dims", type=_int_list, default=[2, 4, 8, 16])
    p.add_argument("--levels", type=_int_list, default=None, help="input levels (default 2)")
    p.set_defaults(func=cmd_matmul)

    p = sub.add_parser("ffn", parents=[common], help="FFN with GeLU, without, and merged")
    p.add_argument("--d-h", type=int, default=16)
    p.add_argument("--degree", type=int, default=7, help="GeLU polynomial degree for the encrypted run")
    p.add_argument("--interval", type=float, nargs=2, default=list(T.DEFAULT_INTERVAL))
    p.add_argument("--flop-preset", choices=("gpt2", "phi3", "llama"), default="gpt2")
    p.set_defaults(func=cmd_ffn)

    p = sub.add_parser("roofline", parents=[common], help="modeled roofline of add / mul / rotate")
    p.add_argument("--peak-gops", type=float, default=115.2)
    p.add_argument("--bandwidth-gbs", type=float, default=100.0)
    p.add_argument("--profile", default=None, help="machine profile JSON (peak_gops, bandwidth_gbs, name)")
    p.add_argument("--profile-name", default="default-48t-2.4GHz")
    p.add_argument("--N", type=int, default=1 << 16)
    p.add_argument("--L", type=int, default=20)
    p.add_argument("--dnum", type=int, default=3)
    p.add_argument("--levels", dest="roof_levels", type=_level_range, default=list(range(1, 21)))
    p.set_defaults(func=cmd_roofline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.repeats < 1:
        parser.error("--repeats must be at least 1")
    if args.parallel < 1:
        parser.error("--parallel must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ParamsError, T.Unschedulable, LevelExhausted, OSError, json.JSONDecodeError) as exc:
        print(f"helix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
