"""Command-line interface: ``pinning-zeros <command> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 acceptance failure.
Every command accepts ``--config FILE.json`` whose keys are option names
(dashes or underscores); unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .numerics import ConvergenceError, DomainError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def _meta(args, started: float) -> dict:
    return {"version": __version__, "command": args.command, "seconds": round(time.time() - started, 3)}


def svg_plot(series, width: int = 640, height: int = 480, title: str = "", xlabel: str = "Re",
             ylabel: str = "Im") -> str:
    """Static SVG with fixed viewBox. ``series``: dicts with ``kind`` in {line, dots}, ``x``, ``y``, ``color``."""
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    padx, pady = 0.05 * (x1 - x0 or 1), 0.05 * (y1 - y0 or 1)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    m = 50

    def px(x):
        return m + (np.asarray(x, float) - x0) / (x1 - x0) * (width - 2 * m)

    def py(y):
        return height - m - (np.asarray(y, float) - y0) / (y1 - y0) * (height - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
           f'width="{width}" height="{height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
           'fill="none" stroke="#888"/>']
    if x0 < 0 < x1:
        out.append(f'<line x1="{px(0):.2f}" y1="{m}" x2="{px(0):.2f}" y2="{height - m}" stroke="#ccc"/>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{m}" y1="{py(0):.2f}" x2="{width - m}" y2="{py(0):.2f}" stroke="#ccc"/>')
    for s in series:
        X, Y = px(s["x"]), py(s["y"])
        color = s.get("color", "black")
        if s["kind"] == "line":
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(X, Y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            r = s.get("r", 2)
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r}" fill="{color}"/>' for a, b in zip(X, Y))
    out.append(f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{title}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
               f'text-anchor="middle">{ylabel}</text>')
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{px(v):.2f}" y="{height - m + 16}" font-size="10" text-anchor="{anchor}">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{m - 4}" y="{py(v):.2f}" font-size="10" text-anchor="end">{v:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# parsing helpers

def _alpha(text) -> Fraction:
    try:
        a = Fraction(str(text)).limit_denominator(10 ** 6)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad alpha {text!r}") from exc
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return a


def _int_list(text) -> list:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _complex(text) -> complex:
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad complex number {text!r}") from exc


def _law(kind: str, alpha: Fraction):
    from .renewal import InterArrivalLaw

    makers = {"special": InterArrivalLaw.special, "mixture-power": InterArrivalLaw.mixture_power,
              "mixture-lacunary": InterArrivalLaw.mixture_lacunary}
    return makers[kind](alpha)


# ---------------------------------------------------------------------------
# commands

def cmd_zeros(args) -> int:
    from .critcurve import CurveModel, curve_point
    from .griffiths import ZeroStore
    from .numerics import PrecisionPolicy
    from .zeros import distance_stats

    law = _law(args.law, args.alpha)
    policy = PrecisionPolicy(base_bits=args.base_bits)
    out = Path(args.out)
    store = ZeroStore(law, max(args.N), args.cache, policy)
    model = CurveModel(float(args.alpha), 4096)
    report = {"law": law.descriptor(), "runs": []}
    started = time.time()
    last = None
    for N in args.N:
        if N < 2:
            raise DomainError("N must be at least 2")
        zs = store[N]
        path = out / f"zeros-N{N}.json"
        out.mkdir(parents=True, exist_ok=True)
        zs.save(path)
        st = distance_stats(zs, model)
        report["runs"].append({
            "N": N, "count": len(zs), "file": path.name, "converged": zs.all_converged,
            "max_residual_log2": max(zs.residuals), "precision_bits": zs.precision_bits,
            "distance_max": st["max"], "distance_mean": st["mean"],
            "fraction_delocalized_side": st["fraction_delocalized_side"],
            "zeros": [[h.real, h.imag] for h in zs.as_complex().tolist()],
        })
        last = zs
    report["meta"] = _meta(args, started)
    atomic_write_text(out / "zeros-report.json", dump_json(report))
    if args.svg and last is not None:
        pts = last.as_complex()
        if args.coords == "w":
            pts = np.exp(pts)
            th = np.linspace(0, 2 * np.pi, 2001)
            curve = np.exp(curve_point(float(args.alpha), th))
        else:
            th = np.linspace(1e-9, 2 * np.pi - 1e-9, 2001)
            curve = curve_point(float(args.alpha), th)
        series = [{"kind": "line", "x": curve.real, "y": curve.imag, "color": "red"},
                  {"kind": "dots", "x": pts.real, "y": pts.imag, "color": "blue"}]
        label = "w" if args.coords == "w" else "h"
        atomic_write_text(args.svg, svg_plot(series, title=f"zeros of Z_N, N={last.N} ({args.law})",
                                             xlabel=f"Re {label}", ylabel=f"Im {label}"))
    print(f"wrote {len(args.N)} zero set(s) to {out}")
    return EXIT_OK


def cmd_curve(args) -> int:
    from .critcurve import CurveModel, curve_point, mu_density

    a = float(args.alpha)
    model = CurveModel(a, 4096)
    theta = np.linspace(0, 2 * np.pi, args.points, endpoint=False)
    h = curve_point(a, theta)
    s = model.s_of_theta(theta)
    dens = mu_density(a, np.where(theta <= np.pi, theta, 2 * np.pi - theta))
    rows = [(float(t), float(z.real), float(z.imag), float(si), float(d) if t > 0 else None)
            for t, z, si, d in zip(theta, h, s, dens)]
    atomic_write_text(args.out, to_csv(["theta", "re", "im", "s", "density"], rows))
    if args.svg:
        hh = curve_point(a, np.linspace(1e-9, 2 * np.pi - 1e-9, 2001))
        w = np.exp(hh)
        left = {"kind": "line", "x": hh.real, "y": hh.imag, "color": "black"}
        atomic_write_text(args.svg, svg_plot([left], title=f"critical curve, alpha={args.alpha}",
                                             xlabel="Re h", ylabel="Im h"))
        if args.svg_w:
            atomic_write_text(args.svg_w, svg_plot([{"kind": "line", "x": w.real, "y": w.imag}],
                                                   title=f"critical curve in w = e^h, alpha={args.alpha}",
                                                   xlabel="Re w", ylabel="Im w"))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .critcurve import classify_many

    points = list(args.h or [])
    if args.input:
        for line in Path(args.input).read_text().splitlines():
            if line.strip() and not line.lstrip().startswith("#"):
                points.append(_complex(line.strip()))
    if not points:
        raise ConfigError("no points to classify (use --h or --input)")
    labels, gap = classify_many(float(args.alpha), np.array(points), tol=args.tol)
    rows = [(float(p.real), float(p.imag), lab.value, float(g)) for p, lab, g in zip(points, labels, gap)]
    text = to_csv(["re", "im", "region", "gap"], rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_density(args) -> int:
    from .critcurve import CurveModel, mu_density_half_s

    a = float(args.alpha)
    model = CurveModel(a, 4096)
    s = np.linspace(0, model.half_length, args.points)
    exact = model.density_in_s(s)
    printed = mu_density_half_s(s) if args.alpha == Fraction(1, 2) else [None] * len(s)
    rows = [(float(si), float(e), None if p is None else float(p)) for si, e, p in zip(s, exact, printed)]
    atomic_write_text(args.out, to_csv(["s", "density", "closed_form_half"], rows))
    if args.svg:
        series = [{"kind": "line", "x": s, "y": exact, "color": "black"}]
        if args.alpha == Fraction(1, 2):
            norm = float(np.trapezoid(printed, s))
            series.append({"kind": "line", "x": s, "y": np.asarray(printed) / norm, "color": "red"})
        atomic_write_text(args.svg, svg_plot(series, title="density of zeros along the curve",
                                             xlabel="arclength s", ylabel="density"))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_f0zeros(args) -> int:
    from .scaling import f0_sweep, f0_zeros

    zs = f0_zeros(args.n_max)
    rows = [(z.index, float(complex(z.zeta).real), float(complex(z.zeta).imag),
             float(complex(z.seed).real), float(complex(z.seed).imag), z.gap) for z in zs]
    text = to_csv(["n", "re", "im", "seed_re", "seed_im", "gap"], rows)
    if args.out:
        atomic_write_text(args.out, text)
        sweep = f0_sweep(args.n_max)
        print(f"wrote {args.out}; sweep box (0,{sweep.x1:.3f})x(0,{sweep.y1:.3f}) holds {sweep.count} zeros")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scaling(args) -> int:
    from .renewal import InterArrivalLaw
    from .scaling import f0_np, f1_np, scaled_partition

    law = InterArrivalLaw.special(Fraction(1, 2))
    vals = [float(v) for v in args.grid_values.split(",")]
    grid = np.array([complex(x, y) for x in vals for y in vals])
    started = time.time()
    runs = []
    for N in args.N:
        sc = scaled_partition(law, N, grid)
        dev = np.abs(sc - f0_np(grid))
        runs.append({"N": N, "max_deviation": float(dev.max()),
                     "points": [{"zeta": [z.real, z.imag], "deviation": float(d),
                                 "first_correction": float(abs(f1)) / math.sqrt(N)}
                                for z, d, f1 in zip(grid, dev, f1_np(grid))]})
    report = {"grid": vals, "runs": runs,
              "first_correction_budget": 1.3 * float(np.abs(f1_np(grid)).max()), "meta": _meta(args, started)}
    atomic_write_text(args.out, dump_json(report))
    for r in runs:
        print(f"N={r['N']}: max |sqrt(N) Z - F0| = {r['max_deviation']:.6g}")
    return EXIT_OK


def cmd_griffiths(args) -> int:
    from .griffiths import GriffithsRun, ZeroStore, griffiths_constants, griffiths_sweep
    from .renewal import InterArrivalLaw

    if not 0 < args.p < 1:
        raise ConfigError("p must lie in (0, 1)")
    if args.k_min < 1 or args.k_max < args.k_min:
        raise ConfigError("need 1 <= k-min <= k-max")
    started = time.time()
    store = ZeroStore(InterArrivalLaw.special(Fraction(1, 2)), args.n_max, args.cache)
    run = GriffithsRun(args.p, n0=args.n0, n_max=args.n_max, zero_store=store)
    consts = griffiths_constants(args.p)
    rows = griffiths_sweep(run, range(args.k_min, args.k_max + 1), consts)
    manifest = {
        "p": args.p, "alpha": 0.5, "n0": args.n0, "n_max": args.n_max,
        "precision": {"taylor_bits": args.k_max + 192, "zero_policy": "256 + 1.5 n bits"},
        "band": [0.8, 1.25], "cos_cutoff": 0.2, "constants": consts.to_json(),
        "rows": [{"k": r.k, "t_k": r.t_k, "prediction": r.prediction, "ratio": r.ratio,
                  "cos_value": r.cos_value} for r in rows],
        "meta": _meta(args, started),
    }
    atomic_write_text(args.out, dump_json(manifest))
    kept = [r for r in rows if abs(r.cos_value) >= 0.2]
    inside = sum(0.8 <= r.ratio <= 1.25 for r in kept)
    print(f"wrote {args.out}; {inside}/{len(kept)} ratios in [0.8, 1.25]")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import Context, run_all

    started = time.time()
    results = run_all(args.only, Context(args.cache), echo=print)
    doc = {"results": [r.to_json() for r in results], "passed": all(r.passed for r in results),
           "meta": _meta(args, started)}
    if args.out:
        atomic_write_text(args.out, dump_json(doc))
    return EXIT_OK if doc["passed"] else EXIT_ACCEPTANCE


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinning-zeros", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="JSON file with option values")
        return sp

    z = add("zeros", cmd_zeros, "all zeros of Z_N for one or more N")
    z.add_argument("-N", type=_int_list, required=False, default=None, help="degree or comma list")
    z.add_argument("--alpha", type=_alpha, default=Fraction(1, 2))
    z.add_argument("--law", choices=["special", "mixture-power", "mixture-lacunary"], default="special")
    z.add_argument("--out", default="zeros-out")
    z.add_argument("--svg")
    z.add_argument("--coords", choices=["h", "w"], default="h")
    z.add_argument("--cache", help="zero-set cache directory")
    z.add_argument("--base-bits", type=int, default=256)

    c = add("curve", cmd_curve, "export the critical curve")
    c.add_argument("--alpha", type=_alpha, default=Fraction(1, 2))
    c.add_argument("--points", type=int, default=1000)
    c.add_argument("--out", default="curve.csv")
    c.add_argument("--svg")
    c.add_argument("--svg-w", help="also plot the curve in w = e^h")

    k = add("classify", cmd_classify, "localized / delocalized / critical labels")
    k.add_argument("--alpha", type=_alpha, default=Fraction(1, 2))
    k.add_argument("--h", type=_complex, action="append", help="point, e.g. 0.2+2.5j (repeatable)")
    k.add_argument("--input", help="file with one complex number per line")
    k.add_argument("--tol", type=float, default=1e-9)
    k.add_argument("--out")

    d = add("density", cmd_density, "arclength density of the limit law of zeros")
    d.add_argument("--alpha", type=_alpha, default=Fraction(1, 2))
    d.add_argument("--points", type=int, default=200)
    d.add_argument("--out", default="density.csv")
    d.add_argument("--svg")

    f = add("f0zeros", cmd_f0zeros, "zeros of the scaling function F0 (CSV)")
    f.add_argument("--n-max", type=int, default=7)
    f.add_argument("--out")

    s = add("scaling", cmd_scaling, "compare sqrt(N) Z_{N, zeta/sqrt(N)} with F0 on a grid")
    s.add_argument("-N", type=_int_list, default=[2500, 10000])
    s.add_argument("--grid-values", default="-2,0,2")
    s.add_argument("--out", default="scaling.json")

    g = add("griffiths", cmd_griffiths, "Taylor coefficients and their asymptotic prediction")
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--n0", type=int, default=3)
    g.add_argument("--n-max", type=int, default=300)
    g.add_argument("--k-min", type=int, default=40)
    g.add_argument("--k-max", type=int, default=120)
    g.add_argument("--cache")
    g.add_argument("--out", default="griffiths.json")

    v = add("verify", cmd_verify, "run the acceptance checks")
    v.add_argument("--only", type=_int_list, help="criterion numbers, e.g. 1,2,12")
    v.add_argument("--cache")
    v.add_argument("--out")
    return p


def _apply_config(parser, args, argv) -> None:
    """Fill options from ``--config``; explicit command-line values win."""
    if not getattr(args, "config", None):
        return
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", "func")}
    given = {a.dest for a in sub._actions for opt in a.option_strings if opt in argv}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"unknown config key {key!r}")
        if dest in given:
            continue
        act = actions[dest]
        if act.type is not None and not isinstance(value, list) or act.type is _int_list:
            value = act.type(",".join(map(str, value)) if isinstance(value, list) else value)
        elif isinstance(value, list) and act.type is not None:
            value = [act.type(v) for v in value]
        if act.choices is not None and value not in act.choices:
            raise ConfigError(f"{key}: {value!r} not in {sorted(act.choices)}")
        setattr(args, dest, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        _apply_config(parser, args, argv)
        if args.command == "zeros" and not args.N:
            raise ConfigError("zeros needs -N")
        return args.func(args)
    except (ConfigError, argparse.ArgumentTypeError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
