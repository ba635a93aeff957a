"""Command-line driver: ``fraclap {solve,eigen,probe,check,export}``.

Scenarios are described by INI files.  Every run directory receives the
numerical outputs, a ``diagnostics.json`` and a ``manifest.json`` that embeds
the configuration text and the SHA-256 of every input and output file, so the
manifest alone is enough to reproduce the run.  Wall-clock time goes to
``run.log`` only, which keeps all CSV and JSON files byte-identical between
repeated runs.

Exit codes: 0 success, 1 a configured assertion or the numerical solver
failed, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy.fft

from .calculus import commutator_g_integral
from .dirichlet import (SolveReport, assemble_dirichlet, eigen_dirichlet, semigroup_solve,
                        solve_dirichlet, ultracontractive_times, ultracontractivity_probe)
from .fracop import FracParams
from .grid import Ball, GridFunction, Interval, build_cutoff, grid_for_box, make_domain
from .regularity import (CutSpec, local_regularity_probe, pohozaev_residual, sobolev_norm)
from .theory import check_identities

log = logging.getLogger("fraclap")

SUITES = ("commutator", "semigroup", "pohozaev", "ultracontractive", "theory")

SCHEMA = {
    "scenario": {"id"},
    "domain": {"dim", "shape", "a", "b", "center", "radius", "box_lo", "box_hi"},
    "operator": {"s", "h", "h_ladder", "dense_limit"},
    "source": {"f", "f_file"},
    "eigen": {"k"},
    "probe": {"p", "sigma_scan", "cutoffs", "expect", "tolerance"},
}


class UsageError(Exception):
    """Bad configuration or missing file (exit code 2)."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _h_value(text: str) -> float:
    """Accept plain numbers or powers of two written as 2^-k."""
    text = text.strip()
    if text.startswith("2^"):
        return 2.0 ** float(text[2:])
    return float(text)


def load_config(path: str | Path) -> tuple[dict, str]:
    """Parse and validate an INI scenario; returns (typed record, raw text)."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text()
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise UsageError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise UsageError(f"unknown key '{key}' in section [{sec}]")
    try:
        return _typed(cp, path.parent), text
    except (KeyError, ValueError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from exc


def _typed(cp: configparser.ConfigParser, base: Path) -> dict:
    get = lambda sec, key, default=None: cp.get(sec, key, fallback=default)  # noqa: E731
    dim = int(get("domain", "dim", "1"))
    shape = get("domain", "shape", "interval")
    if shape == "interval":
        if dim != 1:
            raise ValueError("interval domains are one-dimensional")
        dom = Interval(float(get("domain", "a", "-1")), float(get("domain", "b", "1")))
    elif shape == "ball":
        centre = tuple(_floats(get("domain", "center", ",".join(["0"] * dim))))
        if len(centre) != dim:
            raise ValueError("center must have dim entries")
        dom = Ball(centre, float(get("domain", "radius", "1")))
    else:
        raise ValueError(f"unknown shape '{shape}'")
    lo_b, hi_b = dom.bbox()
    pad = 0.5 * float(np.max(np.asarray(hi_b) - np.asarray(lo_b)))
    rec = {
        "id": cp.get("scenario", "id"),
        "dim": dim,
        "shape": dom,
        "box_lo": float(get("domain", "box_lo", str(float(np.min(lo_b)) - pad))),
        "box_hi": float(get("domain", "box_hi", str(float(np.max(hi_b)) + pad))),
        "s": float(cp.get("operator", "s")),
        "h": _h_value(get("operator", "h", "2^-8")),
        "h_ladder": [_h_value(t) for t in get("operator", "h_ladder", "").split(",") if t.strip()],
        "dense_limit": int(get("operator", "dense_limit", "4096")),
        "f": float(get("source", "f", "1")),
        "f_file": None,
        "k": int(get("eigen", "k", "1")),
        "p": float(get("probe", "p", "2")),
        "sigma_scan": _scan(get("probe", "sigma_scan", "0.1:1.9:0.1")),
        "cutoffs": _cutoffs(get("probe", "cutoffs", "global")),
        "expect": _expect(get("probe", "expect", "")),
        "tolerance": float(get("probe", "tolerance", "0.1")),
    }
    if not 0 < rec["s"] < 1:
        raise ValueError("s must lie in (0,1)")
    ff = get("source", "f_file")
    if ff:
        fp = Path(ff) if Path(ff).is_absolute() else base / ff
        if not fp.is_file():
            raise UsageError(f"source file not found: {fp}")
        rec["f_file"] = fp
    return rec


def _scan(text: str) -> list[float]:
    if ":" in text:
        a, b, st = (float(t) for t in text.split(":"))
        n = int(round((b - a) / st)) + 1
        return [round(a + i * st, 12) for i in range(n)]
    return _floats(text)


def _cutoffs(text: str) -> list[CutSpec | None]:
    """``global`` or ``label:a,b,A,B,r`` (1D intervals), separated by ';'."""
    out = []
    for item in (t.strip() for t in text.split(";")):
        if not item:
            continue
        if item == "global":
            out.append(None)
            continue
        label, _, nums = item.partition(":")
        v = _floats(nums)
        if len(v) != 5:
            raise ValueError(f"cutoff '{item}' needs five numbers a,b,A,B,r")
        out.append(CutSpec(label.strip(), Interval(v[0], v[1]), Interval(v[2], v[3]), v[4]))
    return out


def _expect(text: str) -> dict:
    """``label=value`` pairs separated by ';' (value ``none`` for no threshold)."""
    out = {}
    for item in (t.strip() for t in text.split(";")):
        if item:
            k, _, v = item.partition("=")
            out[k.strip()] = None if v.strip().lower() == "none" else float(v)
    return out


def _params_record(rec: dict) -> dict:
    d = {k: v for k, v in rec.items() if k not in ("shape", "f_file")}
    d["shape"] = rec["shape"].to_dict()
    d["cutoffs"] = ["global" if c is None else
                    {"label": c.label, "omega_tilde": c.omega_tilde.to_dict(),
                     "omega": c.omega.to_dict(), "moll_radius": c.moll_radius}
                    for c in rec["cutoffs"]]
    d["f_file"] = None if rec["f_file"] is None else str(rec["f_file"])
    return d


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n",
                    encoding="utf-8")
    return path


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _finish(out: Path, verb: str, rec: dict | None, cfg_text: str | None, inputs: dict,
            outputs: list[Path], started: float) -> None:
    manifest = {
        "scenario": None if rec is None else rec["id"],
        "verb": verb,
        "parameters": None if rec is None else _params_record(rec),
        "config_text": cfg_text,
        "inputs": inputs,
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
        "tool_version": _version(),
    }
    _write_json(out / "manifest.json", manifest)
    (out / "run.log").write_text(f"verb={verb} wall_clock_seconds={time.time() - started:.3f}\n")


def _domain(rec: dict, h: float):
    grid = grid_for_box(rec["dim"], rec["box_lo"], rec["box_hi"], h)
    return grid, make_domain(grid, rec["shape"])


def _source(rec: dict, grid) -> GridFunction:
    if rec["f_file"] is not None:
        f = GridFunction.read_csv(rec["f_file"])
        if f.grid != grid:
            raise UsageError(f"grid of {rec['f_file']} does not match the configured grid")
        return f
    return GridFunction.from_callable(grid, lambda *x: np.full(x[0].shape, rec["f"]))


def _inputs(cfg: Path, rec: dict) -> dict:
    d = {str(cfg): _sha256(cfg)}
    if rec["f_file"] is not None:
        d[str(rec["f_file"])] = _sha256(rec["f_file"])
    return d


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------


def cmd_solve(cfg: Path, out: Path) -> int:
    started = time.time()
    rec, text = load_config(cfg)
    grid, mask = _domain(rec, rec["h"])
    params = FracParams(rec["s"], rec["dim"])
    op = assemble_dirichlet(mask, params, rec["dense_limit"])
    f = _source(rec, grid)
    rep = SolveReport()
    u = solve_dirichlet(op, f, rep)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, meta = u.to_csv(out / "u.csv")
    centre = tuple(n // 2 for n in grid.shape)
    diag = {"solve": rep.to_dict(), "operator": op.report(), "max_abs": float(np.abs(u.values).max()),
            "centre_value": float(u.values[centre]), "l2": u.norm(2)}
    d = _write_json(out / "diagnostics.json", diag)
    _finish(out, "solve", rec, text, _inputs(cfg, rec), [csv_path, meta, d], started)
    log.info("solve: max |u| = %.6g", diag["max_abs"])
    return 0


def cmd_eigen(cfg: Path, out: Path) -> int:
    started = time.time()
    rec, text = load_config(cfg)
    grid, mask = _domain(rec, rec["h"])
    params = FracParams(rec["s"], rec["dim"])
    op = assemble_dirichlet(mask, params, rec["dense_limit"])
    pairs = eigen_dirichlet(op, rec["k"])
    out.mkdir(parents=True, exist_ok=True)
    files = []
    table = out / "eigenvalues.csv"
    with open(table, "w", newline="") as fh:
        fh.write("k,lambda,residual\n")
        for i, pr in enumerate(pairs, 1):
            fh.write(f"{i},{float(pr.lam)!r},{float(pr.residual)!r}\n")
    files.append(table)
    for i, pr in enumerate(pairs, 1):
        files.extend(pr.vec.to_csv(out / f"phi_{i}.csv"))
    diag = {"operator": op.report(),
            "eigenvalues": [float(p.lam) for p in pairs],
            "residuals": [float(p.residual) for p in pairs]}
    try:
        lhs, rhs, res = pohozaev_residual(pairs[0], mask, rec["s"])
        diag["pohozaev"] = {"lhs": lhs, "rhs": rhs, "relative_residual": res}
    except (ValueError, ArithmeticError) as exc:
        diag["pohozaev"] = {"skipped": str(exc)}
    files.append(_write_json(out / "diagnostics.json", diag))
    _finish(out, "eigen", rec, text, _inputs(cfg, rec), files, started)
    return 0


def cmd_probe(cfg: Path, out: Path) -> int:
    started = time.time()
    rec, text = load_config(cfg)
    if len(rec["h_ladder"]) < 3:
        raise UsageError("probe needs operator.h_ladder with at least three levels")
    params = FracParams(rec["s"], rec["dim"])

    def solution(h):
        grid, mask = _domain(rec, h)
        op = assemble_dirichlet(mask, params, rec["dense_limit"])
        return solve_dirichlet(op, _source(rec, grid)), mask

    report = local_regularity_probe(solution, None, rec["p"], rec["cutoffs"], rec["sigma_scan"],
                                    rec["h_ladder"], s=rec["s"])
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "report.json", out / "norms.csv", out / "fit.csv"]
    files[0].write_text(report.to_json(), encoding="utf-8")
    files[1].write_text(report.to_csv())
    files[2].write_text(report.fit_csv())
    verdicts = {}
    for label, want in sorted(rec["expect"].items()):
        if label not in report.threshold:
            raise UsageError(f"expectation for unknown cutoff '{label}'")
        got = report.threshold[label]
        ok = (got is None) if want is None else (got is not None and abs(got - want) <= rec["tolerance"])
        verdicts[label] = {"expected": want, "measured": got, "pass": ok}
    files.append(_write_json(out / "diagnostics.json",
                             {"verdict": {k: report.verdict(k) for k in sorted(report.threshold)},
                              "assertions": verdicts}))
    _finish(out, "probe", rec, text, _inputs(cfg, rec), files, started)
    for label in sorted(report.threshold):
        print(f"{label}: {report.verdict(label)}")
    return 0 if all(v["pass"] for v in verdicts.values()) else 1


def _suite_commutator() -> dict:
    res = {}
    cut_spec = (Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)
    for s in (0.25, 0.5, 0.75):
        params = FracParams(s)
        ratios = []
        for k in (6, 7, 8):
            h = 2.0 ** -k
            grid = grid_for_box(1, -1.5, 1.5, h)
            mask = make_domain(grid, Interval(-1, 1))
            op = assemble_dirichlet(mask, params)
            u = solve_dirichlet(op, GridFunction.from_callable(grid, lambda x: np.ones_like(x)))
            cut = build_cutoff(mask, *cut_spec)
            g = commutator_g_integral(u, cut, params, mask)
            ratios.append(g.norm(2) / sobolev_norm(u, s, 2.0))
        res[f"ratio_stability_s{s}"] = {"ratios": ratios, "pass": max(ratios) / min(ratios) < 2.0}
    return res


def _suite_semigroup() -> dict:
    res = {}
    for s in (0.25, 0.5, 0.75):
        grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -7)
        mask = make_domain(grid, Interval(-1, 1))
        op = assemble_dirichlet(mask, FracParams(s))
        f = GridFunction.from_callable(grid, lambda x: np.ones_like(x))
        rep = SolveReport()
        v = semigroup_solve(op, f, T_max=200.0, n_steps=400, report=rep)
        u = solve_dirichlet(op, f)
        err = (v - u).norm(2) / u.norm(2)
        res[f"semigroup_vs_direct_s{s}"] = {"relative_difference": err,
                                           "truncation_indicator": rep.truncation_indicator,
                                           "pass": err < 1e-2}
    return res


def _suite_pohozaev() -> dict:
    res = {}
    for s in (0.5, 0.75):
        grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -9)
        mask = make_domain(grid, Interval(-1, 1))
        pair = eigen_dirichlet(assemble_dirichlet(mask, FracParams(s)), 1)[0]
        lhs, rhs, r = pohozaev_residual(pair, mask, s)
        res[f"pohozaev_s{s}"] = {"lhs": lhs, "rhs": rhs, "relative_residual": r, "pass": r <= 0.05}
    return res


def _suite_ultracontractive() -> dict:
    res = {}
    for s in (0.5, 0.25):
        grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -8)
        mask = make_domain(grid, Interval(-1, 1))
        op = assemble_dirichlet(mask, FracParams(s))
        # a one-node source: the L^1 -> L^inf rate needs data much narrower than t^{1/(2s)}
        f = GridFunction.from_callable(grid, lambda x: np.where(np.abs(x) < 0.5 * grid.h, 1.0, 0.0))
        fit = ultracontractivity_probe(op, f, ultracontractive_times(op))
        want = -1.0 / (2.0 * s)
        res[f"ultracontractive_s{s}"] = {"slope": fit.slope, "expected": want,
                                         "pass": abs(fit.slope - want) <= 0.15}
    return res


def cmd_check(suite: str, out: Path | None) -> int:
    started = time.time()
    if suite not in SUITES:
        raise UsageError(f"unknown suite '{suite}'; choose from {', '.join(SUITES)}")
    if suite == "theory":
        result = {k: {"pass": bool(v)} for k, v in check_identities().items()}
    else:
        result = globals()[f"_suite_{suite}"]()
    ok = all(v["pass"] for v in result.values())
    payload = {"suite": suite, "pass": ok, "properties": result}
    print(json.dumps(payload, sort_keys=True, indent=2, default=_jsonable))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        f = _write_json(out / f"check_{suite}.json", payload)
        _finish(out, "check", None, None, {}, [f], started)
    return 0 if ok else 1


EXPORT_COLUMNS = {"fit": "log_h,log_norm,sigma,p,cutoff",
                  "norms": "kind,sigma,p,q,cutoff,h,value"}


def cmd_export(run: Path, what: str, out: Path | None) -> int:
    manifest_path = run / "manifest.json"
    if not manifest_path.is_file():
        raise UsageError(f"no manifest.json in {run}")
    manifest = json.loads(manifest_path.read_text())
    target = (out or run)
    target.mkdir(parents=True, exist_ok=True)
    dest = target / f"export_{what}.csv"
    if what in EXPORT_COLUMNS:
        src = run / f"{what}.csv"
        if not src.is_file():
            raise UsageError(f"run has no {what} data ({src} missing)")
        body = src.read_text().split("\n", 1)[1]
        dest.write_text(f"# columns: {EXPORT_COLUMNS[what]}\n{EXPORT_COLUMNS[what]}\n{body}")
    elif what == "solution":
        name = "u.csv" if manifest.get("verb") == "solve" else "phi_1.csv"
        src = run / name
        if not src.is_file():
            raise UsageError(f"run has no solution file ({src} missing)")
        u = GridFunction.read_csv(src)
        names = ["x", "y"][: u.grid.dim]
        cols = ",".join([*names, "value"])
        lines = [f"# columns: {cols}", cols]
        for p, v in zip(u.grid.points(), u.values.ravel()):
            lines.append(",".join([*(repr(float(c)) for c in p), repr(float(v))]))
        dest.write_text("\n".join(lines) + "\n")
    else:
        raise UsageError(f"unknown export target '{what}'")
    print(dest)
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclap", description=__doc__.split("\n")[0])
    ap.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    ap.add_argument("--seed", type=int, default=None,
                    help="reserved; every computation is deterministic")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("solve", "eigen", "probe"):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
    p = sub.add_parser("check")
    p.add_argument("suite")
    p.add_argument("--out", type=Path, default=None)
    p = sub.add_parser("export")
    p.add_argument("run", type=Path)
    p.add_argument("what", choices=("fit", "norms", "solution"))
    p.add_argument("--out", type=Path, default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with scipy.fft.set_workers(max(1, args.threads)):
            if args.verb == "solve":
                return cmd_solve(args.config, args.out)
            if args.verb == "eigen":
                return cmd_eigen(args.config, args.out)
            if args.verb == "probe":
                return cmd_probe(args.config, args.out)
            if args.verb == "check":
                return cmd_check(args.suite, args.out)
            return cmd_export(args.run, args.what, args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
