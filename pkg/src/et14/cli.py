"""Command-line front end: ``et14 verify | convexity | reduce | subsystem``.

Each command writes a summary JSON (``summary.json`` under ``--out``, or
stdout) with keys ``command``, ``config``, ``checks``, ``pass`` and
``timestamp``, plus per-state rows (``rows.jsonl`` or ``rows.csv``).
One ``PASS``/``FAIL`` line per check goes to stderr.

Exit codes: 0 all gating checks pass, 1 some check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import convexity as cvx
from . import frame
from .closure import ClosureSpec, Form, eta_form_of, spec_from_json
from .errors import Et14Error, SingularDenominator
from .invariants import check_derivative_identities, compute_X
from .state import MultiplierState, SamplerConfig, random_states, state_C
from .verifier import (closure_residuals, derived_forms_check, fd_gradient_residual, noncommutativity_demo,
                       pde_system_residual, subsystem_residual)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

TOL_EXACT = 1e-9
TOL_FD = 1e-5
TOL_WITNESS = 1e-3
FRAME_TOL = 1e-10
ROUND_TRIP_TOL = 1e-8
BLOCK_TOL = 1e-6
NEWTON_MAX_ITERS = 15
NEWTON_FRACTION = 0.95
ETA_MIN_PPLL = 0.1
FD_STATES = 5
DEFAULT_C = (0.3, 0.8, 0.5)

BUNDLED = {
    "x": ("family_x_psi.json", "family_x_phi.json", "family_x_mixed.json"),
    "eta": ("family_eta_1.json", "family_eta_2.json"),
    "sub5": ("subsystem_5.json",),
}


class UsageError(Exception):
    pass


# -- inputs -----------------------------------------------------------------------


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("et14") / "data" / name))


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def load_closures(path, form: str | None) -> list[tuple[str, dict]]:
    """``(name, closure json)`` pairs: the given file, or the bundled set for ``form``."""
    if path is not None:
        data = load_json(path)
        if form is not None and data.get("form") != form:
            raise UsageError(f"closure file has form {data.get('form')!r}, expected {form!r}")
        items = [(Path(path).name, data)]
    else:
        items = [(n, load_json(bundled_path(n))) for n in BUNDLED[form or "x"]]
    for name, data in items:
        try:
            spec_from_json(data)
        except (Et14Error, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid closure {name}: {exc}") from None
    return items


@lru_cache(maxsize=32)
def _spec_from_text(text: str) -> ClosureSpec:
    return spec_from_json(json.loads(text))


def spec_of(data: dict) -> ClosureSpec:
    return _spec_from_text(json.dumps(data, sort_keys=True))


def load_state(path) -> MultiplierState:
    try:
        return MultiplierState.from_json(load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid state file {path}: {exc}") from None


# -- parallel per-state evaluation --------------------------------------------------


def _per_state(payload):
    kind, closure_text, vectors = payload
    spec = _spec_from_text(closure_text) if closure_text else None
    out = []
    for v in vectors:
        s = MultiplierState.from_vector(v)
        if kind == "closure":
            out.append(closure_residuals(s, spec))
        elif kind == "identities":
            ids = check_derivative_identities(s)
            out.append({"lambda_derivatives": max(r.rel_error for r in ids)})
        elif kind == "fd":
            out.append({"fd_gradient_h": fd_gradient_residual(s, spec)})
        elif kind == "reduce":
            out.append(_reduce_row(s))
        else:
            raise ValueError(kind)
    return out


def parallel_map(kind: str, closure: dict | None, states, workers: int) -> list[dict]:
    """Evaluate ``kind`` on every state; results come back in state order."""
    text = json.dumps(closure, sort_keys=True) if closure is not None else ""
    vecs = [s.to_vector() for s in states]
    if workers <= 1 or len(vecs) < 2:
        return _per_state((kind, text, vecs))
    n = min(len(vecs), 4 * workers)
    chunks = [c for c in np.array_split(np.arange(len(vecs)), n) if len(c)]
    payloads = [(kind, text, [vecs[i] for i in c]) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_per_state, payloads))
    return [row for part in parts for row in part]


# -- reports -------------------------------------------------------------------------


@dataclass
class Report:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def check(self, name: str, paper_ref: str, max_rel: float, passed: bool, **info) -> None:
        entry = {"name": name, "paper_ref": paper_ref, "max_rel": float(max_rel), "pass": bool(passed)}
        entry.update(info)
        self.checks.append(entry)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks if c.get("gating", True))

    def summary(self) -> dict:
        out = {"command": self.command, "config": self.config, "checks": self.checks, "pass": self.passed,
               "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        out.update(self.extra)
        return out


def _sweep_rows(rep: Report, check: str, closure: str, results: list, key: str) -> float:
    worst = 0.0
    for k, r in enumerate(results):
        res = r[key]
        rel = res if isinstance(res, float) else res.max_rel
        row = {"check": check, "closure": closure, "index": k, "max_rel": rel}
        if not isinstance(res, float):
            row["max_abs"] = res.max_abs
        rep.rows.append(row)
        worst = max(worst, rel)
    return worst


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_outputs(rep: Report, out: str | None, fmt: str) -> None:
    summary = rep.summary()
    text = json.dumps(summary, indent=2, sort_keys=True, default=_plain)
    for c in rep.checks:
        tag = "PASS" if c["pass"] else "FAIL"
        if not c.get("gating", True):
            tag += " (info)"
        extra = f" [{c['closure']}]" if "closure" in c else (f" [{c['witness']}]" if "witness" in c else "")
        print(f"{tag} {c['name']}{extra} ({c['paper_ref']}) max_rel={c['max_rel']:.3e}", file=sys.stderr)
    if out is None:
        print(text)
        return
    d = Path(out)
    try:
        d.mkdir(parents=True, exist_ok=True)
        (d / "summary.json").write_text(text + "\n")
        if fmt == "csv":
            buf = io.StringIO()
            keys = sorted({k for r in rep.rows for k in r})
            w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in rep.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
            (d / "rows.csv").write_text(buf.getvalue())
        else:
            (d / "rows.jsonl").write_text("".join(json.dumps(r, sort_keys=True, default=_plain) + "\n"
                                                  for r in rep.rows))
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from None


def base_config(args) -> dict:
    """The inputs that determine the outputs (worker count and paths excluded)."""
    return {"seed": args.seed, "samples": args.samples, "form": args.form,
            "closure": None if args.closure is None else Path(args.closure).name,
            "state": None if args.state is None else Path(args.state).name,
            "tolerances": {"exact": args.tol_exact, "fd": args.tol_fd, "witness": args.tol_witness}}


def _require_samples(args) -> None:
    if args.state is None and args.samples <= 0:
        raise UsageError("empty sample set")


# -- verify -------------------------------------------------------------------------


def _witness(var: str) -> dict:
    """Raw x-form closure H0 = <var>, H1 = H2 = H3 = 0."""
    zero = {"vars": ["X1"], "terms": []}
    return {"form": "x", "label": f"H0 = {var}",
            "functions": [{"vars": [var], "terms": [{"exp": [1], "coef": 1}]}, zero, zero, zero]}


# H0 = X6 mixes two generator directions and breaks compatibility generically;
# H0 = X5 is compatible identically (both sides reduce to 16 X1 V0) and is
# reported for information only.
WITNESSES = (("X6", True), ("X5", False))


def cmd_verify(args) -> Report:
    _require_samples(args)
    form = args.form or "x"
    if form == "sub5":
        raise UsageError("use the subsystem command for five-moment closures")
    closures = load_closures(args.closure, form)
    rep = Report("verify", base_config(args))
    if args.state is not None:
        states = [load_state(args.state)]
    else:
        cfg = SamplerConfig(require_X1_nonzero=True, eps1=ETA_MIN_PPLL) if form == "eta" else SamplerConfig()
        states = random_states(args.samples, cfg, args.seed)

    for name, data in closures:
        spec = spec_of(data)
        results = parallel_map("closure", data, states, args.workers)
        for key, ref in (("galilean_h", "galilean_h"), ("galilean_phi", "galilean_phi"),
                         ("compatibility", "compatibility")):
            worst = _sweep_rows(rep, key, name, results, key)
            rep.check(key, ref, worst, worst <= args.tol_exact, closure=name, tol=args.tol_exact)
        fd = parallel_map("fd", data, states[:FD_STATES], args.workers)
        worst = _sweep_rows(rep, "fd_gradient_h", name, fd, "fd_gradient_h")
        rep.check("fd_gradient_h", "galilean_h", worst, worst <= args.tol_fd, closure=name, tol=args.tol_fd)
        if spec.form is Form.X_FORM and isinstance(data.get("family"), dict):
            _x_space_checks(rep, name, spec, args)

    ids = parallel_map("identities", None, states, args.workers)
    worst = _sweep_rows(rep, "lambda_derivatives", "", ids, "lambda_derivatives")
    rep.check("lambda_derivatives", "lambda_derivatives", worst, worst <= args.tol_exact, tol=args.tol_exact)

    for var, gating in WITNESSES:
        wit = parallel_map("closure", _witness(var), states, args.workers)
        rels = [r["compatibility"].max_rel for r in wit]
        frac = sum(r >= args.tol_witness for r in rels) / len(rels)
        rep.check("compatibility_witness", "compatibility", min(rels), frac >= 0.95, witness=f"H0 = {var}",
                  negative=True, fraction_above_floor=frac, floor=args.tol_witness, gating=gating)
    return rep


def _x_space_checks(rep: Report, name: str, spec: ClosureSpec, args) -> None:
    rng = np.random.default_rng([args.seed, 1])
    n = max(args.samples, 1)
    worst = {"x_space_system": 0.0, "solved_form_x1": 0.0, "solved_form_x2": 0.0}
    for k in range(n):
        pt = rng.uniform(-1, 1, 8)
        vals = {"x_space_system": pde_system_residual(spec.functions, pt, spec.weights).max_rel}
        for base, key in ((0, "solved_form_x1"), (1, "solved_form_x2")):
            try:
                vals[key] = derived_forms_check(spec.functions, pt, base, spec.weights).max_rel
            except SingularDenominator:
                vals[key] = 0.0
        for key, v in vals.items():
            worst[key] = max(worst[key], v)
            rep.rows.append({"check": key, "closure": name, "index": k, "max_rel": v})
    for key, v in worst.items():
        rep.check(key, key, v, v <= args.tol_exact, closure=name, tol=args.tol_exact)


# -- convexity ----------------------------------------------------------------------


def _comparison_state(args) -> MultiplierState:
    if args.state is not None:
        s = load_state(args.state)
        if not cvx.is_state_C(s):
            raise UsageError("state file is not a comparison state (isotropic, lambda_i = lambda_ill = 0)")
        return s
    return state_C(args.lam, args.lam_ll, args.lam_ppll)


def _parse_scan(items) -> dict:
    opts = {"degree": 2, "count": 50}
    for it in items or []:
        key, _, val = it.partition("=")
        if key not in opts or not val.isdigit() or int(val) < 1:
            raise UsageError(f"bad --scan-K option {it!r} (expected degree=N or count=N, N >= 1)")
        opts[key] = int(val)
    return opts


def _rel_diff(a, b) -> float:
    a, b = np.atleast_1d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float))
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def cmd_convexity(args) -> Report:
    rep = Report("convexity", base_config(args))
    rep.config["comparison_state"] = None if args.state else [args.lam, args.lam_ll, args.lam_ppll]
    verdicts = []
    if args.scan_K is not None:
        opts = _parse_scan(args.scan_K)
        rep.config["scan_K"] = opts
        rows = cvx.scan_K(opts["count"], opts["degree"], args.seed, args.lam, args.lam_ll)
        for r in rows:
            rep.rows.append({"check": "k_family_scan", **r})
        counts = {}
        for r in rows:
            counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
        rep.check("k_family_scan", "convexity_minors", 0.0, len(rows) == opts["count"],
                  verdict_counts=dict(sorted(counts.items())),
                  positive_definite=[r["index"] for r in rows if r["verdict"] == "positive-definite"])
        return rep

    s = _comparison_state(args)
    if args.reproduce_form5_failure:
        for name, data in load_closures(args.closure, "x"):
            fr = cvx.reproduce_failure(spec_of(data), s.lam, s.lam_ll, s.lam_ppll)
            v = fr.to_json()
            verdicts.append({"closure": name, **v})
            rep.rows.append({"check": "x_form_failure", "closure": name, "verdict": v["verdict"]["verdict"],
                             "counterexample_Q": v["verdict"]["counterexample_Q"], "direct_Q": v["direct_Q"]})
            q, d = fr.verdict.counterexample_Q, fr.direct_Q
            rel = 0.0 if q is None or d is None else abs(q - d) / max(abs(q), abs(d), 1e-300)
            rep.check("x_form_failure", "convexity_minors", rel, fr.reproduced and rel <= BLOCK_TOL, closure=name,
                      verdict=v["verdict"]["verdict"], counterexample_Q=q, direct_Q=d)
        rep.extra["verdicts"] = verdicts
        return rep

    for name, data in load_closures(args.closure, args.form or "eta"):
        spec = spec_of(data)
        hr = cvx.hessian(s, spec)
        b = hr.blocks
        rep.check("convexity_blocks", "convexity_blocks", max(b.cross_rel, b.isotropy_rel),
                  max(b.cross_rel, b.isotropy_rel) <= BLOCK_TOL, closure=name, tol=BLOCK_TOL)
        espec = spec if spec.form is Form.ETA_FORM else eta_form_of(spec)
        num = [b.a, b.b[0, 0], b.b[0, 1], b.b[1, 1], b.c]
        scale = max(np.abs(b.a).max(), np.abs(b.b).max(), abs(b.c), 1e-300)
        diffs = {}
        for variant in ("corrected", "printed"):
            co = cvx.coefficients_at_C(s, espec, variant)
            mine = [co.a, co.b11, co.b12, co.b22, co.c]
            diffs[variant] = max(float(np.abs(np.asarray(x) - y).max()) for x, y in zip(mine, num)) / scale
        rep.check("convexity_coefficients", "convexity_coefficients", diffs["corrected"],
                  diffs["corrected"] <= BLOCK_TOL, closure=name, tol=BLOCK_TOL)
        rep.check("convexity_coefficients_alt", "convexity_coefficients", diffs["printed"],
                  diffs["printed"] <= BLOCK_TOL, closure=name, gating=False)
        v = cvx.convexity_verdict(cvx.coefficients_at_C(s, espec))
        entry = {"closure": name, "state": s.to_json(), **v.to_json()}
        if args.limit:
            try:
                lv = cvx.limit_verdict(lambda p: cvx.coefficients_at_C(state_C(s.lam, s.lam_ll, p), espec))
                entry["limit"] = lv.to_json()
            except Et14Error as exc:
                entry["limit"] = {"error": str(exc)}
        verdicts.append(entry)
        rep.rows.append({"check": "convexity_minors", "closure": name, "verdict": v.verdict,
                         "minors": [float(m) for m in v.minors]})
        rep.check("convexity_minors", "convexity_minors", 0.0, v.positive, closure=name, verdict=v.verdict,
                  gating=False)
    rep.extra["verdicts"] = verdicts
    return rep


# -- reduce -------------------------------------------------------------------------


def _reduce_row(s: MultiplierState) -> dict:
    row = {"case": None}
    fr = frame.canonicalize(s)
    row["case"] = fr.case_tag.value
    a, b = compute_X(fr.canonical_state).as_array(), compute_X(s).as_array()
    row["frame_rel"] = float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))
    s1 = frame.extract_s1(s)
    row["hamilton_cayley_rel"] = abs(frame.hamilton_cayley_mL3m(s1) - s1.mL3m) / max(
        abs(s1.mL3m), abs(s1.mL2m) * abs(s1.lam_ll), 1e-300)
    J = frame.lambda_jacobian(s)
    dj = np.linalg.det(J)
    row["cond2_rel"] = abs(16 * np.linalg.det(frame.condition2_matrix(s)) - dj) / max(abs(dj), 1e-300)
    rt = frame.round_trip(s)
    row.update(rt.to_json())
    return row


def cmd_reduce(args) -> Report:
    _require_samples(args)
    rep = Report("reduce", base_config(args))
    if args.state is not None:
        states = [load_state(args.state)]
    else:
        states = random_states(args.samples, SamplerConfig(require_independence=True), args.seed)
    rows = parallel_map("reduce", None, states, args.workers)
    for k, r in enumerate(rows):
        rep.rows.append({"check": "round_trip", "index": k, **r})

    def worst(key):
        vals = [r[key] for r in rows if r[key] is not None]
        return max(vals) if vals else float("inf")

    rep.check("canonical_frame", "canonical_frame", worst("frame_rel"), worst("frame_rel") <= FRAME_TOL)
    rep.check("hamilton_cayley", "canonical_frame", worst("hamilton_cayley_rel"),
              worst("hamilton_cayley_rel") <= args.tol_exact)
    rep.check("cond2_jacobian", "independence", worst("cond2_rel"), worst("cond2_rel") <= args.tol_exact)
    rep.check("s1_round_trip", "representation", worst("s1_rel"), worst("s1_rel") <= ROUND_TRIP_TOL)
    fast = sum(r["iterations"] is not None and r["iterations"] <= NEWTON_MAX_ITERS for r in rows) / len(rows)
    rep.check("newton_convergence", "representation", 1.0 - fast, fast >= NEWTON_FRACTION, fraction=fast)
    bundle = [r["bundle_rel"] for r in rows if r["bundle_rel"] is not None]
    frac = sum(b <= ROUND_TRIP_TOL for b in bundle) / len(rows)
    rep.check("bundle_round_trip", "representation", max(bundle, default=float("inf")),
              frac == 1.0, fraction=frac, gating=False)
    return rep


# -- subsystem ----------------------------------------------------------------------


def cmd_subsystem(args) -> Report:
    _require_samples(args)
    rep = Report("subsystem", base_config(args))
    rng = np.random.default_rng([args.seed, 5])
    for name, data in load_closures(args.closure, "sub5"):
        spec = spec_of(data)
        worst_g = worst_c = 0.0
        for k in range(args.samples):
            s5 = (rng.uniform(-1, 1), rng.uniform(-1, 1, 3), rng.uniform(-1, 1))
            r = subsystem_residual(s5, spec)
            g = max(r.h_residual.max_rel, r.phi_residual.max_rel)
            c = r.compatibility.max_rel
            worst_g, worst_c = max(worst_g, g), max(worst_c, c)
            rep.rows.append({"check": "subsystem", "closure": name, "index": k, "galilean_rel": g,
                             "compatibility_rel": c})
        rep.check("subsystem_galilean", "subsystem_galilean", worst_g, worst_g <= args.tol_exact, closure=name)
        rep.check("subsystem_compatibility", "compatibility", worst_c, worst_c <= args.tol_exact, closure=name)
    family = spec_of(load_json(bundled_path(BUNDLED["x"][0])))
    facts = noncommutativity_demo(args.seed, max(args.samples, 1), spec=family)
    for f in facts:
        val = np.asarray(f.value, dtype=float)
        if f.name == "restricted_eta5_bracket":
            dev = float(np.abs(val - 16 * np.asarray(f.witness["lambda_i"])).max())
            rep.check(f.name, "restricted_state", dev, f.passed, value=f.value)
        elif f.name == "restricted_w_bracket":
            rep.check(f.name, "restricted_state", float(np.linalg.norm(val)), f.passed, value=f.value,
                      negative=True)
        else:
            rep.check(f.name, "restricted_state", float(np.abs(val).max()), f.passed, value=f.value)
    rep.extra["facts"] = [f.to_json() for f in facts]
    return rep


# -- entry point --------------------------------------------------------------------


COMMANDS = {"verify": cmd_verify, "convexity": cmd_convexity, "reduce": cmd_reduce, "subsystem": cmd_subsystem}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=100)
    common.add_argument("--form", choices=["x", "eta", "sub5"], default=None)
    common.add_argument("--closure", default=None, help="closure JSON file (default: bundled set)")
    common.add_argument("--state", default=None, help="state JSON file (replaces sampling)")
    common.add_argument("--out", default=None, help="output directory (default: summary to stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--tol-exact", type=float, default=TOL_EXACT)
    common.add_argument("--tol-fd", type=float, default=TOL_FD)
    common.add_argument("--tol-witness", type=float, default=TOL_WITNESS)
    common.add_argument("--workers", type=int, default=1)

    p = _Parser(prog="et14", description="Verify exact 14-moment closures numerically.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("verify", parents=[common], help="Galilean, compatibility and derivative identities")
    c = sub.add_parser("convexity", parents=[common], help="Hessian blocks and convexity verdicts")
    c.add_argument("--reproduce-form5-failure", action="store_true",
                   help="show that x-form closures are indefinite at the comparison state")
    c.add_argument("--scan-K", nargs="*", default=None, metavar="KEY=N",
                   help="scan random eta-form families (degree=2 count=50)")
    c.add_argument("--limit", action="store_true", help="also extrapolate the minors to lambda_ppll -> 0+")
    c.add_argument("--lam", type=float, default=DEFAULT_C[0])
    c.add_argument("--lam-ll", type=float, default=DEFAULT_C[1])
    c.add_argument("--lam-ppll", type=float, default=DEFAULT_C[2])
    sub.add_parser("reduce", parents=[common], help="canonical frame and reconstruction round trips")
    sub.add_parser("subsystem", parents=[common], help="five-moment closure and restricted-state facts")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("et14: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        rep = COMMANDS[args.command](args)
        write_outputs(rep, args.out, args.format)
    except UsageError as exc:
        print(f"et14: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Et14Error as exc:
        print(f"et14: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not rep.passed:
        failed = [c["name"] for c in rep.checks if not c["pass"] and c.get("gating", True)]
        print(f"et14: failed checks: {', '.join(dict.fromkeys(failed))}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
