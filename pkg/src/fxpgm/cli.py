"""Command-line front end.

Exit codes: 0 success, 1 certification FAIL or guarantee violation,
2 input error, 3 overflow.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import mpc
from .certify import (BoundQuery, Which, bisect_bound, make_backend, save_witness,
                      validate_integer_bits)
from .certify.example import ExampleParams, program, run_assertion_example
from .errors import (BackendInconclusive, FxOverflow, FxpgmError, PreconditionViolated,
                     SearchSpaceTooLarge)
from .fixedpoint import FxFormat, RoundingMode, fx_exact
from .guarantee import Certificate, assemble_certificate, bound_D, min_eps
from .pgm import ExitReason, pgm_fixed, solve_reference, to_fixed
from .qp import f_value, family_constants, load_problem, save_problem, step_size
from .rational import dec_str, frac_str, to_fraction

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_OVERFLOW = 0, 1, 2, 3


class InputError(Exception):
    pass


def _fmt(text: str) -> FxFormat:
    try:
        return FxFormat.parse(text)
    except ValueError:
        p, q = text.split(".")
        return FxFormat(int(p), int(q))


def _vec(text: str | None):
    if text is None:
        return None
    return [to_fraction(t) for t in text.split(",")]


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- mpc-build -------------------------------------------------------------

def _matrix(v, n: int) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    return a * np.eye(n) if a.ndim == 0 else a


def _model_from_config(cfg: dict):
    if cfg.get("preset") == "three_mass_spring":
        cs = mpc.CASE_STUDY
        scale = to_fraction(cfg.get("objective_scale", cs["objective_scale"]))
        model, params = mpc.case_study(cfg.get("ts"), cfg.get("method"), cfg.get("walls"), scale)
        for key in ("N_p", "N_c"):
            if key in cfg:
                setattr(params, key, int(cfg[key]))
        return model, params
    if "A" not in cfg or "B" not in cfg:
        raise InputError("config needs either preset = three_mass_spring or A and B")
    model = mpc.LtiModel(cfg["A"], cfg["B"])
    nx, nu = model.n_x, model.n_u
    u_max = cfg.get("u_max", [1.0] * nu)
    u_min = cfg.get("u_min", [-v for v in u_max])
    P = cfg.get("P")
    params = mpc.MpcParams(
        N_p=int(cfg["N_p"]), N_c=int(cfg["N_c"]), W_x=_matrix(cfg.get("W_x", 1.0), nx),
        W_u=_matrix(cfg.get("W_u", 1.0), nu), u_min=u_min, u_max=u_max,
        P=None if P is None else _matrix(P, nx),
        state_box=tuple(cfg["state_box"]) if "state_box" in cfg else None,
        ref_box=tuple(cfg["ref_box"]) if "ref_box" in cfg else None,
        objective_scale=to_fraction(cfg.get("objective_scale", 1)))
    return model, params


def cmd_mpc_build(args) -> int:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"config file {path} not found")
        cfg = json.loads(path.read_text())
    else:
        cfg = {"preset": "three_mass_spring"}
    fmt = _fmt(args.format or cfg.get("format", "10.21"))
    dfmt = _fmt(args.data_format or cfg.get("data_format", str(fmt)))
    model, params = _model_from_config(cfg)
    fam, _ = mpc.build_family(model, params, dfmt)
    L, sigma = family_constants(fam)
    out = _out(args)
    save_problem(out / "problem.json", fam, fmt, RoundingMode(args.rounding))
    print(f"wrote {out / 'problem.json'}: n = {fam.n}, format {fmt}, data format {dfmt}")
    print(f"L = {float(L):.6f}, sigma = {float(sigma):.6f}")
    if cfg.get("preset") == "three_mass_spring":
        match = (round(float(L), 4) == float(mpc.REPORTED_L)
                 and round(float(sigma), 4) == float(mpc.REPORTED_SIGMA))
        print(f"reported case-study values: L = {float(mpc.REPORTED_L)}, sigma = {float(mpc.REPORTED_SIGMA)} "
              f"({'match' if match else 'no match'} at 4 decimals)")
    return EXIT_OK


# -- certify ---------------------------------------------------------------

def _table(rows: list[dict], total: float) -> str:
    head = ["Bound b", "Value", "b^2 init", "Tol.", "# P/F", "Av. PASS [s]", "Av. FAIL [s]",
            "Total [s]", "Backend"]
    lines = [" | ".join(head)]
    for r in rows:
        lines.append(" | ".join([r["bound"], r["value"], r["init"], r["tol"], r["pf"], r["avg_pass"],
                                 r["avg_fail"], r["total"], r["backend"]]))
    lines.append(f"Total time [s]: {total:.3f}")
    return "\n".join(lines)


def _row(name: str, res, stats_times: dict) -> dict:
    st = res.stats
    return {"bound": name, "value": dec_str(res.bound, 4), "init": dec_str(st.init, 3),
            "tol": f"{float(st.tol):.0e}", "pf": st.pf,
            "avg_pass": f"{stats_times['pass']:.3f}", "avg_fail": f"{stats_times['fail']:.3f}",
            "total": f"{st.total_time:.3f}", "backend": ",".join(sorted(st.backends)) + ("" if res.tight else " (non-tight)")}


class _TimedBackend:
    """Wraps a backend to record per-verdict durations."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.times = {"PASS": [], "FAIL": [], "UNKNOWN": []}

    def check(self, query):
        t0 = time.perf_counter()
        v = self.inner.check(query)
        self.times[v.kind.value].append(time.perf_counter() - t0)
        return v

    def averages(self) -> dict:
        avg = {k: (sum(v) / len(v) if v else 0.0) for k, v in self.times.items()}
        out = {"pass": avg["PASS"], "fail": avg["FAIL"]}
        for v in self.times.values():
            v.clear()
        return out


def cmd_certify(args) -> int:
    t_start = time.perf_counter()
    path = Path(args.problem)
    if not path.exists():
        raise InputError(f"problem file {path} not found")
    fam, fmt, mode = load_problem(path)
    if args.format:
        fmt = _fmt(args.format)
    if args.rounding:
        mode = RoundingMode(args.rounding)
    out = _out(args)
    L, sigma = family_constants(fam)
    tau = step_size(L, fmt)
    eps_hat = to_fraction(args.eps_hat) if args.eps_hat else fmt.ulp
    inner = make_backend(args.backend, cap=args.cap, seed=args.seed, samples=args.samples,
                         workers=args.workers)
    backend = _TimedBackend(inner)
    rows, provenance = [], {}
    print(f"family n = {fam.n}, format {fmt}, rounding {mode.value}, backend {inner.name}")
    print(f"L = {dec_str(L)}, sigma = {dec_str(sigma)}, tau = {frac_str(tau)}, eps_hat = {frac_str(eps_hat)}")

    ov = validate_integer_bits(fam, fmt, tau, eps_hat, inner, mode)
    provenance["overflow"] = {"verdict": ov.kind.value, "backend": ov.backend}
    if ov.failed:
        if ov.witness is not None:
            save_witness(out / "overflow_witness.json", ov.witness, fam.data_fmt)
        print(f"overflow check FAIL ({ov.detail}); increase p")
        return EXIT_OVERFLOW
    print(f"overflow check: {ov.kind.value} ({ov.backend})")

    def run(which: Which, name: str, init, tol, lo=Fraction(0)):
        q = BoundQuery(which, 0, fam, fmt, tau, eps_hat if which.needs_eps_hat else None, mode)
        res = bisect_bound(q, lo, init, tol, backend)
        rows.append(_row(name, res, backend.averages()))
        provenance[name] = {"backend": sorted(res.stats.backends), "pass": res.stats.n_pass,
                            "fail": res.stats.n_fail, "unknown": res.stats.n_unknown,
                            "tight": res.tight, "b_pass": frac_str(res.b_pass),
                            "b_fail": None if res.b_fail is None else frac_str(res.b_fail),
                            "init": frac_str(res.stats.init), "tol": frac_str(res.stats.tol)}
        if res.witness is not None:
            save_witness(out / f"witness_{name}.json", res.witness, fam.data_fmt)
        return res

    two_q = Fraction(1, 4 ** fmt.q)
    Om = run(Which.OMEGA_SQ, "Omega", two_q, to_fraction(args.tol_omega))
    Omega = Om.bound
    results = {"Omega": Omega}
    if args.only != "omega":
        eps_init = max(min_eps(tau, sigma, Omega) ** 2, two_q)
        Ep = run(Which.ASSUMPTION, "eps", eps_init, to_fraction(args.tol_eps))
        De = run(Which.DELTA_SQ, "delta", fmt.ulp, to_fraction(args.tol_delta))
        Th = run(Which.THETA_SQ, "Theta", max(De.b_pass, two_q), to_fraction(args.tol_theta))
        results.update(eps=Ep.bound, delta=De.bound, Theta=Th.bound)
        omega = None
        if args.compute_omega:
            omega = run(Which.OMEGA_SMALL_SQ, "omega", two_q, to_fraction(args.tol_omega)).bound
    report = _table(rows, time.perf_counter() - t_start)
    (out / "report.txt").write_text(report + "\n")
    print(report)
    if args.only == "omega":
        print("Omega-only mode: no certificate assembled")
        return EXIT_OK

    x0 = _vec(args.x0) or [Fraction(0)] * fam.n
    inferred = args.x0 is None
    if len(x0) != fam.n or any(v < lo or v > hi for v, lo, hi in zip(x0, fam.l_min, fam.u_max)):
        raise InputError("--x0 must be a point of the feasible box")
    D = bound_D(fam, [x0])
    notes = ["finite Q set only", f"start set {{{','.join(frac_str(v) for v in x0)}}}"]
    if inferred:
        notes.append("D inferred from the default start set")
    try:
        cert = assemble_certificate(
            fmt=fmt, rounding=mode, tau=tau, L=L, sigma=sigma, Omega=Omega, eps=results["eps"],
            eps_hat=eps_hat, delta=results["delta"], Theta=results["Theta"], omega=omega, D=D,
            D_inferred=inferred, provenance=provenance, notes=notes)
    except PreconditionViolated as exc:
        print(f"certificate refused: {exc}")
        return EXIT_FAIL
    cert.save(out / "certificate.json")
    (out / "timings.json").write_text(json.dumps({"total_s": time.perf_counter() - t_start}) + "\n")
    print(f"C = {dec_str(cert.C)}, k_max = {cert.k_max}, exact-arithmetic k = {cert.k_exact}")
    print(f"exit mode: dist <= {dec_str(cert.dist_exit)}, fgap <= {dec_str(cert.fgap_exit)}")
    print(f"k_max mode: dist <= {dec_str(cert.dist_kmax)}, fgap <= {dec_str(cert.fgap_kmax)}")
    return EXIT_OK


# -- solve -----------------------------------------------------------------

def cmd_solve(args) -> int:
    for p in (args.problem, args.certificate):
        if not Path(p).exists():
            raise InputError(f"file {p} not found")
    fam, fmt, mode = load_problem(args.problem)
    cert = Certificate.load(args.certificate)
    fmt, mode = cert.fmt, cert.rounding
    c = _vec(args.c) or list(fam.c_min)
    l, u = list(fam.l_min), list(fam.u_max)
    qp = fam.realization(args.q_index, c, l, u)
    x0 = _vec(args.x0) or [Fraction(0)] * fam.n
    k_max = args.kmax if args.kmax is not None else cert.k_max
    fp = to_fixed(qp, fmt, cert.tau, mode)
    trace = pgm_fixed(fp, [fx_exact(v, fmt) for v in x0], cert.eps_hat, k_max)
    out = _out(args)
    trace.to_csv(out / "trace.csv")
    ref = solve_reference(qp)
    x = trace.output_values
    dist = sum((a - b) ** 2 for a, b in zip(x, ref.x))
    gap = f_value(qp, x) - ref.f
    if trace.exit_reason is ExitReason.TOLERANCE:
        dmax, gmax = cert.dist_exit, cert.fgap_exit
    else:
        dmax, gmax = cert.dist_kmax, cert.fgap_kmax
    ok = dist <= dmax * dmax and gap <= gmax
    summary = {"exit": trace.exit_reason.value, "k": trace.k, "dist_sq": frac_str(dist),
               "dist_bound": frac_str(dmax), "fgap": frac_str(gap), "fgap_bound": frac_str(gmax),
               "within_certificate": ok}
    (out / "solve.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{trace.exit_reason.value} after {trace.k} iterations")
    print(f"||x - x*|| = {float(dist) ** 0.5:.6e} (bound {dec_str(dmax)}), "
          f"f - f* = {dec_str(gap)} (bound {dec_str(gmax)})")
    print("within certificate" if ok else "VIOLATION of the certified bounds")
    return EXIT_OK if ok else EXIT_FAIL


# -- assertion example ------------------------------------------------------

def cmd_assertion_example(args) -> int:
    t0 = time.perf_counter()
    params = ExampleParams()
    v = run_assertion_example(params)
    s = v.stats
    w = s["witness"]
    err_r, _ = program(w, params)
    print(f"tight bound        {frac_str(s['tight'])} = {float(s['tight'])!r}")
    print(f"theoretical bound  {frac_str(s['theoretical'])} = {float(s['theoretical'])!r}")
    print(f"improvement        {float(s['improvement']) * 100:.2f}%")
    print(f"witness            a_i = {w[0]} for all {params.m} elements; replayed err(r) = {frac_str(err_r)}")
    print(f"verdict at chi = {params.chi}: {v.kind.value}")
    print(f"time               {time.perf_counter() - t0:.3f} s")
    return EXIT_OK if err_r == s["tight"] and v.passed else EXIT_FAIL


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fxpgm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt_default=None):
        p.add_argument("--format", default=fmt_default, help="solver format p.q")
        p.add_argument("--rounding", choices=[m.value for m in RoundingMode])
        p.add_argument("--out", default="out")

    p = sub.add_parser("mpc-build", help="build a condensed MPC problem file")
    p.add_argument("--config")
    p.add_argument("--data-format")
    common(p)
    p.set_defaults(func=cmd_mpc_build, rounding=RoundingMode.FLOOR.value)

    p = sub.add_parser("certify", help="certify one fixed-point PGM step and assemble a certificate")
    p.add_argument("problem")
    common(p)
    p.add_argument("--backend", choices=["exhaustive", "falsify", "analytic"], default="exhaustive")
    p.add_argument("--cap", type=int, default=200_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--eps-hat")
    p.add_argument("--x0", help="comma-separated start point used for D")
    p.add_argument("--tol-omega", default="1e-14")
    p.add_argument("--tol-eps", default="1e-9")
    p.add_argument("--tol-delta", default="1e-9")
    p.add_argument("--tol-theta", default="1e-9")
    p.add_argument("--only", choices=["omega"])
    p.add_argument("--compute-omega", action="store_true", help="bound omega separately instead of using Omega")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("solve", help="run fixed-point PGM and compare against the certificate")
    p.add_argument("problem")
    p.add_argument("certificate")
    p.add_argument("--c", help="comma-separated linear term (default c_min)")
    p.add_argument("--q-index", type=int, default=0)
    p.add_argument("--x0")
    p.add_argument("--kmax", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("example6", aliases=["assertion-example"], help="exact squared-norm assertion example")
    p.set_defaults(func=cmd_assertion_example)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FxOverflow as exc:
        print(f"overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (InputError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError,
            SearchSpaceTooLarge) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendInconclusive as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except FxpgmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
