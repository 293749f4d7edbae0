"""Command-line front end.

    bnreduce {robin,green,phi,crit,sweep,verify,pohozaev,report}
             [--config PATH] [--out DIR] [--threads K] [--tol NAME=VALUE ...]

Exit codes: 0 all checks passed, 2 some check failed, 3 configuration
error, 4 numerical failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from .config import apply_overrides, load_config
from .errors import BNReduceError, ConfigError, NoConvergence
from .green import Ball, BallGreen, Generic, MFSGreen, omega
from .radial import epsilon_for_height, sweep as run_sweep
from .reduced import (Config, ProblemParams, find_critical, grad_phi_flat,
                      hessian_phi, interaction_matrix, lowest_eigenpair, phi,
                      single_peak_lambda, unique_lambda)
from .storage import (Manifest, load_dataset, read_manifest, save_dataset,
                      write_json, write_table)

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4


def params_from(cfg):
    p = cfg["problem"]
    return ProblemParams(p["N"], float(p["q"]), float(p["eps"]))


def provider_from(cfg):
    N = cfg["problem"]["N"]
    d = cfg["domain"]
    center = np.zeros(N) if d["center"] is None else np.asarray(d["center"], dtype=float)
    if d["kind"] == "ball":
        return BallGreen(Ball(center=center, radius=d["radius"]))
    if d["shape"] == "sphere":
        dom = Generic.sphere(N, d["points"], center=center, radius=d["radius"])
    else:
        dom = Generic.ellipsoid(d["semi_axes"], d["points"], center=center)
    return MFSGreen(dom, offset_factor=d["offset_factor"], tol=d["provider_tol"])


def _center(provider):
    dom = provider.domain
    if isinstance(dom, Ball):
        return np.asarray(dom.center)
    return dom.boundary_points.mean(axis=0)


def _unit(v, N):
    if v is None:
        v = np.eye(N)[0]
    v = np.asarray(v, dtype=float)
    if v.shape != (N,) or not np.any(v):
        raise ConfigError("direction must be a nonzero vector of length N", "robin.direction")
    return v / np.linalg.norm(v)


def _out(cfg):
    d = Path(cfg["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# ----------------------------------------------------------------------------
# commands; each fills a Manifest and returns it


def cmd_robin(cfg, man):
    N = cfg["problem"]["N"]
    tol = cfg["tolerances"]
    with man.stage("build"):
        prov = provider_from(cfg)
    if isinstance(prov, MFSGreen):
        man.check("provider_boundary_residual", prov.boundary_residual,
                  cfg["domain"]["provider_tol"], prov.boundary_residual <= cfg["domain"]["provider_tol"])
    c = _center(prov)
    e = _unit(cfg["robin"]["direction"], N)
    exit_t = float(prov.domain.ray_exit(c, e[None, :])[0])
    ds = np.geomspace(exit_t, cfg["robin"]["d_min"], cfg["robin"]["count"])[1:]
    rows = []
    with man.stage("evaluate"):
        g0 = prov.grad_robin(c)
        rows.append([exit_t, 0.0, float(prov.robin(c)), float(np.linalg.norm(g0)), float("nan")])
        for d in ds:
            x = c + (exit_t - d) * e
            R = float(prov.robin(x))
            ratio = R * (N - 2) * omega(N) * (2 * d) ** (N - 2)
            rows.append([float(d), float(exit_t - d), R, float(np.linalg.norm(prov.grad_robin(x))), ratio])
    path = _out(cfg) / "robin.csv"
    write_table(path, ["d", "t", "robin", "grad_norm", "boundary_ratio"], rows)
    man.output(path)
    if isinstance(prov, BallGreen):
        man.check("grad_robin_center", rows[0][3], 1e-12, rows[0][3] <= 1e-12,
                  "Robin function is critical at the centre of a ball")
    ratios = np.array([r[4] for r in rows[1:]])
    last = float(abs(ratios[-1] - 1.0))
    man.check("robin_boundary_ratio", last, tol["robin_ratio"], last <= tol["robin_ratio"],
              "R(x)(N-2)omega_N(2d)^(N-2) -> 1 as d -> 0")
    trend = bool(np.all(np.diff(np.abs(ratios[-4:] - 1.0)) < 0))
    man.check("robin_ratio_trend", trend, True, trend)


def cmd_green(cfg, man):
    N = cfg["problem"]["N"]
    with man.stage("build"):
        prov = provider_from(cfg)
    c = _center(prov)
    x = c if cfg["green"]["x"] is None else np.asarray(cfg["green"]["x"], dtype=float)
    e = _unit(None, N)
    exit_t = float(prov.domain.ray_exit(x, e[None, :])[0])
    ts = np.linspace(0, exit_t, cfg["green"]["count"] + 2)[1:-1]
    rows, ok, sym = [], True, 0.0
    with man.stage("evaluate"):
        for t in ts:
            y = x + t * e
            S, H, G = prov.singular(x, y), prov.regular_part(x, y), prov.green(x, y)
            ok = ok and 0 < G < S
            sym = max(sym, abs(G - prov.green(y, x)) / G)
            rows.append([float(t), float(S), float(H), float(G)])
    path = _out(cfg) / "green.csv"
    write_table(path, ["t", "S", "H", "G"], rows)
    man.output(path)
    man.check("green_bounds", ok, True, ok, "0 < G < S inside the domain")
    stol = 1e-8 if isinstance(prov, BallGreen) else cfg["domain"]["provider_tol"]
    man.check("green_symmetry", sym, stol, sym <= stol)


def _phi_config(cfg, prov):
    N = cfg["problem"]["N"]
    pts = cfg["phi"]["points"]
    pts = [list(_center(prov))] if pts is None else pts
    lams = cfg["phi"]["lambdas"]
    lams = [1.0] * len(pts) if lams is None else lams
    if len(lams) != len(pts) or any(len(p) != N for p in pts):
        raise ConfigError("phi points and lambdas do not match", "phi.points")
    return Config(pts, lams)


def cmd_phi(cfg, man):
    params = params_from(cfg)
    with man.stage("build"):
        prov = provider_from(cfg)
    conf = _phi_config(cfg, prov)
    with man.stage("evaluate"):
        val = phi(prov, params, conf)
        g = grad_phi_flat(prov, params, conf)
        H = hessian_phi(prov, params, conf)
        M = interaction_matrix(prov, conf.points)
        z = conf.flat()
        n, N = conf.points.shape
        fd = np.empty_like(z)
        for k in range(len(z)):
            h = 1e-5 * max(1.0, abs(z[k]))
            zp, zm = z.copy(), z.copy()
            zp[k] += h
            zm[k] -= h
            fd[k] = (phi(prov, params, Config.from_flat(zp, n, N))
                     - phi(prov, params, Config.from_flat(zm, n, N))) / (2 * h)
    err = float(np.max(np.abs(fd - g)) / max(np.max(np.abs(g)), 1e-300))
    try:
        spec = lowest_eigenpair(M)
        spec_d = {"rho": spec.rho, "Lambda": spec.Lambda, "positive_definite": spec.positive_definite}
    except BNReduceError as exc:
        spec_d = {"error": str(exc)}
    path = _out(cfg) / "phi.json"
    write_json(path, {"points": conf.points, "lambdas": conf.lambdas, "phi": val, "grad": g,
                      "hessian_eigenvalues": np.linalg.eigvalsh(H), "M": M, "spectrum": spec_d})
    man.output(path)
    man.check("grad_vs_fd", err, 1e-6, err <= 1e-6)


def cmd_crit(cfg, man):
    params = params_from(cfg)
    N = params.N
    cc = cfg["crit"]
    with man.stage("build"):
        prov = provider_from(cfg)
    c = _center(prov)
    R0 = float(prov.robin(c))
    lam_s = single_peak_lambda(params, R0)
    rng = np.random.default_rng(cc["seed"])
    scale = cc["radius"] * prov.domain.diameter / 2.0
    found, failures = [], {}
    with man.stage("search"):
        for _ in range(cc["starts"]):
            x0 = []
            while len(x0) < cc["n"]:
                v = rng.normal(size=N)
                x0.append(c + scale * rng.uniform() ** (1.0 / N) * v / np.linalg.norm(v))
            lam0 = lam_s * rng.uniform(0.5, 2.0, cc["n"])
            try:
                cp = find_critical(prov, params, np.array(x0), lam0, gtol=cfg["tolerances"]["crit_gtol"])
            except NoConvergence as exc:
                failures[type(exc).__name__] = failures.get(type(exc).__name__, 0) + 1
                continue
            found.append(cp)
    uniq = []
    for cp in found:
        if not any(np.allclose(np.sort(cp.config.flat()), np.sort(u.config.flat()), atol=1e-6) for u in uniq):
            uniq.append(cp)
    rep = []
    for cp in uniq:
        item = {"points": cp.config.points, "lambdas": cp.config.lambdas, "grad_norm": cp.grad_norm,
                "hessian_eigenvalues": cp.hessian_eigenvalues, "nondegenerate": cp.nondegenerate,
                "rho": cp.rho}
        if params.q >= params.two_star - 1:
            try:
                item["unique_lambda"] = unique_lambda(prov, params, cp.config.points)
            except BNReduceError as exc:
                item["unique_lambda"] = str(exc)
        rep.append(item)
    path = _out(cfg) / "crit.json"
    write_json(path, {"n": cc["n"], "starts": cc["starts"], "critical_points": rep,
                      "failures": failures, "single_peak_lambda": lam_s})
    man.output(path)
    rho_ok = all(cp.rho >= -1e-8 for cp in uniq)
    man.check("rho_nonnegative", min([cp.rho for cp in uniq], default=0.0), -1e-8, rho_ok,
              "M is nonnegative at critical points")
    if cc["n"] == 1:
        ok = len(uniq) >= 1 and all(np.linalg.norm(cp.config.points[0] - c) < 1e-8 for cp in uniq)
        if isinstance(prov, BallGreen):
            man.check("single_peak_at_center", len(uniq), 1, ok and len(uniq) == 1)
    else:
        man.check("no_multi_peak_critical_points", len(uniq), 0, len(uniq) == 0,
                  "no critical points of Phi_n, n >= 2, on convex domains")


def cmd_sweep(cfg, man):
    params = params_from(cfg)
    sw = cfg["sweep"]
    tol = cfg["tolerances"]
    out = _out(cfg)
    if sw["clamp_eps_zero"]:
        with man.stage("shoot"):
            epsilon_for_height(params, sw["M_min"], eps_bounds=(0.0, 0.0))
    Ms = np.geomspace(sw["M_min"], sw["M_max"], sw["count"])
    with man.stage("shoot"):
        entries = run_sweep(params, Ms, threads=cfg["threads"], rtol=tol["shot_rtol"])
    index = save_dataset(out, params, entries)
    man.output(out / "index.json")
    good = sum(e.profile is not None for e in entries)
    for e in entries:
        if e.error:
            man.note(f"M={e.M:.6g}: {e.error}")
    man.check("survivors", good, 5, good >= 5)
    return index


def _fit_last(tol):
    return int(tol["fit_last"])


def verify_dataset(index, profiles, cfg):
    """All sweep checks; returns (results dict, list of checks).  Depends
    only on the persisted data, so repeated runs agree exactly."""
    tol = cfg["tolerances"]
    if len(profiles) < 5:
        from .errors import InsufficientData
        raise InsufficientData("fewer than 5 accepted profiles")
    params = profiles[0].params.with_eps(0.0)
    N = params.N
    prov = BallGreen(Ball.unit(N))
    eps = np.array([p.eps for p in profiles])
    lb = np.array([p.lam_bubble for p in profiles])
    M = np.array([p.M for p in profiles])
    dec = [asy.extract_bubble(p, "projection") for p in profiles]
    lproj = np.array([d.lam for d in dec])
    w = np.array([d.w_norm_h1 for d in dec])
    last = _fit_last(tol)
    checks = []

    def check(name, value, tolerance, passed, claim=""):
        checks.append((name, value, tolerance, bool(passed), claim))

    rate = asy.verify_blowup_rate(params, eps, lb, last)
    check("rate_exponent", rate.exponent, [rate.expected_exponent, tol["rate_exponent"]],
          abs(rate.exponent - rate.expected_exponent) <= tol["rate_exponent"],
          "eps lam^((N-2)q/2-2) tends to a positive limit")
    cgap = abs(rate.constant / rate.expected_constant - 1.0)
    check("rate_constant", cgap, tol["rate_constant"], cgap <= tol["rate_constant"])
    wfit = asy.verify_w_decay(params, lproj, w, last)
    wtol = tol["w_exponent"] if tol["w_exponent"] is not None else 0.1 * abs(wfit.expected_exponent)
    check("w_exponent", wfit.exponent, [wfit.expected_exponent, wtol],
          abs(wfit.exponent - wfit.expected_exponent) <= wtol, "remainder decay law")
    # the first shots have lam of order one, where the bubble does not fit
    # inside the ball yet; monotone decay is checked on the fitted tail
    tail = w[-last:]
    dec_ok = bool(np.all(np.diff(tail) < 0) and w[-1] == w.min())
    check("w_norm_decreasing", w[-1] / w.max(), None, dec_ok, "||w|| -> 0 along the sweep")
    sel = M >= tol["projection_min_M"]
    pgap = float(np.max(np.abs(lproj[sel] / lb[sel] - 1.0))) if np.any(sel) else 0.0
    check("projection_lambda", pgap, tol["projection_lambda"], pgap <= tol["projection_lambda"])
    glob = [asy.pohozaev_global(p).relative_residual for p in profiles]
    check("pohozaev_global", max(glob), tol["pohozaev"], max(glob) <= tol["pohozaev"])
    for rho in cfg["pohozaev"]["rho"]:
        loc = [asy.pohozaev_local(p, rho).relative_residual for p in profiles]
        check(f"pohozaev_local_{rho:g}", max(loc), tol["pohozaev"], max(loc) <= tol["pohozaev"])
    gl = [asy.green_limit_check(p, prov, radii=(0.7,))[0]["gap"] for p in profiles]
    check("green_limit", gl[-1], tol["green_limit"], gl[-1] <= tol["green_limit"],
          "lam^((N-2)/2) u -> A G(0, .) away from the peak")
    check("green_limit_trend", gl[0] > gl[-1], True, gl[0] > gl[-1])
    sand = [asy.sandwich_check(p) for p in profiles]
    stab = asy.sandwich_stability(sand)
    check("sandwich", max(stab["C0_spread"], stab["C1_spread"]), tol["sandwich_spread"],
          all(s["ok"] for s in sand) and stab["ok"])
    lam_star = single_peak_lambda(params, float(prov.robin(np.zeros(N))))
    conc = asy.verify_concentration(params, eps, lb, lam_star)
    half = np.array(conc["ratio"][len(profiles) // 2:])
    spread = float(half.max() / half.min())
    check("concentration_ratio_bounded", spread, 10.0, spread <= 10.0)
    if params.q >= params.two_star - 1:
        ul = float(unique_lambda(prov, params, np.zeros((1, N)))[0])
        d = abs(ul / lam_star - 1.0)
        check("unique_lambda_consistency", d, 1e-10, d <= 1e-10)
    results = {
        "rate": vars(rate) | {"span_ok": rate.span_ok},
        "w_decay": vars(wfit) | {"span_ok": wfit.span_ok},
        "lambda_bubble": lb, "lambda_peak": [p.lam_peak for p in profiles],
        "lambda_projection": lproj, "w_norm": w, "eps": eps, "M": M,
        "green_limit_gap": gl, "sandwich": sand, "concentration": conc,
        "pohozaev_global": glob,
    }
    return results, checks


def cmd_verify(cfg, man, data=None):
    data = Path(data or cfg["output_dir"])
    with man.stage("load"):
        index, profiles = load_dataset(data)
    with man.stage("verify"):
        results, checks = verify_dataset(index, profiles, cfg)
    path = _out(cfg) / "verify.json"
    write_json(path, {"results": results,
                      "checks": [dict(zip(("name", "value", "tolerance", "passed", "claim"), c))
                                 for c in checks]})
    man.output(path)
    for c in checks:
        man.check(*c)


def cmd_pohozaev(cfg, man, data=None):
    data = Path(data or cfg["output_dir"])
    with man.stage("load"):
        index, profiles = load_dataset(data)
    rows = []
    tol = cfg["tolerances"]["pohozaev"]
    with man.stage("evaluate"):
        for i, p in enumerate(profiles):
            reps = [asy.pohozaev_local(p, r) for r in cfg["pohozaev"]["rho"]]
            reps.append(asy.pohozaev_global(p))
            for r in reps:
                rows.append([i, float(p.M), float(p.eps), float(r.rho), r.lhs, r.rhs, r.relative_residual])
    path = _out(cfg) / "pohozaev.csv"
    write_table(path, POHOZAEV_HEADER, rows)
    man.output(path)
    worst = max(r[-1] for r in rows)
    man.check("pohozaev_all", worst, tol, worst <= tol)


POHOZAEV_HEADER = ["index", "M", "eps", "rho", "lhs", "rhs", "relative_residual"]


def cmd_report(cfg, man):
    out = _out(cfg)
    entries = read_manifest(out)
    lines = [f"{len(entries)} manifest entries in {out}"]
    for e in entries:
        lines.append(f"[{'PASS' if e.get('passed') else 'FAIL'}] {e['command']}")
        for c in e["checks"]:
            lines.append(f"    {'ok ' if c['passed'] else 'BAD'} {c['name']}: {c['value']} (tol {c['tolerance']})")
        for n in e.get("notes", []):
            lines.append(f"    note: {n}")
    text = "\n".join(lines) + "\n"
    path = out / "report.txt"
    path.write_text(text)
    man.output(path)
    print(text, end="")


COMMANDS = {"robin": cmd_robin, "green": cmd_green, "phi": cmd_phi, "crit": cmd_crit,
            "sweep": cmd_sweep, "verify": cmd_verify, "pohozaev": cmd_pohozaev,
            "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="bnreduce", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--out")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
        if name in ("verify", "pohozaev"):
            sp.add_argument("--data", type=Path, help="dataset directory (default: output dir)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, out=args.out, threads=args.threads, tols=args.tol)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    man = Manifest(args.command, cfg)
    fn = COMMANDS[args.command]
    try:
        if args.command in ("verify", "pohozaev"):
            fn(cfg, man, data=args.data)
        else:
            fn(cfg, man)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: missing input {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except BNReduceError as exc:
        man.note(f"{type(exc).__name__}: {exc}")
        man.check("numerical", type(exc).__name__, None, False)
        man.append_to(cfg["output_dir"])
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    man.append_to(cfg["output_dir"])
    for c in man.entry["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} = {c['value']}")
    if args.command == "sweep" and not man.all_passed:
        return EXIT_NUMERIC
    return EXIT_OK if man.all_passed else EXIT_CHECKS


if __name__ == "__main__":
    sys.exit(main())
