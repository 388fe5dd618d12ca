"""Command-line interface: ``grnconv <command> [options]``.

Every command writes CSV (header row, 12 significant digits) to ``--out`` or
stdout.  Exit status 2 means a configuration error, 3 numerical
non-convergence and 4 a failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import asymptotics as asy
from . import grn
from . import majorization as mj
from . import quantum as qm
from . import special_fns
from .errors import ConfigError, ConvergenceError, GrnConvError

EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_VERIFY = 4

FIG2_V = ["1/3"]
FIG2_S = ["-0.5", "0", "0.5", "1", "inf"]
FIG3_V = ["0", "1/3", "1", "3"]
FIG3_S = ["0.5"]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def parse_real(text: str) -> float:
    """Parse a float, a fraction such as ``1/3``, or ``inf``."""
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(Fraction(t)) if "/" in t else float(t)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def write_csv(header: Sequence[str], rows: Sequence[Sequence], out: Optional[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def linspace(lo: float, hi: float, grid: int) -> np.ndarray:
    if grid < 2:
        raise ConfigError("--grid must be at least 2")
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ConfigError(f"bad range [{lo}, {hi}]")
    return np.linspace(lo, hi, grid)


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_distribution(path: Optional[str], flag: str) -> mj.Distribution:
    if not path:
        raise ConfigError(f"{flag} is required")
    try:
        return mj.Distribution.from_json(load_json(path))
    except GrnConvError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_state(path: Optional[str], flag: str) -> qm.PureState:
    if not path:
        raise ConfigError(f"{flag} is required")
    try:
        return qm.PureState.from_json(load_json(path))
    except GrnConvError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def check_nu(nu: float) -> float:
    if not 0.0 < nu < 1.0:
        raise ConfigError(f"--nu must lie in (0, 1), got {nu}")
    return nu


def source_target_profile(args) -> asy.SourceTargetProfile:
    if getattr(args, "profile", None):
        H_p, V_p, H_q, V_q = (parse_real(x) for x in args.profile)
        try:
            return asy.SourceTargetProfile.from_moments(H_p, V_p, H_q, V_q)
        except GrnConvError as exc:
            raise ConfigError(str(exc)) from exc
    return asy.profile(load_distribution(args.source, "--source"),
                       load_distribution(args.target, "--target"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_z_curve(args) -> int:
    if args.family == "fig2":
        vs, ss = FIG2_V, FIG2_S
    elif args.family == "fig3":
        vs, ss = FIG3_V, FIG3_S
    else:
        vs, ss = args.v, args.s
    if not vs or not ss:
        raise ConfigError("give --v and --s values or a --family preset")
    pairs = []
    for v_text in vs:
        for s_text in ss:
            try:
                pairs.append((v_text, s_text, grn.GrnParams(parse_real(v_text), parse_real(s_text))))
            except GrnConvError as exc:
                raise ConfigError(str(exc)) from exc
    mus = linspace(args.mu_min, args.mu_max, args.grid)
    header = ["mu"] + [f"Z[v={fmt(p.v)};s={fmt(p.s)}]" for _, _, p in pairs]
    rows = [[mu] + [grn.z_eval(p, mu) for _, _, p in pairs] for mu in mus]
    write_csv(header, rows, args.out)
    return 0


def cmd_region(args) -> int:
    prof = source_target_profile(args)
    nu = check_nu(args.nu)
    if args.order == 1:
        # the corner s1 = H(P) is always sampled
        s1s = np.union1d(linspace(prof.H_p / args.grid, 2.0 * prof.H_p, args.grid), [prof.H_p])
        rows = []
        for s1 in s1s:
            t1 = min(prof.H_p, s1) / prof.H_q
            cls = asy.classify_rate1(prof, asy.RatePair1(float(s1), t1))
            rows.append([s1, t1, cls.value])
        write_csv(["s1", "t1", "class"], rows, args.out)
        return 0
    s1 = prof.H_p if args.s1 is None else args.s1
    rows = []
    for s2 in linspace(args.s2_min, args.s2_max, args.grid):
        t2 = asy.second_order_fidelity_inverse(prof, s1, float(s2), nu)
        cls = asy.classify_rate2(prof, s1, nu, asy.RatePair2(float(s2), t2))
        rows.append([s2, t2, cls.value])
    write_csv([f"s2[s1={fmt(s1)};nu={fmt(nu)}]", "t2", "class"], rows, args.out)
    return 0


def cmd_expand(args) -> int:
    p = load_distribution(args.source, "--source")
    q = load_distribution(args.target, "--target")
    prof = asy.profile(p, q)
    nu = check_nu(args.nu)
    s1 = prof.H_p if args.s1 is None else args.s1
    rows = []
    for n in args.n:
        predicted = asy.expansion_L(prof, s1, args.s2, nu, n)
        exact = None
        if n <= args.exact_max:
            bits = s1 * n + args.s2 * math.sqrt(n)
            exact = mj.max_convertible_number(mj.iid_power(p, n), q, nu,
                                              n_bits=max(0.0, bits))
        rows.append([n, predicted, exact, None if exact is None else exact - predicted])
    write_csv(["n", "predicted_L", "exact_L_M", "difference"], rows, args.out)
    return 0


def finite_n_point(p: mj.Distribution, q: mj.Distribution, prof: asy.SourceTargetProfile,
                   n: int, s2: float, t2: float, source_power=None) -> tuple:
    """Exact storage-restricted fidelity at blocklength ``n`` and its asymptotic value.

    Storage is ``H(P) n + s2 sqrt(n)`` bits and the target count is
    ``round(H(P)/H(Q) n + t2 sqrt(n))``.
    """
    bits = prof.H_p * n + s2 * math.sqrt(n)
    copies = int(round(prof.H_p / prof.H_q * n + t2 * math.sqrt(n)))
    if copies < 1:
        raise ConfigError(f"target count {copies} < 1 at n={n}")
    pn = source_power if source_power is not None else mj.iid_power(p, n)
    exact = mj.max_fidelity_majorization_with_storage(pn, mj.iid_power(q, copies),
                                                      max(0.0, bits)).fidelity
    predicted = asy.second_order_fidelity(prof, prof.H_p, s2, t2)
    return bits, copies, exact, predicted


def cmd_fidelity_finite_n(args) -> int:
    p = load_distribution(args.source, "--source")
    q = load_distribution(args.target, "--target")
    prof = asy.profile(p, q)
    rows = []
    for n in args.n:
        pn = mj.iid_power(p, n)
        for s2 in args.s2:
            for t2 in args.t2:
                bits, copies, exact, predicted = finite_n_point(p, q, prof, n, s2, t2, pn)
                rows.append([n, s2, t2, bits, copies, exact, predicted, abs(exact - predicted)])
    write_csv(["n", "s2", "t2", "storage_bits", "target_copies", "exact_F_M",
               "predicted", "gap"], rows, args.out)
    return 0


def cmd_ratio(args) -> int:
    prof = source_target_profile(args)
    t2s = [parse_real(x) for x in args.t2]
    rows = []
    for s2 in linspace(args.s2_min, args.s2_max, args.grid):
        rows.append([s2] + asy.ratio_curve(prof, float(s2), t2s))
    write_csv(["s2"] + [f"ratio[t2={fmt(t)}]" for t in t2s], rows, args.out)
    return 0


def cmd_locc(args) -> int:
    psi = load_state(args.psi, "--psi")
    phi = load_state(args.phi, "--phi")
    rows = [[n, qm.locc_fidelity_via_storage(psi, phi, n)] for n in args.pairs]
    write_csv(["qubit_pairs", "fidelity"], rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# verification battery
# ---------------------------------------------------------------------------

def _random_dist(rng: np.random.Generator, max_support: int) -> mj.Distribution:
    d = int(rng.integers(1, max_support + 1))
    return mj.Distribution.from_probs(rng.dirichlet(np.full(d, 0.8)))


def _check_z_oracle(rng, grid) -> tuple:
    worst = 0.0
    for v, s, mu in [(1 / 3, 0.5, 0.0), (1.0, 0.0, 1.0), (3.0, -0.5, 0.5), (3.0, 1.0, -1.0)]:
        p = grn.GrnParams(v, s)
        worst = max(worst, abs(grn.z_eval(p, mu) - grn.z_oracle(p, mu, grid=grid)))
    return worst <= 1e-3, f"max |closed form - oracle| = {worst:.3g}"


def _check_uniform_target(rng, grid) -> tuple:
    worst = 0.0
    for _ in range(30):
        p = _random_dist(rng, 20)
        N = int(rng.integers(1, 65))
        pv = p.dense()
        J = mj.storage_cut(p, N)[1]
        tail = float(pv[J:].sum())
        formula = math.sqrt(1.0 / N) * (float(np.sqrt(pv[:J]).sum()) + math.sqrt((N - J) * tail))
        got = mj.max_fidelity_majorization(p, mj.Distribution.uniform(N)).fidelity
        worst = max(worst, abs(got - formula))
    return worst <= 1e-10, f"max deviation = {worst:.3g}"


def _check_solver(rng, grid) -> tuple:
    worst = 0.0
    for _ in range(50):
        p, q = _random_dist(rng, 8), _random_dist(rng, 8)
        a = mj.max_fidelity_majorization(p, q).fidelity
        b = mj.max_fidelity_majorization(p, q, method="enumerate").fidelity
        worst = max(worst, abs(a - b))
    return worst <= 1e-9, f"max |PAV - enumeration| = {worst:.3g}"


def _check_order(rng, grid) -> tuple:
    bad = 0
    for _ in range(30):
        p, q = _random_dist(rng, 6), _random_dist(rng, 4)
        if mj.max_fidelity_deterministic(p, q) > mj.max_fidelity_majorization(p, q).fidelity + 1e-12:
            bad += 1
    return bad == 0, f"{bad} violations of F^D <= F^M"


def _check_schmidt(rng, grid) -> tuple:
    worst = 0.0
    for _ in range(10):
        a, b = (int(x) for x in rng.integers(1, 5, size=2))
        m = rng.normal(size=(a, b)) + 1j * rng.normal(size=(a, b))
        m /= np.linalg.norm(m)
        ours = qm.schmidt_squared(m).dense()
        ref = np.linalg.svd(m, compute_uv=False) ** 2
        ref = np.sort(ref[ref > 1e-15])[::-1]
        worst = max(worst, float(np.max(np.abs(ours - ref))) if len(ours) == len(ref) else 1.0)
    return worst <= 1e-9, f"max spectrum deviation = {worst:.3g}"


def _check_crossover(rng, grid) -> tuple:
    p = mj.Distribution.from_probs([0.75, 0.25])
    prof = asy.profile(p, p)
    s2 = asy.second_order_threshold(prof, 0.9)
    f = asy.second_order_fidelity(prof, prof.H_p, s2, 0.0)
    return abs(f - 0.9) <= 1e-9, f"fidelity at threshold = {f:.12g}"


VERIFY_CHECKS: list[tuple[str, Callable]] = [
    ("z_closed_form_vs_oracle", _check_z_oracle),
    ("uniform_target_closed_form", _check_uniform_target),
    ("pav_vs_enumeration", _check_solver),
    ("deterministic_below_majorization", _check_order),
    ("schmidt_vs_svd", _check_schmidt),
    ("compression_crossover", _check_crossover),
]


def run_verification(seed: int = 0, grid: int = 400) -> list:
    """Run every oracle check; returns ``(name, passed, detail)`` tuples."""
    rng = np.random.default_rng(seed)
    results = []
    for name, check in VERIFY_CHECKS:
        try:
            ok, detail = check(rng, grid)
        except GrnConvError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results


def cmd_verify(args) -> int:
    results = run_verification(args.seed, args.grid)
    write_csv(["check", "passed", "detail"], results, args.out)
    return 0 if all(ok for _, ok, _ in results) else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grnconv",
        description="Rayleigh-normal distributions and random number conversion via restricted storage.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid_default=201):
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--grid", type=int, default=grid_default, help="number of grid points")
        p.add_argument("--tol", type=float, default=None, help="override root tolerance")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized instances")

    def pair(p):
        p.add_argument("--source", help="source distribution JSON")
        p.add_argument("--target", help="target distribution JSON")

    p = sub.add_parser("z-curve", help="tabulate Z_{v,s}(mu) over a mu grid")
    p.add_argument("--v", nargs="+", help="v values (fractions like 1/3 allowed)")
    p.add_argument("--s", nargs="+", help="s values ('inf' allowed)")
    p.add_argument("--family", choices=["fig2", "fig3"], help="preset (v, s) family")
    p.add_argument("--mu-min", type=float, default=-4.0)
    p.add_argument("--mu-max", type=float, default=4.0)
    common(p)
    p.set_defaults(func=cmd_z_curve)

    p = sub.add_parser("region", help="boundary of the first- or second-order rate region")
    pair(p)
    p.add_argument("--profile", nargs=4, metavar=("H_P", "V_P", "H_Q", "V_Q"))
    p.add_argument("--order", type=int, choices=[1, 2], default=2)
    p.add_argument("--nu", type=float, default=0.9)
    p.add_argument("--s1", type=float, default=None, help="first-order storage rate (default H(P))")
    p.add_argument("--s2-min", type=float, default=-3.0)
    p.add_argument("--s2-max", type=float, default=3.0)
    common(p, 61)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("expand", help="predicted vs exact maximal convertible number")
    pair(p)
    p.add_argument("--nu", type=float, default=0.9)
    p.add_argument("--s1", type=float, default=None)
    p.add_argument("--s2", type=float, default=0.0)
    p.add_argument("--n", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--exact-max", type=int, default=2048,
                   help="largest n for which the exact value is computed")
    common(p)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("fidelity-finite-n", help="exact finite-n fidelity vs asymptotic value")
    pair(p)
    p.add_argument("--s2", type=float, nargs="+", default=[0.0])
    p.add_argument("--t2", type=float, nargs="+", default=[0.0])
    p.add_argument("--n", type=int, nargs="+", default=[256, 1024])
    common(p)
    p.set_defaults(func=cmd_fidelity_finite_n)

    p = sub.add_parser("ratio", help="fidelity ratio with vs without storage over s2")
    pair(p)
    p.add_argument("--profile", nargs=4, metavar=("H_P", "V_P", "H_Q", "V_Q"),
                   help="use these entropies/varentropies instead of distributions")
    p.add_argument("--t2", nargs="+", default=["0", "-3", "-6"])
    p.add_argument("--s2-min", type=float, default=-5.0)
    p.add_argument("--s2-max", type=float, default=5.0)
    common(p)
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("locc", help="LOCC fidelity between pure states through qubit-pair storage")
    p.add_argument("--psi", help="initial state JSON")
    p.add_argument("--phi", help="target state JSON")
    p.add_argument("--pairs", type=float, nargs="+", default=[0.0, 1.0, 2.0],
                   help="storage sizes in qubit pairs")
    common(p)
    p.set_defaults(func=cmd_locc)

    p = sub.add_parser("verify", help="run the oracle battery")
    common(p, 400)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    saved_tol = special_fns.ROOT_TOL
    if args.tol is not None:
        if not args.tol > 0:
            print("error: --tol must be positive", file=sys.stderr)
            return EXIT_CONFIG
        special_fns.ROOT_TOL = args.tol
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, GrnConvError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        special_fns.ROOT_TOL = saved_tol


if __name__ == "__main__":
    sys.exit(main())
