"""Command-line surface.

Subcommands: spectral | certify | split | smallball | charfn |
clt-experiment | ibp-check. Global flags: --seed, --samples, --out,
--threads, --format, --config, --plot. Defaults can be supplied by a JSON
config file (--config); the thread default honors the QFCERT_THREADS
environment variable.

Every run writes a manifest.json (command, resolved configuration, seeds,
library version) next to its outputs. Exit codes: 0 success or certified,
2 principled refusal, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reporting
from .certify import EXIT_ERROR, Overrides, certify_quadratic, ibp_check
from .determinantal import build_from_operator, load_determinantal
from .estimation import ecf
from .experiments import clt_experiment, sample_quadratic_form
from .gaussderiv import gaussian_quadratic_cf
from .laws import DirichletVariable, law_from_json
from .logdomain import LogScalar
from .multilinear import load_polynomial, smallball_estimate
from .rngstreams import default_threads, derive_seed
from .spectral import (
    cauchy_binet_oracle,
    load_operator,
    spectral_radius_bounds_check,
    summarize,
)
from .splitting import iterated_split, save_split_tree

DEFAULT_SEED = 20250810


def _parse_law(spec: str) -> tuple[DirichletVariable, bool]:
    """A law spec file path, or shorthand like beta:2,2 / gamma:1 / gaussian."""
    path = Path(spec)
    if path.exists():
        with open(path) as fh:
            return law_from_json(json.load(fh))
    name, _, params = spec.partition(":")
    if name == "gaussian":
        return DirichletVariable.gaussian(), True
    if name == "beta":
        a, b = (float(v) for v in params.split(","))
        return DirichletVariable.beta(a, b), True
    if name == "gamma":
        return DirichletVariable.gamma(float(params)), True
    if name == "phi-gaussian":
        from .laws import GAUSSIAN_CDF

        theta = float(params) if params else None
        return DirichletVariable.phi_of_gaussian(GAUSSIAN_CDF, theta=theta), True
    raise ValueError(f"cannot parse law spec {spec!r}")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    """Build the CLI; ``config`` values become per-subcommand defaults."""
    parser = argparse.ArgumentParser(
        prog="qfcert",
        description="Spectral regularity certificates and Monte Carlo checks "
        "for laws of quadratic forms.",
    )
    parser.add_argument("--config", help="JSON file of default option values")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--samples", type=int, default=100_000)
    common.add_argument("--out", default="qfcert-out", help="output directory")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"worker threads (default: QFCERT_THREADS or 1; now {default_threads()})",
    )
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument(
        "--plot", action="store_true", help="also render PNG figures next to tables"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectral", parents=[common], help="spectrum summary of an operator")
    p.add_argument("operator")
    p.add_argument("--q-max", type=int, default=4)
    p.add_argument("--oracle", action="store_true", help="add the minor-sum cross-check")
    p.add_argument("--bounds-check", action="store_true", help="spectral-radius bound report (needs tr A^2 = 1)")

    p = sub.add_parser("certify", parents=[common], help="regularity certificate for <X, A X>")
    p.add_argument("operator")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--reading", choices=("literal", "reciprocal"), default="literal")
    p.add_argument("--override-tau-q-log2", type=float, default=None, help="test hook")
    p.add_argument("--override-theta-d-log2", type=float, default=None, help="test hook")
    p.add_argument("--log-concave", action="store_true")

    p = sub.add_parser("split", parents=[common], help="iterated mass splitting")
    p.add_argument("source", help="operator JSON, or a determinantal dump with --b-dump")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--b-dump", action="store_true")
    p.add_argument("--kappa", type=int, default=None, help="target depth (default: auto)")
    p.add_argument("--mode", choices=("sampling", "greedy"), default="sampling")

    p = sub.add_parser("smallball", parents=[common], help="concentration function of p(U)")
    p.add_argument("polynomial")
    p.add_argument("--law", default="gaussian")
    p.add_argument("--eps", type=_float_list, default=[1e-1, 1e-2, 1e-3])

    p = sub.add_parser("charfn", parents=[common], help="exact vs Monte Carlo CF modulus")
    p.add_argument("--lambdas", type=_float_list, default=None)
    p.add_argument("--operator", default=None)
    p.add_argument("--law", default="gaussian")
    p.add_argument("--xi-max", type=float, default=8.0)
    p.add_argument("--xi-points", type=int, default=33)

    p = sub.add_parser("clt-experiment", parents=[common], help="normal-convergence experiment")
    p.add_argument("--family", choices=("banded", "wigner", "custom-list"), default="banded")
    p.add_argument("--n-list", type=_int_list, default=[32, 64, 128, 256])
    p.add_argument("--law", default="gaussian")
    p.add_argument("--operators", default=None, help="comma-separated operator files for custom-list")

    p = sub.add_parser("ibp-check", parents=[common], help="integration-by-parts identity check")
    p.add_argument("--law", default="gaussian")
    p.add_argument("--f-coeffs", type=_float_list, default=[0.0, 1.0], help="polynomial f, ascending coefficients")
    p.add_argument("--k", type=int, default=1)

    if config:
        for child in sub.choices.values():
            known = {action.dest for action in child._actions}
            child.set_defaults(**{k: v for k, v in config.items() if k in known})

    return parser


def _config_args(argv):
    if "--config" in argv:
        idx = argv.index("--config")
        with open(argv[idx + 1]) as fh:
            return json.load(fh)
    return {}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser(_config_args(argv))
        args = parser.parse_args(argv)
        return run(args)
    except SystemExit as exc:
        raise exc
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def run(args) -> int:
    out = Path(args.out)
    config = {k: v for k, v in vars(args).items() if k != "command" and _is_json(v)}
    reporting.write_manifest(out, args.command, config)
    threads = args.threads
    handler = {
        "spectral": _cmd_spectral,
        "certify": _cmd_certify,
        "split": _cmd_split,
        "smallball": _cmd_smallball,
        "charfn": _cmd_charfn,
        "clt-experiment": _cmd_clt,
        "ibp-check": _cmd_ibp,
    }[args.command]
    return handler(args, out, threads)


def _is_json(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def _cmd_spectral(args, out, threads) -> int:
    op = load_operator(args.operator)
    q_max = min(args.q_max, op.n)
    summary = summarize(op, q_max)
    payload = summary.to_json()
    payload["n"] = op.n
    if args.oracle:
        payload["oracle"] = [
            {
                "q": q,
                "minor_sum": cauchy_binet_oracle(op, q),
                "remainder_set": float(summary.remainders_set[q - 1]),
            }
            for q in range(1, q_max + 1)
        ]
    if args.bounds_check:
        report = spectral_radius_bounds_check(op, q_max)
        payload["bounds_check"] = {
            "q": report.q,
            "remainder_tuple": report.remainder_tuple,
            "radius_product": report.radius_product,
            "product_valid": report.product_valid,
            "max_influence": report.max_influence,
            "radius_sq": report.radius_sq,
        }
    if args.format == "csv":
        reporting.write_csv(
            out / "spectrum.csv",
            ["q", "remainder_set", "remainder_tuple"],
            [
                (q, summary.remainders_set[q - 1], summary.remainders_tuple[q - 1])
                for q in range(1, q_max + 1)
            ],
        )
    path = reporting.write_json(out / "spectrum.json", payload)
    print(f"spectrum written to {path}")
    return 0


def _cmd_certify(args, out, threads) -> int:
    op = load_operator(args.operator)
    overrides = Overrides(
        tau_q=(
            LogScalar.from_log2(args.override_tau_q_log2)
            if args.override_tau_q_log2 is not None
            else None
        ),
        theta_d=(
            LogScalar.from_log2(args.override_theta_d_log2)
            if args.override_theta_d_log2 is not None
            else None
        ),
    )
    report = certify_quadratic(
        op,
        args.q,
        args.theta,
        reading=args.reading,
        overrides=overrides,
        log_concave=args.log_concave,
    )
    path = reporting.write_json(out / "certificate.json", report.to_json())
    print(f"{report.verdict}: certificate written to {path}")
    for reason in report.reasons:
        print(f"  - {reason}")
    return report.exit_code


def _cmd_split(args, out, threads) -> int:
    if args.b_dump:
        b = load_determinantal(args.source)
    else:
        if args.q is None:
            raise ValueError("--q is required when splitting an operator file")
        b = build_from_operator(load_operator(args.source), args.q)
    tree = iterated_split(b, args.seed, target_kappa=args.kappa, mode=args.mode)
    path = out / "split_tree.json"
    save_split_tree(tree, path)
    print(
        f"split tree written to {path} (kappa={tree.kappa}, stop={tree.stop_reason})"
    )
    return 0


def _cmd_smallball(args, out, threads) -> int:
    poly = load_polynomial(args.polynomial)
    law, _ = _parse_law(args.law)
    table = smallball_estimate(poly, law, args.eps, args.samples, args.seed)
    rows = [(r.eps, r.center, r.p_hat) for r in table.rows]
    path = reporting.write_csv(out / "smallball.csv", ["eps", "center", "p_hat"], rows)
    if args.format == "json":
        reporting.write_json(
            out / "smallball.json",
            {"rows": [r.__dict__ for r in table.rows], "samples": table.sample_count},
        )
    if args.plot:
        populated = [(r.eps, r.p_hat) for r in table.rows if r.p_hat > 0]
        if populated:
            reporting.render_lines(
                out / "smallball.png",
                [e for e, _ in populated],
                {"sup_b P(|p - b| <= eps)": [p for _, p in populated]},
                "eps",
                "probability",
                logy=True,
            )
    print(f"small-ball table written to {path}")
    return 0


def _cmd_charfn(args, out, threads) -> int:
    if args.lambdas:
        lambdas = np.asarray(args.lambdas, dtype=float)
    elif args.operator:
        lambdas = load_operator(args.operator).eigenvalues
    else:
        raise ValueError("either --lambdas or --operator is required")
    law, _ = _parse_law(args.law)
    xi_grid = np.linspace(0.0, args.xi_max, args.xi_points)
    n = lambdas.size

    def draw(seed):
        from .laws import sample_batch

        batch = sample_batch(law, n, args.samples, seed=seed, standardize=True)
        return np.einsum("mi,i,mi->m", batch.x, lambdas, batch.x)

    samples = draw(args.seed)
    table = ecf(samples, xi_grid, threads=threads)
    modulus = table.modulus()
    header = ["xi", "modulus_exact", "ecf_modulus"] + [f"bound_q{q}" for q in range(1, n + 1)]
    rows = []
    for i, xi in enumerate(xi_grid):
        exact = gaussian_quadratic_cf(lambdas, float(xi))
        rows.append((float(xi), exact.modulus, float(modulus[i]), *exact.bounds))
    path = reporting.write_csv(out / "charfn.csv", header, rows)
    if args.plot:
        reporting.render_lines(
            out / "charfn.png",
            [r[0] for r in rows],
            {"exact": [r[1] for r in rows], "ecf": [r[2] for r in rows]},
            "xi",
            "|E exp(i xi Q)|",
            logy=True,
        )
    print(f"characteristic-function table written to {path}")
    return 0


def _cmd_clt(args, out, threads) -> int:
    law, _ = _parse_law(args.law)
    custom = None
    if args.family == "custom-list":
        if not args.operators:
            raise ValueError("custom-list needs --operators")
        ops = [load_operator(p) for p in args.operators.split(",")]
        custom = {op.n: op for op in ops}
        args.n_list = [op.n for op in ops]
    report = clt_experiment(
        args.family,
        args.n_list,
        law,
        args.samples,
        args.seed,
        custom_operators=custom,
        threads=threads,
    )
    header = ["n", "spectral_radius", "max_influence", "ks_to_normal"] + [
        f"decay_sup_s{s:g}" for s in sorted(report.rows[0].decay_sup)
    ]
    rows = [
        (
            r.n,
            r.spectral_radius,
            r.max_influence,
            r.ks_to_normal,
            *[r.decay_sup[s] for s in sorted(r.decay_sup)],
        )
        for r in report.rows
    ]
    path = reporting.write_csv(out / f"clt_{args.family}.csv", header, rows)
    reporting.write_json(
        out / f"clt_{args.family}.json",
        {
            "family": report.family,
            "law": report.law_kind,
            "samples": report.sample_count,
            "seed": report.seed,
            "leptokurtic": report.leptokurtic,
            "fourth_moment": report.fourth_moment,
            "warnings": report.warnings,
            "xi_max": report.xi_max,
            "xi_points": report.xi_points,
        },
    )
    for warning in report.warnings:
        print(f"warning: {warning}")
    if args.plot:
        ns = report.column("n")
        reporting.render_lines(
            out / f"clt_{args.family}_spectral.png",
            ns,
            {
                "spectral radius": report.column("spectral_radius"),
                "max influence": report.column("max_influence"),
                "KS to N(0,1)": report.column("ks_to_normal"),
            },
            "n",
            "value",
            logy=True,
        )
        reporting.render_lines(
            out / f"clt_{args.family}_decay.png",
            ns,
            {
                f"s = {s:g}": [r.decay_sup[s] for r in report.rows]
                for s in sorted(report.rows[0].decay_sup)
            },
            "n",
            "sup (1+xi^2)^(s/2) |ecf|",
        )
    print(f"experiment table written to {path}")
    return 0


def _cmd_ibp(args, out, threads) -> int:
    law, _ = _parse_law(args.law)
    rows = ibp_check(law, args.f_coeffs, args.k, args.samples, args.seed)
    path = reporting.write_csv(
        out / "ibp_check.csv",
        ["phi", "k", "lhs", "rhs", "gap", "standard_error", "skipped", "diagnosis"],
        [
            (r.phi, r.k, r.lhs, r.rhs, r.gap, r.standard_error, r.skipped, r.diagnosis)
            for r in rows
        ],
    )
    bad = [r for r in rows if not r.ok]
    for r in rows:
        status = "skipped" if r.skipped else ("ok" if r.ok else "FAILED")
        print(f"phi={r.phi} k={r.k}: gap={r.gap:.3e} se={r.standard_error:.3e} [{status}]")
    print(f"integration-by-parts table written to {path}")
    return EXIT_ERROR if bad else 0


if __name__ == "__main__":
    sys.exit(main())
