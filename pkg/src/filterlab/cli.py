"""Command-line front end.

Every subcommand reads one JSON config (all fields optional, defaults in
config.ExperimentConfig), draws all randomness from the --seed override or
the config seed, and emits UTF-8 CSV with floats at 17 significant digits,
so outputs are byte-identical across runs and thread counts for a given
seed.  Verification commands (mc-verify, po-penalty, selftest) exit
nonzero when a check fails.
"""

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import discrepancy as dsc
from .expint import expint_scaled, expint_scaled_inverse
from .config import ExperimentConfig
from .propagators import ModelSequence, build_trajectory
from .rng import RngSpec
from .mvspenkf import DiagonalizableModel, mv_inflation_schedule, mv_spenkf_run
from .skf import skf_closed_form, skf_run
from .spenkf import (
    EnsembleState,
    inflated_reference_run,
    inflation_schedule,
    sample_initial_ensemble,
    spenkf_run,
    theta_star,
)

# stream-id layout shared by all commands
_STREAM_TRAJ = 0
_STREAM_ENSEMBLE = 1
_STREAM_MC_BASE = 10


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _write_csv(out_path, header, rows):
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(_fmt(v) for v in row) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _describe(columns):
    width = max(len(name) for name, _ in columns)
    for name, doc in columns:
        print("%-*s  %s" % (width, name, doc))


def _load(args):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "seed": args.seed,
                                  "seed_given": True})
    if args.out is None and cfg.output_path is not None:
        args.out = cfg.output_path
    return cfg


def _load_mc(args):
    # Monte Carlo commands refuse to run on an implicit seed: either the
    # --seed flag or an explicit "seed" field in the config is required.
    cfg = _load(args)
    if not cfg.seed_given:
        print("this subcommand requires --seed (or an explicit seed in the "
              "config) so results are attributable to a stated seed",
              file=sys.stderr)
        return None
    return cfg


def _trajectory(cfg):
    spec = RngSpec(cfg.seed, _STREAM_TRAJ)
    model = cfg.model.build(cfg.steps, spec.stream(_STREAM_MC_BASE - 1))
    return build_trajectory(model, cfg.x0_truth, cfg.r, spec)


# ---------------------------------------------------------------- skf

_SKF_COLS = [
    ("step", "assimilation step index i"),
    ("truth", "true state x_i"),
    ("observation", "observation y_i = x_i + noise, noise variance r"),
    ("mean_forecast", "forecast mean before assimilating y_i"),
    ("var_forecast", "forecast variance before assimilating y_i"),
    ("gain", "Kalman gain p_f / (p_f + r)"),
    ("mean_analysis", "analysis mean after assimilating y_i"),
    ("var_analysis", "analysis variance after assimilating y_i"),
    ("closed_mean", "closed form M_i (B_i p0 + r x0) / (S_i p0 + r)"),
    ("closed_var", "closed form M_i^2 p0 r / (S_i p0 + r)"),
]


def cmd_skf(args):
    if args.describe:
        _describe(_SKF_COLS)
        return 0
    cfg = _load(args)
    traj = _trajectory(cfg)
    states = skf_run(traj, cfg.x0, cfg.p0)
    rows = []
    for i, s in enumerate(states):
        c = skf_closed_form(traj, cfg.x0, cfg.p0, i)
        rows.append([i, float(traj.truth[i]), float(traj.observations[i]),
                     s.mean_forecast, s.var_forecast, s.gain,
                     s.mean_analysis, s.var_analysis,
                     c.mean_analysis, c.var_analysis])
    _write_csv(args.out, [n for n, _ in _SKF_COLS], rows)
    return 0


# ---------------------------------------------------------------- spenkf

_SPENKF_COLS = [
    ("step", "assimilation step index i"),
    ("truth", "true state x_i"),
    ("observation", "observation y_i"),
    ("mean", "ensemble analysis mean"),
    ("sampled_var", "divisor-N ensemble analysis variance (1/N) a.a"),
    ("gain", "sampled gain phat_f / (phat_f + r)"),
    ("ref_mean", "exact-prior filter analysis mean (reference)"),
    ("ref_var", "exact-prior filter analysis variance (reference)"),
    ("theta", "one-shot optimal inflation factor theta_i (nan if disabled)"),
    ("phi", "sequential variance inflation applied to forecast i (nan if disabled)"),
    ("psi", "sequential mean shift applied to forecast i (nan if disabled)"),
    ("po_penalty", "perturbed-observation variance penalty E[K_i^4] r^2 / alpha "
                   "(nan unless perturbed_obs is set and alpha > 4)"),
]


def cmd_spenkf(args):
    if args.describe:
        _describe(_SPENKF_COLS)
        return 0
    cfg = _load(args)
    traj = _trajectory(cfg)
    alpha = 0.5 * cfg.ensemble_size
    init = sample_initial_ensemble(cfg.ensemble_size, cfg.p_tilde0, cfg.x0,
                                   RngSpec(cfg.seed, _STREAM_ENSEMBLE))
    sched = None
    if cfg.inflation != "none":
        sched = inflation_schedule(traj, alpha, cfg.p_tilde0, cfg.x0)
    if cfg.inflation == "initial-theta":
        # one-shot: inflate the initial ensemble by theta at the final step
        # (unbiased final analysis variance), no per-step corrections
        th_last = float(sched.theta[traj.n_steps])
        anoms = init.anomalies * math.sqrt(th_last)
        init = EnsembleState(step=0, phase="forecast", mean=init.mean,
                             anomalies=anoms,
                             sampled_var=float(np.dot(anoms, anoms) / len(anoms)))
        states = spenkf_run(traj, init)
    else:
        states = spenkf_run(traj, init, sched)
    ref = skf_run(traj, cfg.x0, cfg.p0)
    rows = []
    for i, s in enumerate(states):
        th = sched.theta[i] if sched is not None else math.nan
        ph = sched.phi[i] if cfg.inflation == "sequential" else math.nan
        ps = sched.psi[i] if cfg.inflation == "sequential" else math.nan
        pen = math.nan
        if cfg.perturbed_obs and alpha > 4.0:
            pen = dsc.po_variance_penalty(traj, cfg.p0, alpha, cfg.r, i)
        rows.append([i, float(traj.truth[i]), float(traj.observations[i]),
                     s.mean, s.sampled_var, s.gain,
                     ref[i].mean_analysis, ref[i].var_analysis, th, ph, ps,
                     pen])
    _write_csv(args.out, [n for n, _ in _SPENKF_COLS], rows)
    return 0


# ---------------------------------------------------------------- mc-verify

_MC_COLS = [
    ("step", "assimilation step index i"),
    ("M_ratio", "propagator ratio M_i^2 / S_i"),
    ("skf_mean", "exact filter analysis mean at step i (closed form)"),
    ("skf_var", "exact filter analysis variance at step i (closed form)"),
    ("dp_mean", "closed-form E[dp_i], variance discrepancy mean"),
    ("dp_mean_mc", "Monte Carlo estimate of E[dp_i]"),
    ("dp_mean_se", "standard error of dp_mean_mc"),
    ("dp_var", "closed-form Var[dp_i] = E[dp_i^2] - E[dp_i]^2"),
    ("dp_var_mc", "Monte Carlo estimate of Var[dp_i]"),
    ("dp_var_se", "standard error of dp_var_mc"),
    ("dp2", "closed-form E[dp_i^2]"),
    ("dp2_mc", "Monte Carlo estimate of E[dp_i^2]"),
    ("dp2_se", "standard error of dp2_mc"),
    ("dx_mean", "closed-form E[dx_i], mean discrepancy mean"),
    ("dx_mean_mc", "Monte Carlo estimate of E[dx_i]"),
    ("dx_mean_se", "standard error of dx_mean_mc"),
    ("dx_var", "closed-form Var[dx_i] = E[dx_i^2] - E[dx_i]^2"),
    ("dx_var_mc", "Monte Carlo estimate of Var[dx_i]"),
    ("dx_var_se", "standard error of dx_var_mc"),
    ("dx2", "closed-form E[dx_i^2]"),
    ("dx2_mc", "Monte Carlo estimate of E[dx_i^2]"),
    ("dx2_se", "standard error of dx2_mc"),
    ("theta_i", "one-shot optimal inflation factor at step i"),
    ("phi_i", "sequential variance inflation factor at step i"),
    ("psi_i", "sequential mean shift at step i"),
    ("max_gap_se", "largest |closed form - Monte Carlo| in SE units this step "
                   "(over the two means and two second moments)"),
]


def cmd_mc_verify(args):
    if args.describe:
        _describe(_MC_COLS)
        return 0
    cfg = _load_mc(args)
    if cfg is None:
        return 2
    if cfg.ensemble_size < 5:
        print("mc-verify: ensemble_size must be >= 5 (second moments need "
              "alpha = N/2 > 2)", file=sys.stderr)
        return 2
    traj = _trajectory(cfg)
    alpha = 0.5 * cfg.ensemble_size
    inp = dsc.PerturbedInputs(p0=cfg.p0, x0=cfg.x0, p_tilde0=cfg.p_tilde0,
                              x_tilde0=cfg.x_tilde0, alpha=alpha, r=cfg.r)
    sched = inflation_schedule(traj, alpha, cfg.p0, cfg.x0)

    def one(i):
        mc = dsc.mc_discrepancy_moments(traj, inp, i, cfg.replicates,
                                        RngSpec(cfg.seed, _STREAM_MC_BASE + i))
        ref = skf_closed_form(traj, cfg.x0, cfg.p0, i)
        a_dp = dsc.expected_dp(traj, inp, i)
        a_dp2 = dsc.second_moment_dp(traj, inp, i)
        a_dx = dsc.expected_dx(traj, inp, i)
        a_dx2 = dsc.second_moment_dx(traj, inp, i)
        gaps = [abs(a_dp - mc.mean_dp) / mc.mean_dp_se,
                abs(a_dp2 - mc.mean_dp2) / mc.mean_dp2_se,
                abs(a_dx - mc.mean_dx) / mc.mean_dx_se,
                abs(a_dx2 - mc.mean_dx2) / mc.mean_dx2_se]
        return [i, traj.M2_over_S(i), ref.mean_analysis, ref.var_analysis,
                a_dp, mc.mean_dp, mc.mean_dp_se,
                a_dp2 - a_dp * a_dp, mc.var_dp, mc.var_dp_se,
                a_dp2, mc.mean_dp2, mc.mean_dp2_se,
                a_dx, mc.mean_dx, mc.mean_dx_se,
                a_dx2 - a_dx * a_dx, mc.var_dx, mc.var_dx_se,
                a_dx2, mc.mean_dx2, mc.mean_dx2_se,
                float(sched.theta[i]), float(sched.phi[i]),
                float(sched.psi[i]), max(gaps)]

    steps = range(traj.n_steps + 1)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(one, steps))
    else:
        rows = [one(i) for i in steps]
    _write_csv(args.out, [n for n, _ in _MC_COLS], rows)
    worst = max(row[-1] for row in rows)
    ok = worst <= 4.0
    print("mc-verify: %d steps, %d replicates, worst gap %.2f SE: %s"
          % (len(rows), cfg.replicates, worst, "PASS" if ok else "FAIL"),
          file=sys.stderr)
    return 0 if ok else 1


# ---------------------------------------------------------------- inflation-table

_INFL_COLS = [
    ("step", "assimilation step index i"),
    ("r_over_s", "observation-to-propagated variance ratio r / S_i"),
    ("theta", "one-shot optimal inflation theta_i"),
    ("phi", "sequential variance factor phi_i (phi_0 = theta_0)"),
    ("psi", "sequential mean shift psi_i (psi_0 = 0)"),
    ("theta_star", "asymptote alpha / (alpha - 1) of theta_i as r/S_i -> 0"),
]


def cmd_inflation_table(args):
    if args.describe:
        _describe(_INFL_COLS)
        return 0
    cfg = _load(args)
    traj = _trajectory(cfg)
    alpha = 0.5 * cfg.ensemble_size
    sched = inflation_schedule(traj, alpha, cfg.p_tilde0, cfg.x0)
    rows = [[i, traj.r_over_S(i), float(sched.theta[i]), float(sched.phi[i]),
             float(sched.psi[i]), sched.theta_star]
            for i in range(traj.n_steps + 1)]
    _write_csv(args.out, [n for n, _ in _INFL_COLS], rows)
    return 0


# ---------------------------------------------------------------- po-penalty

_PO_COLS = [
    ("step", "assimilation step index i"),
    ("gain_fourth", "closed-form E[K_i^4] of the sampled propagated gain"),
    ("penalty", "perturbed-observation variance penalty E[K_i^4] r^2 / alpha"),
    ("mean_P", "Monte Carlo mean of P = r K + K^2 (R - r)"),
    ("mean_rK", "closed-form r E[K], which E[P] must equal"),
    ("cov_cross", "Monte Carlo covariance of r K and K^2 (R - r)"),
    ("cov_cross_se", "standard error of cov_cross"),
    ("second_R", "Monte Carlo mean of (R - r)^2"),
    ("exact_second_R", "exact value r^2 / alpha of E[(R - r)^2]"),
    ("max_gap_se", "largest Monte Carlo/closed-form gap in SE units this step"),
]


def cmd_po_penalty(args):
    if args.describe:
        _describe(_PO_COLS)
        return 0
    cfg = _load_mc(args)
    if cfg is None:
        return 2
    if cfg.ensemble_size < 9:
        print("po-penalty: ensemble_size must be >= 9 (fourth moments need "
              "alpha = N/2 > 4)", file=sys.stderr)
        return 2
    traj = _trajectory(cfg)
    alpha = 0.5 * cfg.ensemble_size

    def one(i):
        rep = dsc.po_mean_identity_check(traj, cfg.p0, alpha, cfg.r, i,
                                         cfg.replicates,
                                         RngSpec(cfg.seed, _STREAM_MC_BASE + i))
        k4 = rep.penalty * alpha / (cfg.r ** 2)
        gaps = [abs(rep.mean_P - rep.analytic_mean_rK) / rep.mean_P_se,
                abs(rep.cov_cross) / rep.cov_cross_se,
                abs(rep.second_R - rep.exact_second_R) / rep.second_R_se]
        return [i, k4, rep.penalty, rep.mean_P, rep.analytic_mean_rK,
                rep.cov_cross, rep.cov_cross_se, rep.second_R,
                rep.exact_second_R, max(gaps)]

    steps = range(traj.n_steps + 1)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(one, steps))
    else:
        rows = [one(i) for i in steps]
    _write_csv(args.out, [n for n, _ in _PO_COLS], rows)
    worst = max(row[-1] for row in rows)
    ok = worst <= 4.0
    print("po-penalty: %d steps, worst gap %.2f SE: %s"
          % (len(rows), worst, "PASS" if ok else "FAIL"), file=sys.stderr)
    return 0 if ok else 1


# ---------------------------------------------------------------- mv

def _mv_cols(dim):
    cols = [("step", "assimilation step index i")]
    for j in range(dim):
        cols.append(("mean_basis_%d" % j, "component-%d analysis mean in the shared eigenbasis" % j))
    for j in range(dim):
        cols.append(("var_basis_%d" % j, "component-%d sampled analysis variance in the eigenbasis" % j))
    for j in range(dim):
        cols.append(("mean_%d" % j, "coordinate-%d analysis mean mapped back through Z" % j))
    return cols


def cmd_mv(args):
    cfg = _load(args)
    if cfg.mv is None:
        if args.describe:
            _describe(_mv_cols(2) + [("...", "column triple repeats per state dimension")])
            return 0
        print("mv: config must contain an 'mv' section", file=sys.stderr)
        return 2
    model = DiagonalizableModel(Z=np.array(cfg.mv.Z),
                                multipliers=np.array(cfg.mv.multipliers),
                                p0_diag=np.array(cfg.mv.p0_diag),
                                r_diag=np.array(cfg.mv.r_diag))
    if args.describe:
        _describe(_mv_cols(model.dim))
        return 0
    spec = RngSpec(cfg.seed, _STREAM_MC_BASE)
    schedules = None
    result = mv_spenkf_run(model, np.array(cfg.mv.x0), cfg.ensemble_size, spec)
    if cfg.inflation == "sequential":
        schedules = mv_inflation_schedule(result)
        result = mv_spenkf_run(model, np.array(cfg.mv.x0), cfg.ensemble_size,
                               spec, schedules)
    rows = []
    for i in range(model.n_steps + 1):
        row = [i]
        row += [float(v) for v in result.means_basis[i]]
        row += [float(v) for v in result.variances_basis[i]]
        row += [float(v) for v in result.means[i]]
        rows.append(row)
    _write_csv(args.out, [n for n, _ in _mv_cols(model.dim)], rows)
    return 0


# ---------------------------------------------------------------- selftest

def _selftest_checks():
    checks = []

    def expint_recurrence():
        worst = 0.0
        for nu in (1.5, 2.0, 5.0, 17.25, 50.0, 100.0):
            for z in (1e-6, 1e-3, 0.5, 1.0, 7.0, 100.0, 700.0):
                val = expint_scaled(nu, z)
                nxt = expint_scaled(nu + 1.0, z)
                worst = max(worst, abs(nu * nxt + z * val - 1.0))
                if not (1.0 / (z + nu) < val <= 1.0 / (z + nu - 1.0)):
                    return False, "sandwich violated at nu=%g z=%g" % (nu, z)
        return worst < 1e-12, "recurrence residual %.2e" % worst

    checks.append(("expint recurrence and sandwich bounds", expint_recurrence))

    def inverse_roundtrip():
        worst = 0.0
        for alpha in (1.5, 2.0, 5.0, 50.0):
            for z in (1e-5, 0.3, 4.0, 300.0):
                y = expint_scaled(alpha + 1.0, z)
                zz = expint_scaled_inverse(alpha, y)
                worst = max(worst, abs(zz - z) / max(z, 1e-12))
        return worst < 1e-9, "round-trip rel err %.2e" % worst

    checks.append(("scaled-expint inverse round trip", inverse_roundtrip))

    def closed_form_match():
        spec = RngSpec(1234, 0)
        model = ModelSequence.random_loguniform(40, spec.stream(1))
        traj = build_trajectory(model, 1.0, 0.7, spec)
        states = skf_run(traj, 0.2, 1.3)
        worst = 0.0
        for i, s in enumerate(states):
            c = skf_closed_form(traj, 0.2, 1.3, i)
            worst = max(worst,
                        abs(c.var_analysis - s.var_analysis) / s.var_analysis,
                        abs(c.mean_analysis - s.mean_analysis)
                        / max(abs(s.mean_analysis), 1e-12))
        return worst < 1e-10, "closed-vs-recursive rel err %.2e" % worst

    checks.append(("recursion matches closed forms", closed_form_match))

    def inflation_bounds():
        spec = RngSpec(99, 0)
        model = ModelSequence.random_loguniform(30, spec.stream(1))
        traj = build_trajectory(model, 1.0, 2.0, spec)
        for alpha in (1.5, 4.0, 64.0):
            sched = inflation_schedule(traj, alpha, 0.8, 0.1)
            ts = theta_star(alpha)
            if not np.all((sched.phi >= 1.0 - 1e-12) & (sched.phi <= ts + 1e-12)):
                return False, "phi out of [1, alpha/(alpha-1)] at alpha=%g" % alpha
            if not np.all((sched.theta > 1.0) & (sched.theta <= ts + 1e-12)):
                return False, "theta out of (1, alpha/(alpha-1)] at alpha=%g" % alpha
        return True, "phi, theta within bounds"

    checks.append(("inflation factors within bounds", inflation_bounds))

    def bootstrap_identity():
        spec = RngSpec(7, 0)
        model = ModelSequence.random_loguniform(12, spec.stream(1))
        traj = build_trajectory(model, 0.5, 1.0, spec)
        sched = inflation_schedule(traj, 8.0, 1.0, 0.0)
        means, variances = inflated_reference_run(traj, 0.0, 1.0, sched)
        # theta realized sequentially must equal theta realized in one shot
        worst = 0.0
        for i in range(traj.n_steps + 1):
            u = traj.r_over_S(i)
            one_shot = traj.obs_variance * sched.theta[i] * 1.0 \
                * traj.M2_over_S(i) / (sched.theta[i] * 1.0 + u)
            worst = max(worst, abs(variances[i] - one_shot) / one_shot)
        return worst < 1e-10, "sequential-vs-one-shot rel err %.2e" % worst

    checks.append(("sequential schedule bootstraps one-shot inflation",
                   bootstrap_identity))
    return checks


def cmd_selftest(args):
    ok = True
    for name, fn in _selftest_checks():
        good, detail = fn()
        ok = ok and good
        print("%s: %s (%s)" % ("ok" if good else "FAIL", name, detail))
    print("selftest: %s" % ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


# ---------------------------------------------------------------- parser

def _add_common(sub):
    sub.add_argument("--config", metavar="PATH", default=None,
                     help="JSON experiment config (defaults used when omitted)")
    sub.add_argument("--seed", type=int, default=None, metavar="U64",
                     help="override the config seed")
    sub.add_argument("--out", metavar="PATH", default=None,
                     help="write CSV here instead of stdout")
    sub.add_argument("--threads", type=int, default=1, metavar="N",
                     help="worker threads for per-step computations")
    sub.add_argument("--describe", action="store_true",
                     help="print documentation for every output column and exit")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="filterlab",
        description="Scalar and diagonalizable ensemble filtering laboratory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("skf", cmd_skf, "run the exact scalar filter and its closed forms"),
        ("spenkf", cmd_spenkf, "run the scalar ensemble filter (optionally inflated)"),
        ("mc-verify", cmd_mc_verify,
         "check closed-form discrepancy moments against Monte Carlo"),
        ("inflation-table", cmd_inflation_table,
         "tabulate the exact inflation schedule along a trajectory"),
        ("po-penalty", cmd_po_penalty,
         "perturbed-observation variance penalty and its Monte Carlo checks"),
        ("mv", cmd_mv, "run the diagonalizable multivariate reduction"),
        ("selftest", cmd_selftest, "run built-in consistency checks"),
    ]
    for name, fn, help_text in specs:
        s = sub.add_parser(name, help=help_text)
        _add_common(s)
        s.set_defaults(fn=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not (0 <= args.seed < 2**64):
        print("--seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return 2
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
