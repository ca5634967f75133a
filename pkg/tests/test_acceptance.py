"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every criterion prints one PASS/FAIL line. Run under pytest (lines are
printed live) or directly with ``python3 -m tests.test_acceptance``.
"""
import functools
import json
import logging
import math
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import norm

from logconcave.core import ConcaveParams, gradient_check, knots_to_params, objective, params_to_knots
from logconcave.core import prepare_sample
from logconcave.distribution import cdf, hazard, make_rng, pdf, sample
from logconcave.mixture import classify, em_fit, gaussian_em_fit
from logconcave.solver import fit_mle
from tests.oracles import ks_statistic, psi_grid, psi_quad

DATA = Path(__file__).parent / "data"


class Result:
    def __init__(self, number, title, ok, detail, seconds, budget=None):
        self.number = number
        self.title = title
        self.ok = ok and (budget is None or seconds < budget)
        self.detail = detail
        self.seconds = seconds
        self.budget = budget

    def line(self):
        budget = f" / budget {self.budget:.0f} s" if self.budget else ""
        status = "PASS" if self.ok else "FAIL"
        return (f"[{status}] criterion {self.number} ({self.title}): {self.detail}; "
                f"{self.seconds:.1f} s{budget}")


def timed(number, title, budget=None):
    def wrap(fn):
        @functools.wraps(fn)
        def run():
            start = time.perf_counter()
            ok, detail = fn()
            return Result(number, title, ok, detail, time.perf_counter() - start, budget)
        return run
    return wrap


def _errors(labels, truth):
    return int(min(np.sum(labels != truth), np.sum(labels == truth)))


# ---------------------------------------------------------------- 1

@timed(1, "objective vs quadrature", budget=10)
def criterion_1():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        x = rng.normal(scale=rng.uniform(0.5, 5), size=n)
        w = rng.uniform(0.1, 3.0, size=n) if rng.random() < 0.5 else None
        s = prepare_sample(x, w)
        span = np.ptp(s.points)
        slopes = np.sort(rng.normal(scale=4 / span, size=s.n - 1))[::-1]
        p = ConcaveParams(float(rng.normal(-math.log(span), 1.0)), slopes)
        ref = psi_quad(s.points, s.weights, params_to_knots(p, s))
        worst = max(worst, abs(objective(p, s).value - ref) / max(abs(ref), 1e-300))
    return worst <= 1e-9, f"max relative deviation {worst:.2e} (tol 1e-9)"


# ---------------------------------------------------------------- 2

@timed(2, "brute-force optimality, n=3", budget=60)
def criterion_2():
    rng = np.random.default_rng(2)
    g = 100  # 100**3 = 10**6 feasible grid points
    worst = -np.inf
    for _ in range(20):
        x = np.sort(rng.normal(scale=rng.uniform(0.5, 3), size=3))
        s = prepare_sample(x)
        fit = fit_mle(s)
        best_solver = objective(knots_to_params(fit.log_density, s), s).value
        span = np.ptp(s.points)
        base = -math.log(span)
        phi1 = np.linspace(base - 4, base + 4, g)
        s2 = np.linspace(-12 / span, 12 / span, g)
        drop = np.linspace(0, 24 / span, g)  # s3 = s2 - drop keeps the grid feasible
        P, S2, D = (a.ravel() for a in np.meshgrid(phi1, s2, drop, indexing="ij"))
        slopes = np.column_stack((S2, S2 - D))
        with np.errstate(over="ignore", invalid="ignore"):
            grid_best = float(np.nanmax(psi_grid(s.points, s.weights, P, slopes)))
        worst = max(worst, grid_best - best_solver)
    return worst <= 1e-4, f"max(grid max - solver) = {worst:.2e} (tol 1e-4)"


# ---------------------------------------------------------------- 3 and 6

@functools.lru_cache(maxsize=1)
def _sandwich_fits():
    rng = np.random.default_rng(3)
    gens = (lambda r, n: r.normal(size=n), lambda r, n: r.gamma(2.0, 1.0, size=n),
            lambda r, n: r.logistic(size=n))
    fits = []
    for i in range(50):
        n = int(rng.integers(100, 1001))
        fits.append(fit_mle(prepare_sample(gens[i % 3](rng, n))))
    return tuple(fits)


@timed(3, "CDF sandwich at knots", budget=120)
def criterion_3():
    worst_low, worst_high = 0.0, 0.0
    for fit in _sandwich_fits():
        n = fit.sample.total_weight
        gap = (fit.sample.ecdf() - fit.cdf_at_knots)[fit.breakpoints()]
        worst_low = min(worst_low, gap.min())
        worst_high = max(worst_high, gap.max() - 1 / n)
    ok = worst_low >= -1e-8 and worst_high <= 1e-8
    return ok, (f"min(F_n - F) = {worst_low:.1e}, max(F_n - F - 1/n) = {worst_high:.1e} "
                f"(slack 1e-8), 50 fits")


@timed(6, "hazard nondecreasing")
def criterion_6():
    worst = np.inf
    for fit in _sandwich_fits():
        x = np.linspace(fit.knots[0], fit.knots[-1], 1001)[:-1]
        h = hazard(fit, x)
        # relative change between consecutive grid points
        worst = min(worst, float(np.min(np.diff(h) / h[1:])))
    # rounding of pdf / sf only
    return worst >= -1e-12, f"min relative increment {worst:.1e} over 50 fits x 1000 points"


# ---------------------------------------------------------------- 4

@timed(4, "empirical rate", budget=300)
def criterion_4():
    grid = np.linspace(-1, 1, 2001)
    truth = norm.pdf(grid)
    sizes = (100, 400, 1600)
    means = []
    for n in sizes:
        errs = []
        for seed in range(20):
            x = np.random.default_rng(seed * 7919 + n).normal(size=n)
            errs.append(np.max(np.abs(pdf(fit_mle(prepare_sample(x)), grid) - truth)))
        means.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0])
    ok = means[0] > means[1] > means[2] and -0.6 <= slope <= -0.2
    return ok, (f"mean sup errors {', '.join(f'{m:.4f}' for m in means)}; "
                f"log-log slope {slope:.3f} (want [-0.6, -0.2])")


# ---------------------------------------------------------------- 5

@timed(5, "sampler KS", budget=30)
def criterion_5():
    m = 100_000
    crit = 1.63 / math.sqrt(m)
    worst = 0.0
    gens = (lambda r: r.normal(size=500), lambda r: r.gamma(2.0, size=500),
            lambda r: r.logistic(size=500), lambda r: r.uniform(size=300),
            lambda r: r.exponential(size=800))
    for seed in range(10):
        fit = fit_mle(prepare_sample(gens[seed % 5](np.random.default_rng(500 + seed))))
        draws = sample(fit, make_rng(seed), m)
        worst = max(worst, ks_statistic(draws, lambda v: cdf(fit, v)))
    return worst < crit, f"max KS {worst:.5f} < {crit:.5f}"


# ---------------------------------------------------------------- 7

@timed(7, "gradient check")
def criterion_7():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 30))
        s = prepare_sample(rng.normal(size=n), rng.uniform(0.2, 2.0, size=n))
        span = np.ptp(s.points)
        # strictly decreasing slopes: an interior point of the cone
        slopes = np.sort(rng.normal(scale=2 / span, size=s.n - 1))[::-1]
        slopes -= 1e-3 * np.arange(s.n - 1) / span
        p = ConcaveParams(float(rng.normal(-math.log(span), 0.5)), slopes)
        worst = max(worst, gradient_check(p, s))
    return worst < 1e-5, f"max relative deviation {worst:.2e} (tol 1e-5)"


# ---------------------------------------------------------------- 8

@timed(8, "EM monotonicity and Gaussian baseline", budget=600)
def criterion_8():
    errs, gerrs = [], []
    worst_drop = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        x = np.concatenate([rng.normal(0, 1, 200), 2.0 + rng.gamma(2.0, 1.0, 200)])
        truth = np.r_[np.zeros(200, int), np.ones(200, int)]
        model = em_fit(x, 2)
        worst_drop = min(worst_drop, float(np.min(np.diff(model.loglik_trace))))
        errs.append(_errors(classify(model, x), truth))
        gerrs.append(_errors(classify(gaussian_em_fit(x, 2), x), truth))
    ok = worst_drop >= -1e-9 and np.mean(errs) <= np.mean(gerrs)
    return ok, (f"largest log-likelihood decrease {-worst_drop:.1e} (slack 1e-9); "
                f"mean misclassified log-concave {np.mean(errs):.2f} vs Gaussian "
                f"{np.mean(gerrs):.2f} of 400")


# ---------------------------------------------------------------- 9

def _cli(args, cwd):
    res = subprocess.run([sys.executable, "-m", "logconcave.cli", *args], cwd=cwd,
                         capture_output=True, check=False)
    return res.returncode, res.stdout


@timed(9, "CLI determinism")
def criterion_9():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        x = np.random.default_rng(9).gamma(2.0, size=300)
        (tmp / "x.csv").write_text("x\n" + "\n".join(format(v, ".17g") for v in x) + "\n")
        xy = np.random.default_rng(10).normal(size=(120, 2))
        xy[60:] += 5
        (tmp / "xy.csv").write_text("\n".join(f"{a:.17g},{b:.17g}" for a, b in xy) + "\n")
        fixture = str(DATA / "separated_clusters.csv")
        code, art = _cli(["fit", "x.csv"], tmp)
        (tmp / "fit.json").write_bytes(art)
        commands = {
            "fit": ["fit", "x.csv"],
            "eval pdf": ["eval", "fit.json", "--grid", "257", "--what", "pdf"],
            "eval cdf": ["eval", "fit.json", "--grid", "257", "--what", "cdf"],
            "eval hazard": ["eval", "fit.json", "--grid", "257", "--what", "hazard"],
            "sample": ["sample", "fit.json", "--m", "5000", "--seed", "42"],
            "cluster univariate": ["cluster", fixture, "--k", "2", "--seed", "3"],
            "cluster gaussian": ["cluster", fixture, "--k", "2", "--mode", "gaussian"],
            "cluster copula": ["cluster", "xy.csv", "--k", "2", "--mode", "copula",
                               "--restarts", "2"],
        }
        differing = []
        for name, args in commands.items():
            first, second = _cli(args, tmp), _cli(args, tmp)
            if first != second or first[0] != 0 or not first[1]:
                differing.append(name)
        json.loads(art)  # the artifact itself must be valid JSON
    ok = code == 0 and not differing
    detail = (f"{len(commands)} subcommand runs byte-identical" if ok
              else f"mismatch or failure in: {', '.join(differing) or 'fit'}")
    return ok, detail


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_acceptance(criterion, capsys):
    logging.disable(logging.WARNING)
    try:
        result = criterion()
    finally:
        logging.disable(logging.NOTSET)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.ok, result.line()


def main():
    logging.disable(logging.WARNING)
    results = [criterion() for criterion in CRITERIA]
    for r in results:
        print(r.line())
    return 0 if all(r.ok for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
