"""Self-verification suite behind ``rvb verify``.

Each check returns a :class:`CheckResult`; failures carry the offending
parameter tuple.  Functions are looked up through their modules at call time
so that tests can patch them and watch the suite go red.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import algebra, emission, simulator, states
from .errors import CapacityError

MAX_FAILURES_REPORTED = 10


@dataclass
class CheckResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, case, detail: str):
        if len(self.failures) < MAX_FAILURES_REPORTED:
            self.failures.append({"case": list(case), "detail": detail})
        else:
            self.failures.append(None)

    def as_dict(self) -> dict:
        shown = [f for f in self.failures if f is not None]
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "failure_count": len(self.failures),
            "failures": shown,
        }


def _shapes(max_mu: int, min_mu: int = 1):
    for mu in range(min_mu, max_mu + 1):
        for M in range(mu + 1):
            yield states.SystemShape(M, mu - M)


def check_collapse_is_rvb(max_mu: int = 12, tol: float = 1e-9) -> CheckResult:
    res = CheckResult("collapse_equals_rvb")
    for shape in _shapes(max_mu):
        for p in shape.p_values:
            res.cases += 1
            match = states.states_equal_up_to_phase(
                states.collapsed_state(shape, p), states.rvb_state(shape, p), tol)
            if match is not states.PhaseMatch.EQUAL_SAME_SIGN:
                res.fail((shape.M, shape.N, p), match.value)
    return res


def check_e_lambda_row_schmidt(max_rows: int = 8, tol: float = 1e-9) -> CheckResult:
    res = CheckResult("e_lambda_vs_row_schmidt")
    for M in range(max_rows + 1):
        for N in range(max_rows + 1):
            if M + N == 0:
                continue
            shape = states.SystemShape(M, N)
            for p in shape.p_values:
                res.cases += 1
                coeffs = states.row_schmidt(states.collapsed_state(shape, p)).as_dict()
                for lam, value in coeffs.items():
                    exact = float(algebra.e_lambda(M, N, p, lam))
                    if abs(value - exact) > tol:
                        res.fail((M, N, p, lam), f"row_schmidt={value!r} e_lambda={exact!r}")
                        break
    return res


def check_e_lambda_cg(max_rows: int = 8) -> CheckResult:
    """Exact comparison allowing a single sign per (M, N, p)."""
    res = CheckResult("e_lambda_vs_cg_general")
    for M in range(max_rows + 1):
        for N in range(max_rows + 1):
            for p in range(max(0, M - N), M + 1):
                res.cases += 1
                J = Fraction(N - M, 2) + p
                signs = set()
                for lam in range(p, min(M, N + p) + 1):
                    e = algebra.e_lambda(M, N, p, lam)
                    c = algebra.cg_general(Fraction(M, 2), Fraction(M, 2) - lam, Fraction(N, 2),
                                           lam - Fraction(N, 2) - p, J, -J)
                    if e.radicand != c.radicand:
                        res.fail((M, N, p, lam), f"|e_lambda|^2={e.radicand} cg^2={c.radicand}")
                    signs.add(e.sign * c.sign)
                if len(signs) > 1:
                    res.fail((M, N, p), "relative sign varies with lambda")
                elif signs:
                    res.details[(M, N, p)] = signs.pop()
    return res


def check_triple_oracle(max_mu: int = 12, tol: float = 1e-9) -> CheckResult:
    res = CheckResult("distribution_triple_oracle")
    if max_mu > simulator.BRUTE_FORCE_MAX_SITES:
        raise CapacityError(f"brute-force stage limited to max_mu <= {simulator.BRUTE_FORCE_MAX_SITES}")
    for shape in _shapes(max_mu):
        brute = dict(simulator.brute_force_sector_weights(shape))
        for p in shape.p_values:
            res.cases += 1
            S = Fraction(shape.N - shape.M, 2) + p
            exact = float(emission.emission_probability(shape.M, shape.N, p))
            lowdin = states.project_sector(states.product_state(shape), S).norm_squared()
            bf = brute.get(S, 0.0)
            if max(abs(exact - lowdin), abs(exact - bf), abs(lowdin - bf)) > tol:
                res.fail((shape.M, shape.N, p), f"exact={exact!r} lowdin={lowdin!r} brute={bf!r}")
    return res


def normalization_grid(limit: int = 500):
    """Spot grid for the exact normalization identity: edges plus a stride."""
    values = sorted(set(range(0, 21)) | set(range(0, limit + 1, 37)) | {limit - 1, limit})
    return [(M, N) for M in values for N in values if M + N >= 1]


def check_normalization(limit: int = 500) -> CheckResult:
    res = CheckResult("exact_normalization")
    for M, N in normalization_grid(limit):
        res.cases += 1
        total = emission.emission_distribution(M, N).total()
        if total != 1:
            res.fail((M, N), f"sum={total}")
    return res


def check_endpoints(limit: int = 200) -> CheckResult:
    res = CheckResult("closed_form_endpoints")
    for M in range(limit + 1):
        for N in range(limit + 1):
            if M + N == 0:
                continue
            res.cases += 1
            if M <= N and emission.emission_probability(M, N, 0) != Fraction(N - M + 1, N + 1):
                res.fail((M, N, 0), "P(0) != (N-M+1)/(N+1)")
            if emission.emission_probability(M, N, M) != Fraction(1, algebra.binomial_exact(N + M, M)):
                res.fail((M, N, M), "P(M) != 1/C(N+M, M)")
    return res


def stirling_ratios(Ms):
    return [-math.log2(emission.emission_probability(M, M, M)) / (2 * M) for M in Ms]


def check_stirling() -> CheckResult:
    res = CheckResult("stirling_maximal_emission")
    Ms = list(range(50, 501, 25))
    ratios = stirling_ratios(Ms)
    res.cases = len(Ms)
    if not 0.9 <= ratios[0] <= 1.1:
        res.fail((50,), f"ratio {ratios[0]} outside [0.9, 1.1]")
    for M, a, b in zip(Ms[1:], ratios, ratios[1:]):
        if not (abs(b - 1) < abs(a - 1)):
            res.fail((M,), "ratio not approaching 1 monotonically")
    return res


SCALING_SIZES = (100, 200, 400, 800)


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def check_scaling() -> CheckResult:
    res = CheckResult("phase_transition_scaling")
    Ms = SCALING_SIZES
    cases = [
        (1, "variance", -1.0, 0.15),
        (1, "mean", -0.5, 0.1),
        (2, "variance", -2.0, 0.15),
        (Fraction(1, 2), "variance", -2.0, 0.15),
    ]
    for alpha, what, target, tol in cases:
        res.cases += 1
        pts = [emission.sweep_point(M, alpha) for M in Ms]
        ys = [pt.gamma_var if what == "variance" else pt.gamma_bar for pt in pts]
        slope = loglog_slope(Ms, ys)
        if abs(slope - target) > tol:
            res.fail((str(alpha), what), f"slope {slope:.4f}, expected {target} +- {tol}")
    for alpha, tol in [(Fraction(1, 4), 0.02), (Fraction(1, 2), 0.02), (Fraction(3, 2), 0.02),
                       (2, 0.02), (1, 0.05)]:
        res.cases += 1
        gbar = emission.sweep_point(800, alpha).gamma_bar
        limit = emission.extrapolate_thermo(alpha)
        if abs(gbar - limit) > tol:
            res.fail((str(alpha), 800), f"gamma_bar={gbar:.5f} vs limit {limit}")
    for M in (50, 100, 200):
        res.cases += 1
        peak = emission.emission_distribution(M, M).argmax() / M
        if abs(peak - emission.approx_peak_location(M)) > 2 / M:
            res.fail(("argmax", M), f"argmax gamma {peak} vs {emission.approx_peak_location(M)}")
    return res


def run_all(max_mu: int = 12, tol: float = 1e-9, progress=None) -> list[CheckResult]:
    if max_mu > simulator.BRUTE_FORCE_MAX_SITES:
        raise CapacityError(f"verify supports max_mu <= {simulator.BRUTE_FORCE_MAX_SITES}, got {max_mu}")
    stages = [
        lambda: check_collapse_is_rvb(max_mu, tol),
        lambda: check_e_lambda_row_schmidt(8, tol),
        lambda: check_e_lambda_cg(8),
        lambda: check_triple_oracle(max_mu, tol),
        lambda: check_normalization(500),
        lambda: check_endpoints(200),
        check_stirling,
        check_scaling,
    ]
    results = []
    for stage in stages:
        r = stage()
        if progress:
            progress(r)
        results.append(r)
    return results
