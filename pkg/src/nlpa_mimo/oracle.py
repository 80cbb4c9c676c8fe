"""Brute-force verifiers for the closed-form PA statistics.

* ``mc_bussgang`` simulates the raw polynomial PA on sampled Gaussian
  input and estimates the Bussgang gain and distortion covariance.
* ``isserlis_moment`` evaluates E{phi_m(a) phi_n(b)^*}, with
  phi_k(z) = |z|^{2k} z, by summing over every perfect matching of the
  factors (Isserlis/Wick).
* ``validate_all`` runs the whole suite and reports measured errors.

The ``*_outer_index`` and ``*_from_q1`` helpers reproduce two index variants that disagree with
these oracles; they exist only as negative controls.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from nlpa_mimo.channel import (
    ArrayGeometry,
    PathLossModel,
    array_response,
    dominant_path,
    generate_channel,
)
from nlpa_mimo.distortion import check_hermitian_cov, distortion_covariance, hadamard_power_term
from nlpa_mimo.errors import DomainError, ValidationError
from nlpa_mimo.link_metrics import LinkBudget, se_lower_bound, se_single_rf, spectral_efficiency
from nlpa_mimo.pa_model import REFERENCE_PA, PACoefficients, avg_linear_gain, pa_transfer
from nlpa_mimo.seeding import MC_BLOCK_STREAM, derive_seed
from nlpa_mimo.units import dbm_to_mw

BLOCK_SIZE = 1 << 16
MAX_PAIRING_ORDER = 6


# --- Monte Carlo Bussgang estimator ---

@dataclass
class McEstimate:
    gain_hat: np.ndarray
    cd_hat: np.ndarray
    n_samples: int
    seed: int
    # E{d u^H} with d = x - Gbar u and Gbar the closed-form gain
    cross_closed_form: np.ndarray = field(repr=False, default=None)
    input_cov_hat: np.ndarray = field(repr=False, default=None)


class _Kahan:
    """Compensated running sum of equally shaped arrays."""

    def __init__(self, shape):
        self.s = np.zeros(shape, dtype=complex)
        self.c = np.zeros(shape, dtype=complex)

    def add(self, x):
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def hermitian_sqrt(C) -> np.ndarray:
    C = check_hermitian_cov(C, "C_u")
    w, V = np.linalg.eigh(C)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def _block_moments(S, pa, g_closed, n, seed_block):
    rng = np.random.default_rng(seed_block)
    N = S.shape[0]
    z = (rng.standard_normal((N, n)) + 1j * rng.standard_normal((N, n))) / np.sqrt(2.0)
    u = S @ z
    x = pa_transfer(u, pa)
    y = x - pa.coeffs[0] * u  # nonlinear part; beta_1 u is captured exactly by any Bussgang gain
    d_cf = x - g_closed[:, None] * u
    uH = u.conj().T
    return u @ uH, y @ uH, y @ y.conj().T, d_cf @ uH


def mc_bussgang(C_u, pa: PACoefficients, n_samples: int = 1_000_000, seed: int = 0,
                threads: int = 1) -> McEstimate:
    """Sample u ~ CN(0, C_u) (PA power unit), pass it through the PA, estimate gain and C_d.

    Samples are drawn in fixed blocks of 2^16 with per-block derived seeds and
    reduced in block order with compensated summation, so the result does not
    depend on ``threads``.
    """
    if n_samples < 10_000:
        raise DomainError("n_samples must be at least 1e4")
    S = hermitian_sqrt(C_u)
    N = S.shape[0]
    g_closed = np.atleast_1d(avg_linear_gain(np.clip(np.diag(np.asarray(C_u)).real, 0, None), pa))
    sizes = [BLOCK_SIZE] * (n_samples // BLOCK_SIZE)
    if n_samples % BLOCK_SIZE:
        sizes.append(n_samples % BLOCK_SIZE)
    seeds = [derive_seed(seed, MC_BLOCK_STREAM, b) for b in range(len(sizes))]
    work = lambda b: _block_moments(S, pa, g_closed, sizes[b], seeds[b])  # noqa: E731
    acc = [_Kahan((N, N)) for _ in range(4)]

    def reduce(results):
        for res in results:
            for a, r in zip(acc, res):
                a.add(r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reduce(ex.map(work, range(len(sizes))))
    else:
        reduce(work(b) for b in range(len(sizes)))
    Ruu, Ryu, Ryy, Rdu = (a.s / n_samples for a in acc)
    c = np.diag(Ryu) / np.diag(Ruu).real
    D = np.diag(c)
    Cd = Ryy - Ryu @ D.conj().T - D @ Ryu.conj().T + D @ Ruu @ D.conj().T
    Cd = (Cd + Cd.conj().T) / 2
    return McEstimate(pa.coeffs[0] + c, Cd, n_samples, seed, Rdu, Ruu)


def orthogonality_residual(est: McEstimate, C_u, pa: PACoefficients) -> float:
    """max_{n,k} |E{u_n^* d_k}| / sqrt(P_n E|d_k|^2) with d built from the closed-form gain."""
    P = np.clip(np.diag(np.asarray(C_u)).real, 0, None)
    dpow = np.clip(np.diag(est.cd_hat).real, np.finfo(float).tiny, None)
    return float(np.max(np.abs(est.cross_closed_form) / np.sqrt(np.outer(dpow, P))))


# --- Isserlis pairing enumeration ---

def iter_perfect_matchings(items) -> Iterator[list[tuple]]:
    """Yield every partition of ``items`` into pairs (items are positions, duplicates allowed)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in iter_perfect_matchings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


# factor types in phi_m(a) phi_n(b)^*: a, a*, b, b*
_A, _AC, _B, _BC = range(4)


def _pair_moments(sigma_a_sq, sigma_b_sq, rho) -> np.ndarray:
    M = np.zeros((4, 4), dtype=complex)
    M[_A, _AC] = M[_AC, _A] = sigma_a_sq
    M[_B, _BC] = M[_BC, _B] = sigma_b_sq
    M[_A, _BC] = M[_BC, _A] = rho  # E{a b*}
    M[_AC, _B] = M[_B, _AC] = np.conj(rho)  # E{a* b}
    return M


def isserlis_moment(m: int, n: int, sigma_a_sq: float, sigma_b_sq: float, rho: complex) -> complex:
    """E{phi_m(a) phi_n(b)^*} summed over all perfect matchings of its 2(m+n+1) factors.

    Identical factors are grouped: pairing the first remaining factor with
    any of ``k`` remaining copies of a type contributes ``k`` distinct
    matchings, so the recursion visits every matching exactly once while
    memoizing on the remaining type counts.
    """
    if m < 0 or n < 0:
        raise DomainError("m and n must be nonnegative")
    if m + n > MAX_PAIRING_ORDER:
        raise DomainError(
            f"m+n={m + n} exceeds {MAX_PAIRING_ORDER}: the enumeration would visit "
            f"{_double_factorial(2 * (m + n) + 1)} matchings"
        )
    M = _pair_moments(sigma_a_sq, sigma_b_sq, rho)

    @lru_cache(maxsize=None)
    def rec(counts):
        if not any(counts):
            return 1.0 + 0j
        i = next(t for t in range(4) if counts[t])
        rest = list(counts)
        rest[i] -= 1
        total = 0j
        for j in range(4):
            if rest[j] and M[i, j] != 0:
                nxt = list(rest)
                nxt[j] -= 1
                total += rest[j] * M[i, j] * rec(tuple(nxt))
        return total

    return complex(rec((m + 1, m, n, n + 1)))


def isserlis_moment_bruteforce(m: int, n: int, sigma_a_sq: float, sigma_b_sq: float, rho: complex) -> complex:
    """Same quantity by listing every matching one by one (small m+n only)."""
    if m + n > 3:
        raise DomainError("explicit listing is limited to m+n <= 3")
    M = _pair_moments(sigma_a_sq, sigma_b_sq, rho)
    factors = [_A] * (m + 1) + [_AC] * m + [_B] * n + [_BC] * (n + 1)
    total = 0j
    for matching in iter_perfect_matchings(range(len(factors))):
        term = 1.0 + 0j
        for i, j in matching:
            term *= M[factors[i], factors[j]]
        total += term
    return complex(total)


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2))


def cross_moment_closed_form(m: int, n: int, sigma_a_sq: float, sigma_b_sq: float, rho: complex) -> complex:
    """sum_{q=0}^{min(m,n)} (m+1)!(n+1)!/(q+1) C(m,q) C(n,q) sa^{2(m-q)} sb^{2(n-q)} |rho|^{2q} rho."""
    return _cross_moment_sum(m, n, sigma_a_sq, sigma_b_sq, rho, q_start=0)


def cross_moment_from_q1(m: int, n: int, sigma_a_sq: float, sigma_b_sq: float, rho: complex) -> complex:
    """Negative control: the same sum started at q=1."""
    return _cross_moment_sum(m, n, sigma_a_sq, sigma_b_sq, rho, q_start=1)


def _cross_moment_sum(m, n, sa, sb, rho, q_start):
    total = 0j
    for q in range(q_start, min(m, n) + 1):
        total += (
            math.factorial(m + 1) * math.factorial(n + 1) / (q + 1)
            * math.comb(m, q) * math.comb(n, q)
            * sa ** (m - q) * sb ** (n - q) * abs(rho) ** (2 * q) * rho
        )
    return complex(total)


def gamma_outer_index(P, m: int, pa: PACoefficients):
    """Negative control: distortion kernel with beta_{2m+1} held outside the q-sum."""
    return math.sqrt(1.0 / (m + 1)) * pa.coeffs[m] * sum(
        math.comb(q, m) * math.factorial(q + 1) * np.asarray(P, dtype=float) ** (q - m)
        for q in range(m, pa.order + 1)
    )


def distortion_covariance_outer_index(C_u, pa: PACoefficients) -> np.ndarray:
    C_u = check_hermitian_cov(C_u, "C_u")
    P = np.diag(C_u).real
    C_d = np.zeros_like(C_u)
    for m in range(1, pa.order + 1):
        g = np.atleast_1d(gamma_outer_index(P, m, pa))
        C_d += np.outer(g, g.conj()) * hadamard_power_term(C_u, m)
    return C_d


# --- random test covariances ---

def random_constant_modulus_cov(rng: np.random.Generator, N: int, P: float) -> np.ndarray:
    """P f f^H with |f_n| = 1/sqrt(N) and random phases."""
    f = np.exp(2j * np.pi * rng.random(N)) / np.sqrt(N)
    return P * np.outer(f, f.conj())


def random_full_rank_cov(rng: np.random.Generator, N: int, P: float) -> np.ndarray:
    """Wishart-like covariance with trace P."""
    X = (rng.standard_normal((N, 2 * N)) + 1j * rng.standard_normal((N, 2 * N))) / np.sqrt(2)
    C = X @ X.conj().T
    return P * C / np.trace(C).real


def relative_frobenius(estimate, reference) -> float:
    """||estimate - reference||_F / ||reference||_F; 0 when both vanish, inf when only the reference does."""
    num = float(np.linalg.norm(np.asarray(estimate) - np.asarray(reference)))
    den = float(np.linalg.norm(reference))
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


# --- the full suite ---

@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [asdict(c) for c in self.checks]}, indent=2)


@dataclass(frozen=True)
class ValidationConfig:
    pa: PACoefficients = REFERENCE_PA
    seed: int = 2024
    mc_samples: int = 1_000_000
    gain_powers_mw: tuple[float, ...] = (0.01, 0.1, 1.0, 4.0, 10.0)
    gain_tolerance: float = 5e-3
    cd_nt: int = 4
    cd_branch_power_mw: float = 2.0
    cd_tolerance: float = 0.02
    misindex_gap: float = 0.10
    moment_draws: int = 50
    moment_max_order: int = 3
    moment_tolerance: float = 1e-9
    n_channels: int = 200
    Nt: int = 16
    Nr: int = 16
    L: int = 5
    noise_dbm: float = -105.0
    se_tolerance: float = 1e-9
    threads: int = 1


def _check(name, measured, tol, detail="", passed=None) -> CheckResult:
    ok = measured <= tol if passed is None else passed
    return CheckResult(name, float(measured), float(tol), bool(ok), detail)


def check_bussgang_gain(cfg: ValidationConfig) -> CheckResult:
    worst = 0.0
    for i, P in enumerate(cfg.gain_powers_mw):
        s = cfg.pa.power_scale * P
        est = mc_bussgang(np.array([[s]]), cfg.pa, cfg.mc_samples, derive_seed(cfg.seed, 10, i), cfg.threads)
        g = avg_linear_gain(s, cfg.pa)
        worst = max(worst, abs(est.gain_hat[0] - g) / abs(g))
    return _check("bussgang_gain_vs_monte_carlo", worst, cfg.gain_tolerance,
                  f"max relative error over P in {list(cfg.gain_powers_mw)} mW")


def _cd_cases(cfg: ValidationConfig):
    rng = np.random.default_rng(derive_seed(cfg.seed, 11))
    P = cfg.pa.power_scale * cfg.cd_branch_power_mw * cfg.cd_nt
    return [random_constant_modulus_cov(rng, cfg.cd_nt, P), random_full_rank_cov(rng, cfg.cd_nt, P)]


def check_distortion_covariance(cfg: ValidationConfig) -> tuple[CheckResult, CheckResult]:
    worst, misindexed_best, separation = 0.0, np.inf, np.inf
    for i, C_u in enumerate(_cd_cases(cfg)):
        est = mc_bussgang(C_u, cfg.pa, cfg.mc_samples, derive_seed(cfg.seed, 12, i), cfg.threads)
        cd = distortion_covariance(C_u, cfg.pa)
        cd_alt = distortion_covariance_outer_index(C_u, cfg.pa)
        worst = max(worst, relative_frobenius(cd, est.cd_hat))
        misindexed_best = min(misindexed_best, relative_frobenius(cd_alt, est.cd_hat))
        separation = min(separation, relative_frobenius(cd_alt, cd))
    main = _check("distortion_covariance_vs_monte_carlo", worst, cfg.cd_tolerance,
                  "relative Frobenius error, rank-one constant-modulus and full-rank C_u")
    if separation <= cfg.misindex_gap:
        neg = _check("outer_index_gamma_rejected", misindexed_best, cfg.misindex_gap,
                     "not applicable: both indexings give the same C_d for these coefficients", passed=True)
    else:
        neg = _check("outer_index_gamma_rejected", misindexed_best, cfg.misindex_gap,
                     "beta_{2m+1} held outside the sum must miss Monte Carlo by more than the gap",
                     passed=misindexed_best > cfg.misindex_gap)
    return main, neg


def cross_moment_errors(draws: int, max_order: int, seed: int, variant=cross_moment_closed_form) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        sa, sb = rng.uniform(0.2, 3.0, 2)
        # |rho| <= sqrt(sa sb) keeps (a, b) a valid Gaussian pair
        rho = np.sqrt(sa * sb) * rng.uniform(0.05, 1.0) * np.exp(2j * np.pi * rng.random())
        for m in range(max_order + 1):
            for n in range(max_order + 1):
                ref = isserlis_moment(m, n, sa, sb, rho)
                worst = max(worst, abs(variant(m, n, sa, sb, rho) - ref) / abs(ref))
    return worst


def check_cross_moment(cfg: ValidationConfig) -> tuple[CheckResult, CheckResult]:
    seed = derive_seed(cfg.seed, 13)
    err = cross_moment_errors(cfg.moment_draws, cfg.moment_max_order, seed)
    err_q1 = cross_moment_errors(cfg.moment_draws, cfg.moment_max_order, seed, cross_moment_from_q1)
    return (
        _check("cross_moment_closed_form_vs_pairings", err, cfg.moment_tolerance,
               f"all m, n <= {cfg.moment_max_order}, {cfg.moment_draws} draws"),
        _check("cross_moment_q_from_1_rejected", err_q1, cfg.moment_tolerance,
               "sum starting at q=1 must disagree with the enumeration", passed=err_q1 > 1e-3),
    )


def check_rank_one_collapse(cfg: ValidationConfig) -> CheckResult:
    rng = np.random.default_rng(derive_seed(cfg.seed, 14))
    worst = 0.0
    for N in (2, 4, 8, 16):
        for m in range(1, 4):
            alpha = rng.uniform(0.1, 2.0)
            z = np.sqrt(alpha) * np.exp(2j * np.pi * rng.random(N))
            C = np.outer(z, z.conj())
            ref = alpha ** (2 * m) * C
            worst = max(worst, relative_frobenius(hadamard_power_term(C, m), ref))
    return _check("hadamard_rank_one_collapse", worst, 1e-12)


def _random_channels(cfg: ValidationConfig, L: int, stream: int):
    pl = PathLossModel()
    tx, rx = ArrayGeometry(cfg.Nt), ArrayGeometry(cfg.Nr)
    for i in range(cfg.n_channels):
        yield generate_channel(derive_seed(cfg.seed, stream, i), L, tx, rx, pl)


def check_single_rf_consistency(cfg: ValidationConfig) -> CheckResult:
    noise = float(dbm_to_mw(cfg.noise_dbm))
    rng = np.random.default_rng(derive_seed(cfg.seed, 15))
    worst = 0.0
    for ch in _random_channels(cfg, cfg.L, 16):
        P = float(dbm_to_mw(rng.uniform(-20.0, 15.0)))
        phi, _, _ = dominant_path(ch)
        a = array_response(phi, ch.tx_geometry)
        general = spectral_efficiency(ch.H, P * np.outer(a, a.conj()), cfg.pa, noise)
        worst = max(worst, abs(general - se_single_rf(P, ch, cfg.pa, noise)))
    return _check("single_rf_closed_form_vs_log_det", worst, cfg.se_tolerance, "absolute b/s/Hz")


def check_lower_bound(cfg: ValidationConfig) -> tuple[CheckResult, CheckResult]:
    noise = float(dbm_to_mw(cfg.noise_dbm))
    rng = np.random.default_rng(derive_seed(cfg.seed, 17))
    gap_l1 = 0.0
    for ch in _random_channels(cfg, 1, 18):
        P = float(dbm_to_mw(rng.uniform(-20.0, 15.0)))
        gap_l1 = max(gap_l1, abs(se_single_rf(P, ch, cfg.pa, noise) - se_lower_bound(P, ch, cfg.pa, noise)))
    excess = -np.inf
    for ch in _random_channels(cfg, cfg.L, 19):
        P = float(dbm_to_mw(rng.uniform(-20.0, 15.0)))
        excess = max(excess, se_lower_bound(P, ch, cfg.pa, noise) - se_single_rf(P, ch, cfg.pa, noise))
    return (
        _check("lower_bound_tight_single_path", gap_l1, cfg.se_tolerance),
        _check("lower_bound_below_closed_form", max(excess, 0.0), 1e-12,
               f"max(bound - SE) over L={cfg.L} channels"),
    )


def validate_all(cfg: Optional[ValidationConfig] = None) -> ValidationReport:
    cfg = cfg or ValidationConfig()
    checks = [check_bussgang_gain(cfg)]
    checks.extend(check_distortion_covariance(cfg))
    checks.extend(check_cross_moment(cfg))
    checks.append(check_rank_one_collapse(cfg))
    checks.append(check_single_rf_consistency(cfg))
    checks.extend(check_lower_bound(cfg))
    return ValidationReport(checks)


def raise_if_failed(report: ValidationReport) -> None:
    if not report.passed:
        raise ValidationError("validation failed: " + ", ".join(report.failed()))
