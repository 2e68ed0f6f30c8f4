"""Photon-counting statistics and state discrimination.

Counting model per ancilla site: a trapped excited atom scatters photons
as a Poisson process with raw time constant ``t_photon`` and is lost from
its trap with time constant ``t_loss``; scattered laser light adds an
independent Poisson background with raw constant ``t_bg``.  The camera
registers only a fraction ``detection_fraction`` of photons from either
process, so the detected-count time constants are the raw ones divided
by that fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

from .dynamics import ExcitationDistributions

TRUNCATION_TAIL = 1e-12
PMF_FLOOR = 1e-300


@dataclass(frozen=True)
class ReadoutParams:
    t_meas: float                    # integration window, us
    t_photon: float = 0.013          # raw fluorescence photon time, us
    t_bg: float = 0.19               # raw background photon time, us
    t_loss: float = 200.0            # trap loss time, us
    dt: float = 1e-3                 # Markov step, us
    detection_fraction: float = 7.96e-3

    def __post_init__(self):
        for name in ("t_photon", "t_bg", "t_loss", "dt", "detection_fraction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.t_meas < 0:
            raise ValueError("t_meas must be nonnegative")
        if self.dt > 0.2 * min(self.t_photon_eff, self.t_bg_eff):
            raise ValueError("Markov step dt too coarse for the count time constants")

    @property
    def t_photon_eff(self) -> float:
        """Detected-count time constant of the fluorescence stream."""
        return self.t_photon / self.detection_fraction

    @property
    def t_bg_eff(self) -> float:
        """Detected-count time constant of the background stream."""
        return self.t_bg / self.detection_fraction

    def at(self, t_meas: float) -> "ReadoutParams":
        return replace(self, t_meas=t_meas)


@dataclass(frozen=True)
class CountDistribution:
    """Truncated pmf over counts 0..len(pmf)-1 plus recorded tail mass."""

    pmf: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if np.any(pmf < -1e-15):
            raise ValueError("pmf entries must be nonnegative")
        object.__setattr__(self, "pmf", np.clip(pmf, 0.0, None))
        total = float(self.pmf.sum()) + self.tail
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"pmf + tail = {total!r}, expected 1")

    def mean(self) -> float:
        return float(np.arange(len(self.pmf)) @ self.pmf)


def _truncate(pmf: np.ndarray, extra_tail: float = 0.0,
              tol: float = TRUNCATION_TAIL) -> CountDistribution:
    """Drop the upper tail once the cumulative remainder is below tol."""
    total = pmf.sum() + extra_tail
    rev_tail = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]]) + extra_tail
    keep = np.nonzero(rev_tail >= tol)[0]
    cut = (int(keep[-1]) + 2) if keep.size else 1
    cut = min(cut, len(pmf))
    pmf = pmf[:cut].copy()
    tail = float(total - pmf.sum())
    # guard tiny negative round-off
    return CountDistribution(pmf, max(tail, 0.0) if abs(tail) < 1e-12 else tail)


def convolve_counts(a: CountDistribution, b: CountDistribution,
                    tol: float = TRUNCATION_TAIL) -> CountDistribution:
    pmf = np.convolve(a.pmf, b.pmf)
    extra = a.tail + b.tail - a.tail * b.tail
    return _truncate(pmf, extra_tail=extra, tol=tol)


# -- incomplete gamma ------------------------------------------------------


def regularized_lower_gamma_int(n_plus_1: int, x: float) -> float:
    """P(n+1, x) = gamma(n+1, x) / n!  for integer order, computed stably.

    Equals the survival function of a Poisson(x) variable at n, evaluated
    from whichever side of the mode avoids cancellation.
    """
    n = int(n_plus_1) - 1
    if n < 0:
        raise ValueError("order must be a positive integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x > n + 1:
        # 1 - sum_{k<=n} pmf: the subtracted sum is < 1/2, no cancellation
        s = 0.0
        for k in range(n + 1):
            s += math.exp(k * math.log(x) - x - math.lgamma(k + 1))
        return 1.0 - s
    # sum the upper terms directly until they stop contributing
    total = 0.0
    k = n + 1
    term = math.exp(k * math.log(x) - x - math.lgamma(k + 1))
    while term > 0.0 and (total == 0.0 or term > 1e-18 * total):
        total += term
        k += 1
        term *= x / k
    return total


def lower_incomplete_gamma_int(n_plus_1: int, x: float) -> float:
    """gamma(n+1, x) = n! (1 - e^-x sum_{k<=n} x^k/k!) for integer order."""
    reg = regularized_lower_gamma_int(n_plus_1, x)
    if reg == 0.0:
        return 0.0
    return math.exp(math.lgamma(n_plus_1) + math.log(reg))


# -- single-site distributions ---------------------------------------------


def _p_atom_pmf(params: ReadoutParams, m_max: int) -> np.ndarray:
    """Detected-count pmf of one excited atom, loss time marginalized out."""
    t = params.t_meas
    tp, tl = params.t_photon_eff, params.t_loss
    lam = 1.0 / tp + 1.0 / tl
    n = np.arange(m_max + 1)
    reg = np.array([regularized_lower_gamma_int(k + 1, lam * t) for k in n])
    lost = (tp / (tl + tp)) * (tl / (tl + tp)) ** n * reg
    survived = math.exp(-t / tl) * poisson.pmf(n, t / tp)
    return lost + survived


def p_atom_analytic(params: ReadoutParams) -> CountDistribution:
    """Closed-form fluorescence-count distribution for a single excited atom."""
    if params.t_meas == 0.0:
        return CountDistribution(np.array([1.0]))
    mean = params.t_meas / params.t_photon_eff
    m_max = int(mean + 12.0 * math.sqrt(mean + 1.0) + 40.0)
    pmf = _p_atom_pmf(params, m_max)
    while 1.0 - pmf.sum() > TRUNCATION_TAIL:
        m_max *= 2
        pmf = _p_atom_pmf(params, m_max)
        if m_max > 10_000_000:
            raise RuntimeError("single-atom pmf failed to normalize")
    if abs(pmf.sum() - 1.0) > 1e-8:
        raise RuntimeError(f"single-atom pmf sums to {pmf.sum()!r}")
    return _truncate(pmf)


def background_distribution(params: ReadoutParams) -> CountDistribution:
    """Detected background counts at one site: Poisson(t_meas / t_bg_eff)."""
    mu = params.t_meas / params.t_bg_eff
    if mu == 0.0:
        return CountDistribution(np.array([1.0]))
    m_max = int(mu + 12.0 * math.sqrt(mu + 1.0) + 40.0)
    pmf = poisson.pmf(np.arange(m_max + 1), mu)
    return _truncate(pmf)


def site_distributions(params: ReadoutParams) -> tuple[CountDistribution, CountDistribution]:
    """(P, Q): counts at a site with / without an excited atom."""
    bg = background_distribution(params)
    p = convolve_counts(p_atom_analytic(params), bg)
    return p, bg


# -- aggregated statistics --------------------------------------------------


def aggregated_distributions(
    dists: ExcitationDistributions | tuple[np.ndarray, np.ndarray],
    params: ReadoutParams,
    n_sites: int,
) -> tuple[CountDistribution, CountDistribution]:
    """Total-count distributions q^|0>, q^|1> over the whole register.

    q^|s> mixes, with weights p_n^|s>, the n-fold convolution of the
    single-atom distribution with the N-fold convolution of the
    per-site background.
    """
    if isinstance(dists, ExcitationDistributions):
        p0, p1 = dists.p0, dists.p1
    else:
        p0, p1 = dists
    if len(p0) != n_sites + 1 or len(p1) != n_sites + 1:
        raise ValueError("excitation distributions must cover n = 0..N")

    bg = background_distribution(params)
    bg_total = bg
    for _ in range(n_sites - 1):
        bg_total = convolve_counts(bg_total, bg)

    atom = p_atom_analytic(params)
    component = bg_total
    components = [component]
    for _ in range(n_sites):
        component = convolve_counts(component, atom)
        components.append(component)

    out = []
    for weights in (p0, p1):
        m_max = max(len(c.pmf) for c in components)
        pmf = np.zeros(m_max)
        tail = 0.0
        for w, c in zip(weights, components):
            pmf[: len(c.pmf)] += w * c.pmf
            tail += w * c.tail
        out.append(CountDistribution(pmf, tail))
    return out[0], out[1]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """TVD of two pmfs over nonnegative integers (zero-padded to match)."""
    m = max(len(p), len(q))
    p = np.pad(np.asarray(p, dtype=float), (0, m - len(p)))
    q = np.pad(np.asarray(q, dtype=float), (0, m - len(q)))
    return float(0.5 * np.abs(p - q).sum())


def measurement_infidelity(q0: CountDistribution, q1: CountDistribution) -> float:
    """IF = 1/2 - (1/4) sum_m |q_m^0 - q_m^1|: Bayes error at equal priors."""
    m = max(len(q0.pmf), len(q1.pmf))
    a = np.pad(q0.pmf, (0, m - len(q0.pmf)))
    b = np.pad(q1.pmf, (0, m - len(q1.pmf)))
    tvd = 0.5 * (np.abs(a - b).sum() + abs(q0.tail - q1.tail))
    return float(0.5 - 0.5 * tvd)


# -- Markov-chain sampler ----------------------------------------------------


def markov_sample(
    n_excited: int,
    n_sites: int,
    params: ReadoutParams,
    seed: int | np.random.Generator,
    size: int = 1,
) -> np.ndarray:
    """Per-site detected counts from the discrete-time Markov process.

    Each step an excited, still-trapped ancilla produces a detected count
    with probability dt/T_photon_eff; every site independently accrues a
    background count with probability dt/T_bg_eff; an excited ancilla is
    lost with probability dt/T_loss and then emits nothing further.  The
    chain is sampled exactly through its geometric/binomial law rather
    than by looping over steps.
    """
    if n_excited > n_sites:
        raise ValueError("cannot have more excited atoms than sites")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_steps = math.ceil(params.t_meas / params.dt)
    p_ph = params.dt / params.t_photon_eff
    p_bg = params.dt / params.t_bg_eff
    p_loss = params.dt / params.t_loss

    counts = rng.binomial(n_steps, p_bg, size=(size, n_sites))
    if n_excited > 0 and n_steps > 0:
        loss_step = rng.geometric(p_loss, size=(size, n_excited))
        active = np.minimum(loss_step, n_steps)
        counts[:, :n_excited] += rng.binomial(active, p_ph)
    return counts[0] if size == 1 else counts


# -- maximum-likelihood discrimination --------------------------------------


def _site_log_pmfs(params: ReadoutParams, m_max: int) -> tuple[np.ndarray, np.ndarray]:
    """log P(m), log Q(m) for m = 0..m_max, floored against impossible counts."""
    mu = params.t_meas / params.t_bg_eff
    m = np.arange(m_max + 1)
    log_q = poisson.logpmf(m, mu) if mu > 0 else np.where(m == 0, 0.0, -np.inf)
    atom = _p_atom_pmf(params, m_max)
    bg = np.exp(log_q)
    p = np.convolve(atom, bg)[: m_max + 1]
    log_p = np.log(np.clip(p, PMF_FLOOR, None))
    log_q = np.clip(log_q, math.log(PMF_FLOOR), None)
    return log_p, log_q


def log_elementary_symmetric(log_r: np.ndarray) -> np.ndarray:
    """log e_n(r_1..r_N) for each row of log ratios, by the stable recurrence."""
    log_r = np.atleast_2d(log_r)
    n_rec, n_sites = log_r.shape
    le = np.full((n_rec, n_sites + 1), -np.inf)
    le[:, 0] = 0.0
    for i in range(n_sites):
        le[:, 1:] = np.logaddexp(le[:, 1:], log_r[:, i, None] + le[:, :-1])
    return le


def _classify_batch(
    records: np.ndarray,
    p0: np.ndarray,
    p1: np.ndarray,
    log_p: np.ndarray,
    log_q: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized log-likelihood pair and MLE decision for many records."""
    records = np.atleast_2d(records)
    n_sites = records.shape[1]
    log_r = log_p[records] - log_q[records]
    le = log_elementary_symmetric(log_r)
    log_binom = (
        gammaln(n_sites + 1)
        - gammaln(np.arange(n_sites + 1) + 1)
        - gammaln(n_sites - np.arange(n_sites + 1) + 1)
    )
    base = log_q[records].sum(axis=1)
    lls = []
    for p_n in (p0, p1):
        with np.errstate(divide="ignore"):
            log_w = np.log(np.asarray(p_n, dtype=float))
        lls.append(base + logsumexp(le + (log_w - log_binom)[None, :], axis=1))
    ll0, ll1 = lls
    return (ll1 >= ll0).astype(int), np.stack([ll0, ll1], axis=1)


def mle_classify(
    record: np.ndarray,
    p0: np.ndarray,
    p1: np.ndarray,
    p_site: CountDistribution,
    q_site: CountDistribution,
    params: ReadoutParams,
) -> tuple[int, tuple[float, float]]:
    """Atom-resolved MLE decision for one measurement record.

    Returns the estimated logical state (ties resolve to 1) and the pair
    of log-likelihoods.  ``p_site``/``q_site`` are accepted for interface
    symmetry; counts beyond their truncation use the analytic tails.
    """
    if np.allclose(p0, p1):
        raise ValueError("identical excitation distributions: classification is meaningless")
    record = np.asarray(record, dtype=int)
    log_p, log_q = _site_log_pmfs(params, int(record.max(initial=0)))
    s_hat, ll = _classify_batch(record[None, :], p0, p1, log_p, log_q)
    return int(s_hat[0]), (float(ll[0, 0]), float(ll[0, 1]))


def _sample_records(
    p_n: np.ndarray,
    p_site: CountDistribution,
    q_site: CountDistribution,
    n_sites: int,
    n_records: int,
    rng: np.random.Generator,
) -> np.ndarray:
    n_exc = rng.choice(len(p_n), size=n_records, p=p_n / p_n.sum())
    q_pmf = q_site.pmf / q_site.pmf.sum()
    p_pmf = p_site.pmf / p_site.pmf.sum()
    counts_q = rng.choice(len(q_pmf), size=(n_records, n_sites), p=q_pmf)
    counts_p = rng.choice(len(p_pmf), size=(n_records, n_sites), p=p_pmf)
    # the likelihood is permutation invariant, so excited atoms can occupy
    # the leading sites without loss of generality
    mask = np.arange(n_sites)[None, :] < n_exc[:, None]
    return np.where(mask, counts_p, counts_q)


def mle_infidelity(
    p0: np.ndarray,
    p1: np.ndarray,
    params: ReadoutParams,
    n_sites: int,
    n_records: int,
    seed: int | np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of the atom-resolved MLE error, with stderr."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p_site, q_site = site_distributions(params)
    m_max = len(p_site.pmf) + len(q_site.pmf)
    log_p, log_q = _site_log_pmfs(params, m_max)
    err_rates = []
    for truth, p_n in ((0, p0), (1, p1)):
        records = _sample_records(p_n, p_site, q_site, n_sites, n_records, rng)
        s_hat, _ = _classify_batch(records, p0, p1, log_p, log_q)
        err_rates.append(float(np.mean(s_hat != truth)))
    value = 0.5 * (err_rates[0] + err_rates[1])
    stderr = 0.5 * math.sqrt(
        sum(e * (1.0 - e) / n_records for e in err_rates)
    )
    return value, stderr
