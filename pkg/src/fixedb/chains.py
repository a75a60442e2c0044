"""Reference targets and samplers.

* a toy bimodal-uniform target with an adaptive random walk Metropolis
  whose scale is tuned by an acceptance-rate rule (the sampler whose
  adaptation parameter can converge to distinct random limits),
* an AR(1) chain with known asymptotic variance (oracle chain),
* a d-dimensional adaptive RWM with covariance adaptation and the 0.23
  acceptance rule,
* a Bayesian logistic-regression posterior plus a synthetic data
  generator,
* an adaptive Metropolis-within-Gibbs sampler for a hierarchical Poisson
  random-effects model.

Every sampler is a deterministic function of (config, seed): a single
NumPy generator drives the whole run, so identical inputs reproduce the
path bit for bit. Distinct runs use independent seed-derived streams and
may execute concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.signal import lfilter
from scipy.special import expit

from fixedb.exceptions import DomainError

# ---------------------------------------------------------------------------
# chain containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainRun:
    """Output of one sampler run: h(X_k) after burn-in plus traces."""

    h_path: np.ndarray
    theta_trace: np.ndarray
    accept_trace: np.ndarray
    seed: int
    model_id: str
    n_total: int
    burn_in: int
    state_path: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def export_csv(self, path) -> None:
        """Write h_path as a single-column CSV with a JSON sidecar."""
        path = str(path)
        lines = ["h"]
        lines.extend(repr(float(v)) for v in self.h_path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        sidecar = {
            "seed": self.seed,
            "model_id": self.model_id,
            "n_total": self.n_total,
            "burn_in": self.burn_in,
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)


@dataclass(frozen=True)
class SamplerConfig:
    """Shared sampler settings.

    The adaptation step size is ``gamma_n = c_gamma * n**(-kappa)``; the
    exponent must exceed 1/2 for the diminishing-adaptation arguments to
    apply, and the adaptation parameter is projected onto ``bounds``.
    """

    n_total: int
    burn_in: int = 0
    kappa: float = 0.7
    c_gamma: float = 1.0
    target_rate: float = 0.23
    initial_state: object = None
    initial_param: float | None = None
    bounds: tuple[float, float] | None = None
    keep_states: bool = False

    def validate(self) -> None:
        if self.n_total < 1 or not 0 <= self.burn_in < self.n_total:
            raise DomainError("need 0 <= burn_in < n_total")
        if not 0.5 < self.kappa <= 1.0:
            raise DomainError("kappa must lie in (0.5, 1]")
        if self.c_gamma <= 0:
            raise DomainError("c_gamma must be positive")
        if not 0.0 < self.target_rate < 1.0:
            raise DomainError("target_rate must lie in (0, 1)")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DomainError("bounds must be finite with lower < upper")

    def gamma(self, n: int) -> float:
        return self.c_gamma * float(n) ** (-self.kappa)


# ---------------------------------------------------------------------------
# toy bimodal-uniform target
# ---------------------------------------------------------------------------

TOY_BETA = 0.75
TOY_ISLANDS = ((-TOY_BETA - 1.0, -TOY_BETA), (TOY_BETA, TOY_BETA + 1.0))
TOY_THETA_MIN = 2.0 * TOY_BETA
TOY_DEFAULT_BOUNDS = (1.6, 40.0)


def _in_toy_support(x: float) -> bool:
    (a1, b1), (a2, b2) = TOY_ISLANDS
    return a1 <= x <= b1 or a2 <= x <= b2


def _overlap_integral(c: float, d: float, a: float, b: float,
                      theta: float) -> float:
    # int_c^d max(0, min(b, x+theta) - max(a, x-theta)) dx. The integrand
    # is piecewise linear with kinks only at {a-th, b-th, a+th, b+th}, so
    # trapezoids on those segments are exact.
    pts = sorted({c, d} | {p for p in (a - theta, b - theta, a + theta,
                                       b + theta) if c < p < d})

    def f(x):
        return max(0.0, min(b, x + theta) - max(a, x - theta))

    return sum(0.5 * (f(lo) + f(hi)) * (hi - lo)
               for lo, hi in zip(pts[:-1], pts[1:]))


def toy_acceptance_rate(theta: float) -> float:
    """Stationary acceptance rate of the frozen-scale toy sampler.

    With a uniform target on the two islands and a uniform window proposal
    of half-width theta, a proposal is accepted iff it lands back in the
    support, so the stationary rate is the expected fraction of the window
    covered by the support. Exact piecewise integration; the quadrature
    cross-check lives in the test suite.
    """
    if theta <= TOY_THETA_MIN:
        raise DomainError(f"toy sampler needs theta > {TOY_THETA_MIN}")
    total = 0.0
    for frm in TOY_ISLANDS:
        for to in TOY_ISLANDS:
            total += _overlap_integral(frm[0], frm[1], to[0], to[1], theta)
    # target density is 0.5 on the islands; proposal density 1/(2 theta)
    return 0.5 * total / (2.0 * theta)


def toy_acceptance_rate_quad(theta: float) -> float:
    """Quadrature route for the same quantity (independent cross-check)."""
    if theta <= TOY_THETA_MIN:
        raise DomainError(f"toy sampler needs theta > {TOY_THETA_MIN}")

    def rate_from(x):
        acc = 0.0
        for a, b in TOY_ISLANDS:
            acc += max(0.0, min(b, x + theta) - max(a, x - theta))
        return acc / (2.0 * theta)

    total = 0.0
    for a, b in TOY_ISLANDS:
        val, _ = quad(rate_from, a, b, epsabs=1e-12, limit=200)
        total += val
    return 0.5 * total


def toy_acceptance_roots(level: float, theta_max: float = 50.0,
                         grid: int = 20000, tol: float = 1e-10,
                         ) -> list[float]:
    """All solutions of ``acceptance_rate(theta) = level`` above the
    irreducibility threshold, by bracketing on a fine grid + bisection."""
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    lo = TOY_THETA_MIN + 1e-9
    thetas = np.linspace(lo, theta_max, grid)
    vals = np.array([toy_acceptance_rate(t) - level for t in thetas])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        a, b = thetas[i], thetas[i + 1]
        fa = vals[i]
        while b - a > tol:
            mid = 0.5 * (a + b)
            fm = toy_acceptance_rate(mid) - level
            if fa * fm <= 0:
                b = mid
            else:
                a, fa = mid, fm
        roots.append(0.5 * (a + b))
    for i in np.flatnonzero(vals == 0.0):
        roots.append(float(thetas[i]))
    return sorted(roots)


def toy_adaptive_rwm(config: SamplerConfig, seed: int) -> ChainRun:
    """Adaptive RWM on the toy target, tuning the proposal half-width.

    The scale follows the stochastic-approximation recursion
    ``log th <- log th + gamma_n (A_n - target)`` with A_n the realized
    accept indicator, projected onto the configured bounds.
    """
    config.validate()
    bounds = config.bounds if config.bounds is not None else TOY_DEFAULT_BOUNDS
    lo, hi = bounds
    if lo <= TOY_THETA_MIN:
        raise DomainError(f"lower bound must exceed {TOY_THETA_MIN}")
    theta = config.initial_param if config.initial_param is not None else 2.0
    if not lo <= theta <= hi:
        raise DomainError("initial theta must lie within the bounds")
    x = config.initial_state if config.initial_state is not None else 1.0
    x = float(x)
    if not _in_toy_support(x):
        raise DomainError("initial state must lie in the target support")

    rng = np.random.default_rng(seed)
    n = config.n_total
    incr = rng.uniform(-1.0, 1.0, size=n)
    h = np.empty(n)
    thetas = np.empty(n)
    accept = np.empty(n)
    log_lo, log_hi = math.log(lo), math.log(hi)
    log_theta = math.log(theta)
    target = config.target_rate
    c_gamma, kappa = config.c_gamma, config.kappa
    n_acc = 0
    for i in range(n):
        y = x + theta * incr[i]
        acc = _in_toy_support(y)
        if acc:
            x = y
            n_acc += 1
        gamma = c_gamma * (i + 1.0) ** (-kappa)
        log_theta += gamma * ((1.0 if acc else 0.0) - target)
        if log_theta < log_lo:
            log_theta = log_lo
        elif log_theta > log_hi:
            log_theta = log_hi
        theta = math.exp(log_theta)
        h[i] = x
        thetas[i] = theta
        accept[i] = n_acc / (i + 1.0)
    return ChainRun(
        h_path=h[config.burn_in:],
        theta_trace=thetas,
        accept_trace=accept,
        seed=seed,
        model_id="toy",
        n_total=n,
        burn_in=config.burn_in,
        state_path=h.copy() if config.keep_states else None,
        info={"terminal_theta": float(thetas[-1]),
              "target_rate": target},
    )


# ---------------------------------------------------------------------------
# AR(1) oracle chain
# ---------------------------------------------------------------------------


def ar1_sigma2(rho: float) -> float:
    """Asymptotic variance of the mean of a standardized AR(1) chain."""
    if not -1.0 < rho < 1.0:
        raise DomainError("|rho| must be < 1")
    return (1.0 + rho) / (1.0 - rho)


def ar1_chain(rho: float, n: int, seed: int, normalize: bool = False,
              ) -> ChainRun:
    """Stationary AR(1) chain X_k = rho X_{k-1} + sqrt(1-rho^2) xi_k.

    With ``normalize`` the path is rescaled by the known asymptotic
    standard deviation so the mean's asymptotic variance is exactly 1.
    """
    if not -1.0 < rho < 1.0:
        raise DomainError("|rho| must be < 1")
    if n < 1:
        raise DomainError("n must be positive")
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal()
    innov = rng.standard_normal(n) * math.sqrt(1.0 - rho * rho)
    x = lfilter([1.0], [1.0, -rho], innov, zi=np.array([rho * x0]))[0]
    if normalize:
        x = x / math.sqrt(ar1_sigma2(rho))
    return ChainRun(
        h_path=x,
        theta_trace=np.empty(0),
        accept_trace=np.empty(0),
        seed=seed,
        model_id=f"ar1:{rho:g}" + (":norm" if normalize else ""),
        n_total=n,
        burn_in=0,
        info={"rho": rho, "sigma2": 1.0 if normalize else ar1_sigma2(rho)},
    )


# ---------------------------------------------------------------------------
# adaptive RWM with covariance adaptation
# ---------------------------------------------------------------------------

_SIGMA_JITTER = 1e-6
_LOG_LAMBDA_BOUNDS = (-10.0, 10.0)


def adaptive_rwm(log_target, dim: int, config: SamplerConfig, seed: int,
                 h=None) -> ChainRun:
    """Adaptive Metropolis: Gaussian proposals with covariance
    ``lambda_n * (Sigma_n + 1e-6 I)``.

    Robbins-Monro recursions track the target mean and covariance, and the
    global scale follows the acceptance-probability rule
    ``log lam <- log lam + gamma_n (A_n - target)`` with
    ``A_n = min(1, acceptance ratio)``, log-scale projected onto bounds.

    ``h`` maps states to the recorded scalar (first coordinate when None).
    """
    config.validate()
    if dim < 1:
        raise DomainError("dim must be >= 1")
    x = (np.zeros(dim) if config.initial_state is None
         else np.asarray(config.initial_state, dtype=float).copy())
    if x.shape != (dim,):
        raise DomainError(f"initial state must have shape ({dim},)")
    lp = float(log_target(x))
    if not np.isfinite(lp):
        raise DomainError("log_target is not finite at the initial state")

    lam0 = (config.initial_param if config.initial_param is not None
            else 2.38**2 / dim)
    log_lo, log_hi = (config.bounds if config.bounds is not None
                      else _LOG_LAMBDA_BOUNDS)
    log_lam = float(np.clip(math.log(lam0), log_lo, log_hi))

    rng = np.random.default_rng(seed)
    n = config.n_total
    mu = x.copy()
    sigma = np.eye(dim)
    eye = np.eye(dim)
    h_fn = (lambda state: state[0]) if h is None else h

    h_out = np.empty(n)
    lam_trace = np.empty(n)
    accept = np.empty(n)
    states = np.empty((n, dim)) if config.keep_states else None
    n_acc = 0
    n_nonfinite = 0
    for i in range(n):
        lam = math.exp(log_lam)
        chol = np.linalg.cholesky(lam * (sigma + _SIGMA_JITTER * eye))
        y = x + chol @ rng.standard_normal(dim)
        lpy = float(log_target(y))
        if np.isfinite(lpy):
            ratio = math.exp(min(0.0, lpy - lp))
        else:
            ratio = 0.0
            n_nonfinite += 1
        if rng.uniform() < ratio:
            x = y
            lp = lpy
            n_acc += 1
        gamma = config.gamma(i + 1)
        d = x - mu
        sigma += gamma * (np.outer(d, d) - sigma)
        mu += gamma * d
        log_lam = float(np.clip(log_lam + gamma * (ratio - config.target_rate),
                                log_lo, log_hi))
        h_out[i] = h_fn(x)
        lam_trace[i] = math.exp(log_lam)
        accept[i] = n_acc / (i + 1.0)
        if states is not None:
            states[i] = x
    return ChainRun(
        h_path=h_out[config.burn_in:],
        theta_trace=lam_trace,
        accept_trace=accept,
        seed=seed,
        model_id="adaptive_rwm",
        n_total=n,
        burn_in=config.burn_in,
        state_path=states,
        info={"mu": mu, "sigma": sigma,
              "n_nonfinite_proposals": n_nonfinite,
              "acceptance_rate": n_acc / n},
    )


# ---------------------------------------------------------------------------
# logistic regression posterior
# ---------------------------------------------------------------------------


def logistic_posterior(y, X, s: float = 20.0):
    """Log posterior of logistic regression with an N(0, s^2 I) prior.

    Returns ``beta -> sum_i [y_i x_i'beta - log(1 + exp(x_i'beta))]
    - |beta|^2 / (2 s^2)``, with the log-sum stabilized for large scores.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DomainError("X must be (n, d) with n matching len(y)")
    if s <= 0:
        raise DomainError("prior scale s must be positive")
    inv_2s2 = 0.5 / (s * s)

    def log_post(beta):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (X.shape[1],):
            raise DomainError(f"beta must have shape ({X.shape[1]},)")
        score = X @ beta
        return float(y @ score - np.logaddexp(0.0, score).sum()
                     - inv_2s2 * (beta @ beta))

    return log_post


def logistic_posterior_grad(y, X, s: float = 20.0):
    """Gradient of :func:`logistic_posterior` (analytic route)."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DomainError("X must be (n, d) with n matching len(y)")
    if s <= 0:
        raise DomainError("prior scale s must be positive")
    inv_s2 = 1.0 / (s * s)

    def grad(beta):
        beta = np.asarray(beta, dtype=float)
        return X.T @ (y - expit(X @ beta)) - inv_s2 * beta

    return grad


def synth_logistic_data(n: int, d: int, seed: int, beta_true=None):
    """Synthetic design, fixed coefficient pattern, Bernoulli responses.

    The default coefficients are the deterministic alternating pattern
    ``(-1)^j * linspace(1, 0.5, d)``; pass ``beta_true`` to override.
    """
    if n < 1 or d < 1:
        raise DomainError("n and d must be positive")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    if beta_true is None:
        signs = (-1.0) ** np.arange(d)
        beta_true = signs * np.linspace(1.0, 0.5, d)
    else:
        beta_true = np.asarray(beta_true, dtype=float)
        if beta_true.shape != (d,):
            raise DomainError(f"beta_true must have shape ({d},)")
    probs = expit(X @ beta_true)
    y = (rng.uniform(size=n) < probs).astype(int)
    return y, X, beta_true


def load_logistic_csv(path):
    """Read a logistic dataset from CSV with a header row; the response
    column is named ``y`` and the remaining columns are covariates."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if "y" not in header:
            raise DomainError("CSV must have a column named 'y'")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    y_col = header.index("y")
    y = data[:, y_col].astype(int)
    X = np.delete(data, y_col, axis=1)
    return y, X


# ---------------------------------------------------------------------------
# hierarchical Poisson random-effects model
# ---------------------------------------------------------------------------

_POISSON_INIT_SCALE = math.exp(-2.0)
_LOG_SCALE_BOUNDS = (-10.0, 10.0)


@dataclass(frozen=True)
class PoissonREData:
    """Counts and deterministic baselines, both (n_effects, n_groups)."""

    y: np.ndarray
    baseline: np.ndarray

    def validate(self) -> None:
        y = np.asarray(self.y)
        base = np.asarray(self.baseline)
        if y.ndim != 2 or y.shape != base.shape:
            raise DomainError("y and baseline must be 2-d with equal shapes")
        if y.shape[0] < 2 or y.shape[1] < 3:
            raise DomainError("need at least 2 effects and 3 groups")
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise DomainError("y must contain nonnegative integers")
        if np.any(base <= 0):
            raise DomainError("baselines must be positive")

    @property
    def n_effects(self) -> int:
        return self.y.shape[0]

    @property
    def n_groups(self) -> int:
        return self.y.shape[1]


def synth_poisson_re_data(n_effects: int = 3, n_groups: int = 27,
                          seed: int = 0, alpha=(0.35, 0.15), mu: float = -1.0,
                          sigma_eps2: float = 0.1, sigma_beta2: float = 0.3,
                          ) -> PoissonREData:
    """Generate counts from the model at fixed parameters.

    The baselines are deterministic integers cycling over {50, 100, 150};
    ``alpha`` gives the free effect levels (the last one balances the
    sum-to-zero constraint).
    """
    alpha = np.asarray(alpha, dtype=float)
    if len(alpha) != n_effects - 1:
        raise DomainError("alpha must have n_effects - 1 entries")
    alpha_full = np.append(alpha, -alpha.sum())
    rng = np.random.default_rng(seed)
    cells = n_effects * n_groups
    baseline = np.array([50, 100, 150], dtype=float)[
        np.arange(cells) % 3].reshape(n_effects, n_groups)
    beta = rng.normal(0.0, math.sqrt(sigma_beta2), size=n_groups)
    eps = rng.normal(0.0, math.sqrt(sigma_eps2), size=(n_effects, n_groups))
    lam = baseline * np.exp(mu + alpha_full[:, None] + beta[None, :] + eps)
    y = rng.poisson(lam).astype(float)
    return PoissonREData(y=y, baseline=baseline)


def inverse_gamma_draw(shape: float, scale: float,
                       rng: np.random.Generator) -> float:
    """One inverse-gamma draw; both parameters must be strictly positive."""
    if shape <= 0 or scale <= 0:
        raise DomainError("inverse-gamma shape and scale must be positive")
    return float(scale / rng.gamma(shape))


def poisson_re_gibbs(data: PoissonREData, config: SamplerConfig, seed: int,
                     adaptive: bool = True) -> ChainRun:
    """Metropolis-within-Gibbs for the Poisson random-effects posterior.

    One sweep draws the two variances exactly (inverse-gamma), the grand
    mean exactly (log of a gamma variable), then updates the free effect
    levels, each group effect and each cell effect with single-site RWM
    steps (initial scale e^-2). The adaptive variant tunes every RWM scale
    with the acceptance-rate rule; recorded h is the first effect level.
    """
    data.validate()
    config.validate()
    y = np.asarray(data.y, dtype=float)
    base = np.asarray(data.baseline, dtype=float)
    ne, np_ = data.n_effects, data.n_groups
    rng = np.random.default_rng(seed)

    y_row = y.sum(axis=1)
    y_col = y.sum(axis=0)
    y_tot = y.sum()
    if y_tot <= 0:
        raise DomainError("all-zero counts leave the grand mean improper")

    # seeded initialization; beta/eps start off zero so the first
    # inverse-gamma scales are strictly positive
    mu = math.log(y_tot / base.sum())
    alpha = np.zeros(ne)
    beta = 0.1 * rng.standard_normal(np_)
    eps = 0.1 * rng.standard_normal((ne, np_))
    sigma_eps2 = 1.0
    sigma_beta2 = 1.0

    log_s_alpha = np.full(ne - 1, -2.0)
    log_s_beta = np.full(np_, -2.0)
    log_s_eps = np.full((ne, np_), -2.0)
    lo, hi = _LOG_SCALE_BOUNDS
    target = config.target_rate

    n = config.n_total
    half = n // 2
    h_out = np.empty(n)
    sweep_acc = np.empty(n)
    n_sites = (ne - 1) + np_ + ne * np_
    acc_alpha = np.zeros(ne - 1)
    acc_beta = np.zeros(np_)
    acc_eps = np.zeros((ne, np_))
    acc_alpha_late = np.zeros(ne - 1)
    acc_beta_late = np.zeros(np_)
    acc_eps_late = np.zeros((ne, np_))
    stride = max(1, n // 512)
    scale_snaps = []

    ig_shape_eps = 0.5 * (ne * np_ - 2)
    ig_shape_beta = 0.5 * (np_ - 2)

    for sweep in range(n):
        gamma = config.gamma(sweep + 1) if adaptive else 0.0

        # exact conjugate draws
        sigma_eps2 = inverse_gamma_draw(ig_shape_eps, 0.5 * np.sum(eps**2), rng)
        sigma_beta2 = inverse_gamma_draw(ig_shape_beta,
                                         0.5 * np.sum(beta**2), rng)
        rate = np.sum(base * np.exp(alpha[:, None] + beta[None, :] + eps))
        mu = math.log(rng.gamma(y_tot) / rate)

        # effect levels, one at a time; the last level balances the sum
        exp_rest = base * np.exp(mu + beta[None, :] + eps)  # missing alpha_e
        row_rate = exp_rest.sum(axis=1)
        acc_this_sweep = 0.0
        for k in range(ne - 1):
            prop = alpha[k] + math.exp(log_s_alpha[k]) * rng.standard_normal()
            last_new = alpha[-1] - (prop - alpha[k])
            dll = ((prop - alpha[k]) * y_row[k]
                   + (last_new - alpha[-1]) * y_row[-1]
                   - row_rate[k] * (math.exp(prop) - math.exp(alpha[k]))
                   - row_rate[-1] * (math.exp(last_new) - math.exp(alpha[-1])))
            acc = math.log(1.0 - rng.uniform()) < dll
            if acc:
                alpha[k] = prop
                alpha[-1] = last_new
                acc_alpha[k] += 1
                acc_this_sweep += 1
                if sweep >= half:
                    acc_alpha_late[k] += 1
            log_s_alpha[k] = min(hi, max(lo, log_s_alpha[k]
                                         + gamma * (float(acc) - target)))

        # group effects: conditionally independent given the rest
        col_rate = (base * np.exp(mu + alpha[:, None] + eps)).sum(axis=0)
        prop = beta + np.exp(log_s_beta) * rng.standard_normal(np_)
        dll = ((prop - beta) * y_col
               - col_rate * (np.exp(prop) - np.exp(beta))
               - (prop**2 - beta**2) / (2.0 * sigma_beta2))
        acc = np.log1p(-rng.uniform(size=np_)) < dll
        beta = np.where(acc, prop, beta)
        acc_beta += acc
        acc_this_sweep += acc.sum()
        if sweep >= half:
            acc_beta_late += acc
        log_s_beta = np.clip(log_s_beta + gamma * (acc - target), lo, hi)

        # cell effects: conditionally independent given the rest
        cell_rate = base * np.exp(mu + alpha[:, None] + beta[None, :])
        prop = eps + np.exp(log_s_eps) * rng.standard_normal((ne, np_))
        dll = ((prop - eps) * y
               - cell_rate * (np.exp(prop) - np.exp(eps))
               - (prop**2 - eps**2) / (2.0 * sigma_eps2))
        acc = np.log1p(-rng.uniform(size=(ne, np_))) < dll
        eps = np.where(acc, prop, eps)
        acc_eps += acc
        acc_this_sweep += acc.sum()
        if sweep >= half:
            acc_eps_late += acc
        log_s_eps = np.clip(log_s_eps + gamma * (acc - target), lo, hi)

        h_out[sweep] = alpha[0]
        sweep_acc[sweep] = acc_this_sweep / n_sites
        if sweep % stride == 0:
            scale_snaps.append(np.concatenate([
                np.exp(log_s_alpha), np.exp(log_s_beta),
                np.exp(log_s_eps).ravel()]))

    late_n = n - half
    info = {
        "acceptance_alpha": acc_alpha / n,
        "acceptance_beta": acc_beta / n,
        "acceptance_eps": acc_eps / n,
        "acceptance_alpha_late": acc_alpha_late / late_n,
        "acceptance_beta_late": acc_beta_late / late_n,
        "acceptance_eps_late": acc_eps_late / late_n,
        "terminal_sigma_eps2": sigma_eps2,
        "terminal_sigma_beta2": sigma_beta2,
        "scale_trace_stride": stride,
        "adaptive": adaptive,
    }
    return ChainRun(
        h_path=h_out[config.burn_in:],
        theta_trace=np.array(scale_snaps),
        accept_trace=np.cumsum(sweep_acc) / np.arange(1, n + 1),
        seed=seed,
        model_id="poisson_re",
        n_total=n,
        burn_in=config.burn_in,
        info=info,
    )
