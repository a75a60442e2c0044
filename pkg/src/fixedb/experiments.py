"""Replication harness: coverage studies, convergence-rate studies and the
toy multi-limit study.

Replications are independent tasks. Replication ``i`` of a cell is seeded
by ``derive_seed(base_seed, cell_label, i)``, so running with one worker
or many, in any schedule, produces identical reports; aggregation is a
deterministic fold over index-ordered results.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import wasserstein_distance

from fixedb import __version__
from fixedb.chains import (
    ChainRun,
    SamplerConfig,
    adaptive_rwm,
    ar1_chain,
    logistic_posterior,
    synth_logistic_data,
    toy_acceptance_roots,
    toy_adaptive_rwm,
)
from fixedb.ci import ci_classical, ci_fixedb
from fixedb.exceptions import DomainError, NonStudentizableError
from fixedb.kernels import by_name
from fixedb.lagwindow import cn_from_rule, gamma_n_sq
from fixedb.limitdist import FixedBQuantileTable, cached_decomposition, chi2_eigen_sample
from fixedb.seeding import derive_seed

__all__ = [
    "ModelSpec",
    "CoverageReport",
    "RateReport",
    "ToyMultilimitReport",
    "coverage_study",
    "rate_study",
    "toy_multilimit_study",
    "derive_seed",
    "make_chain",
    "model_truth",
    "write_manifest",
]

TOY_MULTILIMIT_TARGET = 0.29  # level at which the acceptance equation has 3 roots


# ---------------------------------------------------------------------------
# model registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Picklable description of a chain model for replication tasks."""

    model_id: str
    params: tuple = ()

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    @classmethod
    def iid(cls) -> "ModelSpec":
        return cls("iid")

    @classmethod
    def ar1(cls, rho: float) -> "ModelSpec":
        return cls("ar1", (("rho", float(rho)),))

    @classmethod
    def toy(cls, target_rate: float = TOY_MULTILIMIT_TARGET,
            theta0_range: tuple = (1.7, 6.0)) -> "ModelSpec":
        return cls("toy", (("target_rate", float(target_rate)),
                           ("theta0_range", tuple(theta0_range))))

    @classmethod
    def logistic(cls, n_obs: int = 50, dim: int = 4, data_seed: int = 20120801,
                 s: float = 20.0, h_index: int = 0) -> "ModelSpec":
        return cls("logistic", (("n_obs", int(n_obs)), ("dim", int(dim)),
                                ("data_seed", int(data_seed)), ("s", float(s)),
                                ("h_index", int(h_index))))

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """Parse CLI grammar: iid | ar1:RHO | toy | toy:RATE | logistic."""
        parts = text.split(":")
        name = parts[0]
        if name == "iid":
            return cls.iid()
        if name == "ar1":
            if len(parts) != 2:
                raise DomainError("ar1 model needs a rho, e.g. ar1:0.5")
            return cls.ar1(float(parts[1]))
        if name == "toy":
            if len(parts) == 2:
                return cls.toy(target_rate=float(parts[1]))
            return cls.toy()
        if name == "logistic":
            return cls.logistic()
        raise DomainError(f"unknown model {text!r}")


def make_chain(spec: ModelSpec, n: int, burn_in: int, seed: int) -> ChainRun:
    """Instantiate one replication chain; kept path length is n - burn_in."""
    if spec.model_id == "iid":
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n)
        return ChainRun(h_path=x[burn_in:], theta_trace=np.empty(0),
                        accept_trace=np.empty(0), seed=seed, model_id="iid",
                        n_total=n, burn_in=burn_in)
    if spec.model_id == "ar1":
        run = ar1_chain(spec.param("rho"), n, seed)
        if burn_in:
            run = replace(run, h_path=run.h_path[burn_in:], burn_in=burn_in)
        return run
    if spec.model_id == "toy":
        lo, hi = spec.param("theta0_range", (1.7, 6.0))
        theta0 = float(np.exp(np.random.default_rng(
            derive_seed(seed, "theta0")).uniform(np.log(lo), np.log(hi))))
        config = SamplerConfig(n_total=n, burn_in=burn_in,
                               target_rate=spec.param("target_rate"),
                               initial_param=theta0,
                               bounds=(1.6, 40.0))
        return toy_adaptive_rwm(config, seed)
    if spec.model_id == "logistic":
        y, X, _ = synth_logistic_data(spec.param("n_obs"), spec.param("dim"),
                                      spec.param("data_seed"))
        log_post = logistic_posterior(y, X, spec.param("s"))
        idx = spec.param("h_index")
        config = SamplerConfig(n_total=n, burn_in=burn_in)
        return adaptive_rwm(log_post, spec.param("dim"), config, seed,
                            h=lambda state, _i=idx: state[_i])
    raise DomainError(f"unknown model {spec.model_id!r}")


def model_truth(spec: ModelSpec, n: int, burn_in: int, base_seed: int) -> float:
    """Reference value of pi(h): analytic where available, otherwise the
    sample mean of a reference run 10x the study length."""
    if spec.model_id in ("iid", "ar1", "toy"):
        return 0.0
    ref = make_chain(spec, 10 * n, burn_in, derive_seed(base_seed, "truth"))
    return float(ref.h_path.mean())


# ---------------------------------------------------------------------------
# coverage study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageCell:
    method: str
    kernel_id: str
    delta: float | None
    K: int
    n: int
    burn_in: int
    coverage: float
    coverage_se: float
    mean_halfwidth: float
    halfwidth_se: float
    miss_flags: int
    cell_label: str


@dataclass(frozen=True)
class CoverageReport:
    model_id: str
    truth: float
    level: float
    base_seed: int
    rows: tuple = ()

    def to_csv(self) -> str:
        lines = ["model,method,kernel,delta,K,n,burnin,coverage,coverage_se,"
                 "mean_halfwidth,halfwidth_se,miss_flags"]
        for r in self.rows:
            delta = "n" if r.delta is None else repr(r.delta)
            lines.append(
                f"{self.model_id},{r.method},{r.kernel_id},{delta},{r.K},"
                f"{r.n},{r.burn_in},{r.coverage!r},{r.coverage_se!r},"
                f"{r.mean_halfwidth!r},{r.halfwidth_se!r},{r.miss_flags}")
        return "\n".join(lines) + "\n"

    def cell(self, method: str, kernel_id: str, delta=None) -> CoverageCell:
        for r in self.rows:
            if (r.method == method and r.kernel_id == kernel_id
                    and (r.delta == delta
                         or (r.delta is None and delta is None))):
                return r
        raise KeyError((method, kernel_id, delta))

    def best_classical(self, kernel_id: str) -> CoverageCell:
        cells = [r for r in self.rows
                 if r.method == "classical" and r.kernel_id == kernel_id]
        if not cells:
            raise KeyError(f"no classical cells for {kernel_id}")
        return max(cells, key=lambda r: r.coverage)


def _cell_label(method: str, kernel_id: str, delta) -> str:
    return f"{method}:{kernel_id}:{'n' if delta is None else repr(float(delta))}"


def _coverage_chunk(args):
    (spec, n, burn_in, base_seed, label, indices, method, kernel_id, delta,
     level, truth, table) = args
    kernel = by_name(kernel_id)
    out = []
    for i in indices:
        seed = derive_seed(base_seed, label, i)
        run = make_chain(spec, n, burn_in, seed)
        x = run.h_path
        try:
            if method == "classical":
                c_n = max(1, min(len(x) - 1, round(len(x) ** delta)))
                with warnings.catch_warnings():
                    # the delta grid deliberately sweeps up to the edge of
                    # the classical regime
                    warnings.simplefilter("ignore", UserWarning)
                    interval = ci_classical(x, c_n, kernel, level)
            else:
                interval = ci_fixedb(x, kernel, level, table)
            out.append((interval.contains(truth), interval.halfwidth, False))
        except NonStudentizableError:
            out.append((False, float("nan"), True))
    return out


def coverage_study(spec: ModelSpec, deltas, kernels, K: int, n: int,
                   burn_in: int, base_seed: int, level: float = 0.95,
                   tables: dict | None = None, truth: float | None = None,
                   workers: int = 1, chunk_size: int = 25) -> CoverageReport:
    """K replications per (method, kernel, delta) cell.

    ``deltas`` drive the classical cells via c_n = round(n_kept^delta);
    every kernel also gets one fixed-b cell (c_n = n) whose critical value
    comes from the persisted ``tables[kernel_id]``. Non-studentizable
    replications count as misses and are flagged separately.
    """
    kernels = list(kernels)
    deltas = [float(d) for d in deltas]
    if K < 1:
        raise DomainError("K must be positive")
    tables = tables or {}
    for k in kernels:
        if k.id not in tables:
            raise DomainError(f"missing fixed-b quantile table for {k.id!r}")

    if truth is None:
        truth = model_truth(spec, n, burn_in, base_seed)

    cells = [("classical", k.id, d) for k in kernels for d in deltas]
    cells += [("fixedb", k.id, None) for k in kernels]

    tasks = []
    for method, kernel_id, delta in cells:
        label = _cell_label(method, kernel_id, delta)
        table = tables.get(kernel_id) if method == "fixedb" else None
        for start in range(0, K, chunk_size):
            indices = range(start, min(start + chunk_size, K))
            tasks.append((spec, n, burn_in, base_seed, label, indices,
                          method, kernel_id, delta, level, truth, table))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk_results = list(pool.map(_coverage_chunk, tasks))
    else:
        chunk_results = [_coverage_chunk(t) for t in tasks]

    # deterministic fold in task order
    per_cell: dict[str, list] = {}
    for task, res in zip(tasks, chunk_results):
        per_cell.setdefault(task[4], []).extend(res)

    rows = []
    for method, kernel_id, delta in cells:
        label = _cell_label(method, kernel_id, delta)
        res = per_cell[label]
        covered = np.array([r[0] for r in res], dtype=float)
        halfwidths = np.array([r[1] for r in res], dtype=float)
        flags = int(sum(r[2] for r in res))
        cov = float(covered.mean())
        cov_se = float(np.sqrt(cov * (1.0 - cov) / K))
        valid = halfwidths[np.isfinite(halfwidths)]
        mean_hw = float(valid.mean()) if len(valid) else float("nan")
        hw_se = (float(valid.std(ddof=1) / np.sqrt(len(valid)))
                 if len(valid) > 1 else float("nan"))
        rows.append(CoverageCell(method=method, kernel_id=kernel_id,
                                 delta=delta, K=K, n=n, burn_in=burn_in,
                                 coverage=cov, coverage_se=cov_se,
                                 mean_halfwidth=mean_hw, halfwidth_se=hw_se,
                                 miss_flags=flags, cell_label=label))
    return CoverageReport(model_id=spec.model_id, truth=truth, level=level,
                          base_seed=base_seed, rows=tuple(rows))


# ---------------------------------------------------------------------------
# rate study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateCell:
    rule: str
    n: int
    R: int
    rmse: float
    wasserstein: float | None


@dataclass(frozen=True)
class RateReport:
    rho: float
    base_seed: int
    kernel_id: str
    rows: tuple = ()
    slopes: tuple = ()  # (rule, fitted log-log slope)

    def slope(self, rule: str) -> float:
        for r, s in self.slopes:
            if r == rule:
                return s
        raise KeyError(rule)

    def cell(self, rule: str, n: int) -> RateCell:
        for row in self.rows:
            if row.rule == rule and row.n == n:
                return row
        raise KeyError((rule, n))

    def to_csv(self) -> str:
        lines = ["rho,n,rule,R,rmse,slope_rule,wasserstein"]
        slope_map = dict(self.slopes)
        for r in self.rows:
            w = "" if r.wasserstein is None else repr(r.wasserstein)
            lines.append(f"{self.rho!r},{r.n},{r.rule},{r.R},{r.rmse!r},"
                         f"{slope_map[r.rule]!r},{w}")
        return "\n".join(lines) + "\n"


def _rate_cell(args):
    rho, n, rule, R, base_seed, kernel_id, want_sample = args
    kernel = by_name(kernel_id)
    label = f"rate:{rule}:{n}"
    vals = np.empty(R)
    for i in range(R):
        seed = derive_seed(base_seed, label, i)
        run = ar1_chain(rho, n, seed, normalize=True)
        c_n = cn_from_rule(n, rule)
        vals[i] = gamma_n_sq(run.h_path, c_n, kernel).gamma_sq
    rmse = float(np.sqrt(np.mean((vals - 1.0) ** 2)))
    return rmse, (vals if want_sample else None)


def rate_study(rho: float, n_grid, rules, R: int, base_seed: int,
               kernel_id: str = "bartlett", ref_draws: int = 10**5,
               workers: int = 1) -> RateReport:
    """RMSE of the variance estimator against the known truth 1, per
    bandwidth rule, on the normalized AR(1) chain; plus the empirical
    1-Wasserstein distance to the simulated limiting chi-square for the
    fixed-b rule."""
    n_grid = [int(v) for v in n_grid]
    rules = [str(r) for r in rules]
    if len(n_grid) < 2:
        raise DomainError("need at least two chain lengths")
    if R < 2:
        raise DomainError("R must be at least 2")

    ref = None
    if "n" in rules:
        decomp = cached_decomposition(by_name(kernel_id))
        ref = chi2_eigen_sample(decomp, ref_draws,
                                derive_seed(base_seed, "chi2ref"))

    tasks = [(rho, n, rule, R, base_seed, kernel_id, rule == "n")
             for rule in rules for n in n_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_rate_cell, tasks))
    else:
        results = [_rate_cell(t) for t in tasks]

    rows = []
    slopes = []
    idx = 0
    for rule in rules:
        rmses = []
        for n in n_grid:
            rmse, sample = results[idx]
            idx += 1
            w = None
            if rule == "n":
                w = float(wasserstein_distance(sample, ref))
            rows.append(RateCell(rule=rule, n=n, R=R, rmse=rmse, wasserstein=w))
            rmses.append(rmse)
        slope = float(np.polyfit(np.log(n_grid), np.log(rmses), 1)[0])
        slopes.append((rule, slope))
    return RateReport(rho=rho, base_seed=base_seed, kernel_id=kernel_id,
                      rows=tuple(rows), slopes=tuple(slopes))


# ---------------------------------------------------------------------------
# toy multi-limit study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToySeedResult:
    seed_index: int
    seed: int
    theta0: float
    terminal_theta: float
    nearest_root: float
    distance: float
    gamma_sq: float


@dataclass(frozen=True)
class ToyMultilimitReport:
    target_rate: float
    roots: tuple
    n_total: int
    burn_in: int
    base_seed: int
    rows: tuple = ()
    traces: tuple = field(default=(), repr=False)

    def clusters(self) -> dict:
        """Group Gamma^2 values by nearest root."""
        out: dict[float, list] = {}
        for r in self.rows:
            out.setdefault(r.nearest_root, []).append(r.gamma_sq)
        return {root: np.asarray(v) for root, v in out.items()}

    def to_csv(self) -> str:
        lines = ["seed_index,seed,theta0,terminal_theta,nearest_root,"
                 "distance,gamma_sq"]
        for r in self.rows:
            lines.append(f"{r.seed_index},{r.seed},{r.theta0!r},"
                         f"{r.terminal_theta!r},{r.nearest_root!r},"
                         f"{r.distance!r},{r.gamma_sq!r}")
        return "\n".join(lines) + "\n"

    def traces_to_csv(self) -> str:
        lines = ["seed_index,step,theta,gamma_sq"]
        for trace in self.traces:
            for step, theta, gsq in zip(trace["steps"], trace["theta"],
                                        trace["gamma_sq"]):
                lines.append(f"{trace['seed_index']},{step},{theta!r},{gsq!r}")
        return "\n".join(lines) + "\n"


class MultilimitDegenerateError(DomainError):
    """The study did not exhibit the multi-limit phenomenon."""


def toy_multilimit_study(n_seeds: int, config: SamplerConfig, base_seed: int,
                         keep_traces: bool = False, n_checkpoints: int = 120,
                         strict: bool = True) -> ToyMultilimitReport:
    """Run the adaptive toy sampler from spread-out initial scales and
    cluster the variance estimates by the root the scale converged to.

    With ``strict`` the study raises unless every terminal scale sits
    within 0.05 of a root, at least two roots are occupied, and the
    cluster means are separated beyond 3 combined within-cluster standard
    errors.
    """
    if n_seeds < 20:
        raise DomainError("need at least 20 seeds")
    config.validate()
    bounds = config.bounds if config.bounds is not None else (1.6, 40.0)
    roots = toy_acceptance_roots(config.target_rate)
    if not roots:
        raise MultilimitDegenerateError(
            f"acceptance equation has no roots at level {config.target_rate}")

    theta0s = np.geomspace(bounds[0] * 1.02, bounds[1] * 0.98, n_seeds)
    rows = []
    traces = []
    kept = config.n_total - config.burn_in
    for i, theta0 in enumerate(theta0s):
        seed = derive_seed(base_seed, "toy-multilimit", i)
        run = toy_adaptive_rwm(
            replace(config, initial_param=float(theta0), bounds=bounds), seed)
        terminal = float(run.theta_trace[-1])
        dists = np.abs(np.asarray(roots) - terminal)
        j = int(np.argmin(dists))
        c_n = max(1, round(kept ** (1.0 / 3.0)))
        gsq = gamma_n_sq(run.h_path, c_n, by_name("bartlett")).gamma_sq
        rows.append(ToySeedResult(seed_index=i, seed=seed, theta0=float(theta0),
                                  terminal_theta=terminal,
                                  nearest_root=float(roots[j]),
                                  distance=float(dists[j]), gamma_sq=gsq))
        if keep_traces:
            steps = np.unique(np.geomspace(
                64, config.n_total, n_checkpoints).astype(int))
            gseq = []
            for t in steps:
                m = max(2, t - config.burn_in) if t > config.burn_in else 2
                path = run.h_path[:m]
                gseq.append(gamma_n_sq(
                    path, max(1, round(len(path) ** (1.0 / 3.0))),
                    by_name("bartlett")).gamma_sq)
            traces.append({"seed_index": i, "steps": steps,
                           "theta": run.theta_trace[steps - 1],
                           "gamma_sq": np.asarray(gseq)})

    report = ToyMultilimitReport(target_rate=config.target_rate,
                                 roots=tuple(roots), n_total=config.n_total,
                                 burn_in=config.burn_in, base_seed=base_seed,
                                 rows=tuple(rows), traces=tuple(traces))
    if strict:
        _check_multilimit(report)
    return report


def _check_multilimit(report: ToyMultilimitReport) -> None:
    bad = [r for r in report.rows if r.distance > 0.05]
    if bad:
        raise MultilimitDegenerateError(
            f"{len(bad)} runs ended further than 0.05 from every root")
    clusters = report.clusters()
    occupied = {root: v for root, v in clusters.items() if len(v) > 0}
    if len(occupied) < 2:
        raise MultilimitDegenerateError(
            "fewer than 2 roots occupied across seeds")
    stats = {root: (float(v.mean()),
                    float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0)
             for root, v in occupied.items()}
    roots = sorted(stats)
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            m1, s1 = stats[roots[i]]
            m2, s2 = stats[roots[j]]
            if abs(m1 - m2) <= 3.0 * np.hypot(s1, s2):
                raise MultilimitDegenerateError(
                    f"clusters at roots {roots[i]:.3f} and {roots[j]:.3f} "
                    f"are not separated beyond 3 combined SEs")


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def config_digest(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_manifest(path, command: str, config: dict, base_seed: int,
                   outputs, duration_s: float, extra: dict | None = None,
                   ) -> None:
    """Atomically write the run manifest next to a command's outputs."""
    doc = {
        "command": command,
        "config": config,
        "config_digest": config_digest(config),
        "base_seed": base_seed,
        "version": __version__,
        "outputs": [str(p) for p in outputs],
        "duration_s": duration_s,
    }
    if extra:
        doc.update(extra)
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=str)
    os.replace(tmp, path)


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start
