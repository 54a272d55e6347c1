"""
Error measurement between the regression of a dataset P and that of a
coreset S, theory checkers, and timing harnesses.

The evaluation cloud is drawn uniformly from a box (the data extent by
default). Points of a cloud of size m are the first m rows of any larger
cloud with the same seed, so clouds of increasing size are nested.

Provides the following:
    * EvalConfig, ErrorReport, SufficiencyCheck, LinkingCheck
    * evaluation_points, linf_error, convergence
    * check_relative_approx, check_kr_sufficient, check_linking
    * bench, sweep, summarize, window_errors
"""
import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from kregcore import defaults
from kregcore.model.coreset import Coreset, progressive_g_aggregate
from kregcore.model.data import Dataset
from kregcore.model.errors import ContractError, EmptyAdmissibleSet, KregError
from kregcore.model.kernel import GaussianKernel
from kregcore.model.regress import (EvalContext, kernel_sums,
                                    regression_from_sums)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    """How an error measurement is run.

    :param ctx: EvalContext used for both reg_P and reg_S.
    :param n_points: size of the evaluation cloud; defaults to
    defaults.eval_points_for(d).
    :param domain: (lower, upper) box of the cloud; defaults to the data
    extent.
    :param margin: widen the default box by this much on every side.
    :param rho: kde_P threshold; queries with kde_P(q) < rho are skipped.
    :param seed: seed of the evaluation cloud.
    :param repetitions: number of coreset rebuilds averaged over.
    :param threads: worker count for kernel sums.
    """
    ctx: EvalContext
    n_points: Optional[int] = None
    domain: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None
    margin: float = 0.0
    rho: float = 0.0
    seed: int = 0
    repetitions: int = defaults.REPETITIONS
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_points is not None and self.n_points < 1:
            raise ContractError('n_points must be at least 1')
        if not self.rho >= 0:
            raise ContractError('rho must be non-negative')
        if self.margin < 0:
            raise ContractError('margin must be non-negative')
        if self.repetitions < 1:
            raise ContractError('repetitions must be at least 1')
        if self.domain is not None:
            lower, upper = (np.atleast_1d(np.asarray(b, dtype=float))
                            for b in self.domain)
            if lower.shape != upper.shape or np.any(lower > upper):
                raise ContractError('domain must be a (lower, upper) box')
            object.__setattr__(self, 'domain', (tuple(lower.tolist()),
                                                tuple(upper.tolist())))

    def with_sigma(self, sigma):
        """Copy with the kernel bandwidth replaced."""
        kernel = GaussianKernel(sigma, self.ctx.kernel.form)
        if self.ctx.is_truncated:
            multiple = self.ctx.truncation_radius / self.ctx.kernel.sigma
            ctx = EvalContext.truncated(kernel, multiple)
        else:
            ctx = EvalContext.exact(kernel)
        return dataclasses.replace(self, ctx=ctx)


@dataclass(frozen=True)
class ErrorReport:
    """Result of comparing reg_P with reg_S over an evaluation cloud.

    Times are in milliseconds. runs holds the per-repetition linf values
    when the coreset was rebuilt several times; linf is then their mean.
    """
    linf: float
    linf_normalized: float
    argmax_q: Tuple[float, ...]
    mean_abs: float
    admissible_count: int
    skipped_count: int
    build_time: float = 0.0
    query_time_P: float = 0.0
    query_time_S: float = 0.0
    runs: Tuple[float, ...] = ()

    def to_dict(self):
        result = dataclasses.asdict(self)
        result['argmax_q'] = list(self.argmax_q)
        result['runs'] = list(self.runs)
        return result


class SufficiencyCheck(NamedTuple):
    """Measured premises and conclusion of the sufficient condition
    |reg_S - reg_P| <= 4 (alpha + beta/rho) M."""
    alpha_hat: float
    beta_hat: float
    reg_linf: float
    bound: float
    holds: bool


class LinkingCheck(NamedTuple):
    """Relative error over balls (ball_eps) against relative kde error
    (kde_eps); holds when kde_eps <= 2 ball_eps."""
    ball_eps: float
    kde_eps: float
    holds: bool


def _ms(start):
    return 1000.0 * (time.perf_counter() - start)


def _data(S):
    return S.data if isinstance(S, Coreset) else S


def _normalized(linf, m_range):
    if m_range > 0:
        return linf / m_range
    return 0.0 if linf == 0 else float('inf')


def evaluation_points(P, cfg, n=None):
    """Draw the evaluation cloud for P: n (default cfg.n_points) uniform
    points in cfg.domain, or in P's extent widened by cfg.margin."""
    if n is None:
        n = cfg.n_points or defaults.eval_points_for(P.d)
    if n < 1:
        raise ContractError('the evaluation cloud needs at least one point, '
                            'got %d' % n)
    if cfg.domain is not None:
        lower, upper = (np.asarray(b, dtype=float) for b in cfg.domain)
        if lower.size != P.d:
            raise ContractError('domain has %d coordinates, data has %d'
                                % (lower.size, P.d))
    else:
        lower, upper = P.lower - cfg.margin, P.upper + cfg.margin
    rng = np.random.default_rng(cfg.seed)
    return lower + rng.random((n, P.d)) * (upper - lower)


class _Comparison:
    """reg_P on one evaluation cloud, computed once and compared against
    any number of coresets."""

    def __init__(self, P, cfg, queries=None):
        self.P = P
        self.cfg = cfg
        self.queries = evaluation_points(P, cfg) if queries is None \
            else queries
        self.m_range = float(P.y.max() - P.y.min())
        start = time.perf_counter()
        self.sums = kernel_sums(P, cfg.ctx, self.queries, cfg.threads)
        self.query_time = _ms(start)
        self.reg = regression_from_sums(self.sums)
        self.reference = self.reg.defined & (self.sums.kde >= cfg.rho)

    def errors(self, S):
        """Return (abs errors, admissible mask, reg_S, time in ms)."""
        data = _data(S)
        if data.d != self.P.d:
            raise ContractError('dimension mismatch: P has d=%d, S has d=%d'
                                % (self.P.d, data.d))
        start = time.perf_counter()
        sums = kernel_sums(data, self.cfg.ctx, self.queries, self.cfg.threads)
        elapsed = _ms(start)
        reg_s = regression_from_sums(sums)
        admissible = self.reference & reg_s.defined
        errors = np.where(admissible,
                          np.abs(self.reg.values - reg_s.values), 0.0)
        return errors, admissible, reg_s, elapsed

    def report(self, S, build_time=0.0):
        errors, admissible, _, elapsed = self.errors(S)
        count = int(np.count_nonzero(admissible))
        if count == 0:
            raise EmptyAdmissibleSet('all %d evaluation points were skipped '
                                     '(rho=%g)' % (len(errors), self.cfg.rho))
        worst = int(np.argmax(np.where(admissible, errors, -1.0)))
        linf = float(errors[worst])
        return ErrorReport(
            linf=linf,
            linf_normalized=_normalized(linf, self.m_range),
            argmax_q=tuple(self.queries[worst].tolist()),
            mean_abs=float(errors[admissible].mean()),
            admissible_count=count,
            skipped_count=len(errors) - count,
            build_time=build_time,
            query_time_P=self.query_time,
            query_time_S=elapsed)


def _averaged(reports, m_range):
    """Fold per-repetition reports into one: mean linf and mean_abs, the
    worst run's location and counts, mean times."""
    worst = max(reports, key=lambda r: r.linf)
    runs = tuple(r.linf for r in reports)
    linf = float(np.mean(runs))
    return dataclasses.replace(
        worst,
        linf=linf,
        linf_normalized=_normalized(linf, m_range),
        mean_abs=float(np.mean([r.mean_abs for r in reports])),
        build_time=float(np.mean([r.build_time for r in reports])),
        query_time_S=float(np.mean([r.query_time_S for r in reports])),
        runs=runs)


def linf_error(P, S, cfg, builder=None):
    """Maximum |reg_P(q) - reg_S(q)| over the admissible evaluation points.

    A point q is admissible when reg_P(q) and reg_S(q) are defined and
    kde_P(q) >= cfg.rho.

    :param S: a Coreset or Dataset; ignored when builder is given.
    :param builder: optional callable seed -> Coreset. It is called
    cfg.repetitions times with seeds cfg.seed, cfg.seed + 1, ... and the
    report carries the mean linf (per-run values in .runs).
    :raises EmptyAdmissibleSet: if no evaluation point is admissible.
    """
    comparison = _Comparison(P, cfg)
    if builder is None:
        return comparison.report(S)
    reports = []
    for rep in range(cfg.repetitions):
        start = time.perf_counter()
        coreset = builder(cfg.seed + rep)
        reports.append(comparison.report(coreset, _ms(start)))
    return _averaged(reports, comparison.m_range)


def pointwise(P, S, cfg, queries=None):
    """Per-query comparison of reg_P and reg_S.

    :param queries: (m, d) query array; defaults to the evaluation cloud.
    :return: (frame, report) where frame has columns q1..qd, reg_P, reg_S,
    abs_err, admissible (NaN marks an undefined regression) and report is
    the ErrorReport over the same queries.
    """
    if queries is not None:
        queries = np.asarray(queries, dtype=float).reshape(-1, P.d)
    comparison = _Comparison(P, cfg, queries)
    errors, admissible, reg_s, _ = comparison.errors(S)
    columns = {'q%d' % (j + 1): comparison.queries[:, j]
               for j in range(P.d)}
    columns.update(reg_P=comparison.reg.values, reg_S=reg_s.values,
                   abs_err=np.where(admissible, errors, np.nan),
                   admissible=admissible.astype(int))
    return pd.DataFrame(columns), comparison.report(S)


def convergence(P, S, cfg, sizes):
    """Running maximum error over nested evaluation clouds.

    :param sizes: increasing cloud sizes; all clouds are prefixes of the
    largest one.
    :return: list of (size, linf) pairs, linf non-decreasing (NaN while no
    point of the prefix is admissible).
    """
    sizes = [int(s) for s in sizes]
    if not sizes or sizes != sorted(sizes) or sizes[0] < 1:
        raise ContractError('sizes must be positive and increasing')
    comparison = _Comparison(P, cfg, evaluation_points(P, cfg, sizes[-1]))
    errors, admissible, _, _ = comparison.errors(S)
    running = np.maximum.accumulate(np.where(admissible, errors, -np.inf))
    return [(size, float(running[size - 1]) if running[size - 1] >= 0
             else float('nan')) for size in sizes]


def _relative_kde_error(kde_p, kde_s, rho):
    scale = np.maximum(kde_p, rho)
    diff = np.abs(kde_p - kde_s)
    ratio = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
    ratio[(scale == 0) & (diff > 0)] = np.inf
    return float(ratio.max()) if ratio.size else 0.0


def check_relative_approx(P, S, rho, cfg):
    """Empirical eps of a relative (rho, eps)-approximation:
    max over the cloud of |kde_P - kde_S| / max(kde_P, rho)."""
    queries = evaluation_points(P, cfg)
    kde_p = kernel_sums(P, cfg.ctx, queries, cfg.threads).kde
    kde_s = kernel_sums(_data(S), cfg.ctx, queries, cfg.threads).kde
    return _relative_kde_error(kde_p, kde_s, rho)


def _unit_values(ds, low, m_range):
    """ds with y mapped onto [1, 2] by y' = 1 + (y - low)/M."""
    return Dataset(ds.x, 1.0 + (ds.y - low) / m_range, ds.w)


def check_kr_sufficient(P, S, rho, cfg):
    """Measure the premises of the sufficient condition for a regression
    coreset and test its conclusion.

    alpha_hat is the relative kde error (check_relative_approx); beta_hat
    is max |wkde_P - wkde_S| with y mapped onto [1, 2] using P's minimum
    and range M. The bound 4 (alpha_hat + beta_hat/rho) M is compared with
    the largest regression error at points with kde_P >= rho. Whenever
    alpha_hat <= 1/2 the bound must hold.
    """
    if not rho > 0:
        raise ContractError('rho must be positive, got %r' % (rho,))
    data = _data(S)
    cfg = dataclasses.replace(cfg, rho=rho)
    comparison = _Comparison(P, cfg)
    queries = comparison.queries
    alpha = _relative_kde_error(comparison.sums.kde,
                                kernel_sums(data, cfg.ctx, queries,
                                            cfg.threads).kde, rho)
    errors, admissible, _, _ = comparison.errors(data)
    reg_linf = float(errors.max()) if np.any(admissible) else 0.0
    m_range = comparison.m_range
    if m_range > 0:
        low = float(P.y.min())
        wkde_p = kernel_sums(_unit_values(P, low, m_range), cfg.ctx,
                             queries, cfg.threads).wkde
        wkde_s = kernel_sums(_unit_values(data, low, m_range), cfg.ctx,
                             queries, cfg.threads).wkde
        beta = float(np.max(np.abs(wkde_p - wkde_s)))
        bound = 4.0 * (alpha + beta / rho) * m_range
        slack = 1e-9 * bound
    else:
        beta, bound = 0.0, 0.0
        slack = 1e-12 * max(1.0, float(np.max(np.abs(P.y))))
    holds = reg_linf <= bound + slack
    if alpha <= 0.5 and not holds:
        logger.warning('sufficient condition violated: reg error %g > bound '
                       '%g with alpha=%g', reg_linf, bound, alpha)
    return SufficiencyCheck(alpha, beta, reg_linf, bound, bool(holds))


def _weighted_cdf(sorted_dist, cum_weight, radii):
    return cum_weight[np.searchsorted(sorted_dist, radii, side='right')]


def _distance_profile(ds, q):
    dist = cdist(q[None, :], ds.x)[0]
    order = np.argsort(dist, kind='stable')
    cum = np.r_[0.0, np.cumsum(ds.w[order])] / ds.total_weight
    return dist[order], cum


def check_linking(P, S, rho, cfg):
    """Compare the relative error of S over balls with its relative kde
    error.

    At every evaluation point q, ball_eps is the supremum over radii r of
    |F_P(r) - F_S(r)| / max(F_P(r), rho), where F is the weighted fraction
    of points within distance r of q; the supremum is attained at one of
    the distances, so it is computed exactly. An approximation that is
    relative over balls with eps is relative for the kernel density with
    2 eps; holds reports whether kde_eps <= 2 ball_eps.
    """
    data = _data(S)
    queries = evaluation_points(P, cfg)
    ball = 0.0
    for q in queries:
        dist_p, cum_p = _distance_profile(P, q)
        dist_s, cum_s = _distance_profile(data, q)
        radii = np.concatenate([dist_p, dist_s])
        f_p = _weighted_cdf(dist_p, cum_p, radii)
        f_s = _weighted_cdf(dist_s, cum_s, radii)
        ball = max(ball, _relative_kde_error(f_p, f_s, rho))
    kde_eps = _relative_kde_error(
        kernel_sums(P, cfg.ctx, queries, cfg.threads).kde,
        kernel_sums(data, cfg.ctx, queries, cfg.threads).kde, rho)
    holds = kde_eps <= 2.0 * ball * (1.0 + 1e-9) + 1e-15
    return LinkingCheck(ball, kde_eps, bool(holds))


def _truncated(cfg):
    if cfg.ctx.is_truncated:
        return cfg
    return dataclasses.replace(cfg, ctx=EvalContext.truncated(cfg.ctx.kernel))


def _failed_row(row, exc):
    logger.warning('%s size %s failed: %s', row['method'], row['size'], exc)
    row.update(coreset_size=0, linf=np.nan, linf_normalized=np.nan,
               build_ms=np.nan, query_ms_P=np.nan, query_ms_S=np.nan,
               status='failed: %s' % exc)
    return row


def _measure(comparison, spec, P, seed, cfg, row):
    try:
        start = time.perf_counter()
        cs = spec.build(P, seed=seed, ctx=cfg.ctx, threads=cfg.threads)
        report = comparison.report(cs, _ms(start))
    except KregError as exc:
        return _failed_row(row, exc)
    row.update(coreset_size=cs.size, linf=report.linf,
               linf_normalized=report.linf_normalized,
               build_ms=report.build_time, query_ms_P=report.query_time_P,
               query_ms_S=report.query_time_S, status='ok')
    return row


def bench(P, specs, sizes, cfg):
    """Build, time and measure every (method spec, size) pair.

    Kernel sums are truncated (10 sigma unless cfg already truncates), as
    for query timing. Randomized methods use seed cfg.seed.

    :param specs: MethodSpec list; each is retargeted with with_size.
    :param sizes: coreset sizes.
    :return: a pandas DataFrame, one row per pair, in input order.
    """
    cfg = _truncated(cfg)
    comparison = _Comparison(P, cfg)
    rows = []
    for spec in specs:
        for size in sizes:
            row = {'method': spec.label, 'size': size}
            rows.append(_measure(comparison, spec.with_size(size), P,
                                 cfg.seed, cfg, row))
    return pd.DataFrame(rows)


def sweep(P, specs, sizes, sigmas, cfg):
    """Cross product of methods, sizes, bandwidths and repetitions.

    Repetition r builds randomized methods with seed cfg.seed + r; the
    evaluation cloud is the same for every row. Deterministic methods are
    built once per (method, size, sigma) and the result reused.

    :return: a pandas DataFrame with columns method, size, sigma, rep,
    coreset_size, linf, linf_normalized, build_ms, query_ms_P, query_ms_S,
    status.
    """
    rows = []
    for sigma in sigmas:
        scfg = cfg.with_sigma(sigma)
        comparison = _Comparison(P, scfg)
        for spec in specs:
            for size in sizes:
                sized = spec.with_size(size)
                first = None
                for rep in range(scfg.repetitions):
                    row = {'method': spec.label, 'size': size,
                           'sigma': sigma, 'rep': rep}
                    if first is not None and not spec.method.is_randomized:
                        row.update({key: value for key, value in first.items()
                                    if key not in row})
                        rows.append(row)
                        continue
                    row = _measure(comparison, sized, P, scfg.seed + rep,
                                   scfg, row)
                    first = row
                    rows.append(row)
    return pd.DataFrame(rows)


def summarize(rows):
    """Median linf and linf_normalized per (method, size, sigma).

    Failed rows are left out of the medians.

    :param rows: DataFrame from sweep (or bench).
    :return: a pandas DataFrame with one row per group, in first-seen order.
    """
    frame = pd.DataFrame(rows)
    keys = [key for key in ('method', 'size', 'sigma') if key in frame]
    ok = frame[frame['status'] == 'ok']
    summary = ok.groupby(keys, sort=False).agg(
        linf=('linf', 'median'),
        linf_normalized=('linf_normalized', 'median'),
        runs=('linf', 'size'))
    return summary.reset_index()


def window_errors(P, spec, ctx, windows, cfg):
    """Error of the progressive coreset over windows reaching back from now.

    The progressive coreset is built once over P (all x <= 0). For each
    window width T, reg over P restricted to [-T, 0] is compared with reg
    over the coreset points in the same window, on a cloud drawn in [-T, 0].
    The regions column is the number of regions the window reaches, capped by
    spec.region_count when that is set.

    :param ctx: EvalContext, replacing cfg.ctx when given.
    :return: a pandas DataFrame with columns T, regions, coreset_size, linf,
    linf_normalized, status.
    """
    if P.d != 1:
        raise ContractError('window errors need one-dimensional data')
    if ctx is not None:
        cfg = dataclasses.replace(cfg, ctx=ctx)
    cs = progressive_g_aggregate(P, spec)
    rows = []
    for span in windows:
        regions = spec.regions_for_span(span)
        if spec.region_count is not None:
            regions = min(regions, spec.region_count)
        row = {'T': span, 'regions': regions}
        inside_p = P.window(-span, 0.0)
        inside_s = cs.data.window(-span, 0.0)
        if inside_p is None or inside_s is None:
            row.update(coreset_size=0, linf=np.nan, linf_normalized=np.nan,
                       status='failed: empty window')
            rows.append(row)
            continue
        wcfg = dataclasses.replace(cfg, domain=((-span,), (0.0,)))
        try:
            report = _Comparison(inside_p, wcfg).report(inside_s)
        except KregError as exc:
            row.update(coreset_size=inside_s.n, linf=np.nan,
                       linf_normalized=np.nan, status='failed: %s' % exc)
        else:
            row.update(coreset_size=inside_s.n, linf=report.linf,
                       linf_normalized=report.linf_normalized, status='ok')
        rows.append(row)
    return pd.DataFrame(rows)
