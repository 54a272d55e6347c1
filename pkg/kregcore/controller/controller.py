"""
The controller for kregcore.

The controller sits between the command line (the view) and the model: the
command line parses and validates flags and hands plain values to a
Controller, which loads data, calls the model and returns the primary output
as text. Nothing is written here; the caller decides where the text goes, so
a failing command leaves no partial output behind.

Provides the following class:
* Controller    Run the synth, ingest, build, eval, bench, sweep and
                progressive commands.
"""
import json
import logging
import re

import numpy as np
import pandas as pd

from kregcore.model.coreset import (Method, MethodSpec, ProgressiveSpec,
                                    grid_gamma_for)
from kregcore.model.data import (Dataset, coreset_metadata, format_dataset,
                                 format_param, load_coreset, load_csv,
                                 synth_ar1)
from kregcore.model.errors import ContractError, DataError
from kregcore.model.evaluation import (EvalConfig, bench, evaluation_points,
                                       pointwise, summarize, sweep,
                                       window_errors)
from kregcore.model.kernel import GaussianKernel
from kregcore.model.regress import EvalContext, reg_batch

logger = logging.getLogger(__name__)

_TRUNCATION = re.compile(r'^(\d+(?:\.\d*)?)sigma$')


def eval_context(sigma, form='half', truncate='10sigma'):
    """Build an EvalContext from command-line values.

    :param truncate: 'off' for exact sums, or '<multiple>sigma'.
    """
    kernel = GaussianKernel(sigma, form)
    if truncate == 'off':
        return EvalContext.exact(kernel)
    match = _TRUNCATION.match(truncate)
    if not match:
        raise ContractError("truncation must be 'off' or '<k>sigma', got %r"
                            % (truncate,))
    return EvalContext.truncated(kernel, float(match.group(1)))


def shift_to_now(ds):
    """Shift x so that the latest point sits at 0 (one-dimensional data)."""
    if ds.d != 1:
        raise ContractError('shifting to now needs one-dimensional data')
    return Dataset(ds.x - ds.upper, ds.y, ds.w)


def _csv(frame):
    return frame.to_csv(index=False, float_format='%.17g', na_rep='nan')


class Controller:
    """Run kregcore commands and return their primary output as text.

    :param seed: (int) seed for randomized methods and evaluation clouds.
    :param threads: (int or None) worker count for kernel sums.
    :param as_json: (bool) emit table outputs as JSON documents.
    """

    def __init__(self, seed=0, threads=None, as_json=False):
        self.seed = seed
        self.threads = threads
        self.as_json = as_json

    def _table(self, frame, **extra):
        if not self.as_json:
            return _csv(frame)
        document = dict(extra)
        document['rows'] = json.loads(frame.to_json(orient='records'))
        return json.dumps(document, indent=2) + '\n'

    def synth(self, n, c=0.0, phi=1.0, y0=10.0, noise=1.0):
        """Generate an AR(1) series."""
        ds = synth_ar1(n, c, phi, y0, noise, seed=self.seed)
        meta = ['synth=ar1 n=%d c=%s phi=%s y0=%s noise=%s'
                % (n, format_param(c), format_param(phi), format_param(y0),
                   format_param(noise)),
                'seed=%d' % self.seed]
        return format_dataset(ds, meta)

    def ingest(self, path, schema=None):
        """Convert a raw delimited file into the canonical x..,y,w format."""
        ds = load_csv(path, schema)
        meta = ['skipped=%d' % ds.skipped, 'source=%s' % ds.source_hash()]
        return format_dataset(ds, meta)

    def method_spec(self, P, method, size=None, k=None, gamma=None,
                    eps=None, rho=None, sigma=None, per_block=False,
                    origin=None, progressive=None):
        """Turn command-line values into a MethodSpec for dataset P.

        eps and rho (with sigma) give the grid side through grid_gamma_for;
        origin None anchors grids at zero in one dimension and at the data
        extent otherwise.
        """
        method = Method.from_label(method)
        if method.is_grid and gamma is None and eps is not None:
            if rho is None or sigma is None:
                raise ContractError('--eps needs --rho and --sigma')
            gamma = grid_gamma_for(eps, sigma, rho, P.d)
            logger.info('grid side from eps=%g rho=%g: gamma=%g', eps, rho,
                        gamma)
        if origin is None:
            origin = 'zero' if P.d == 1 else 'extent'
        if origin == 'zero':
            origin = None
        return MethodSpec(method, size=size, k=k, gamma=gamma,
                          progressive=progressive, per_block=per_block,
                          origin=origin)

    def build(self, path, schema, spec_args, ctx, shift_now=False):
        """Build a coreset of the data in path.

        :param spec_args: keyword arguments for method_spec.
        :return: the coreset file text.
        """
        P = load_csv(path, schema)
        if shift_now:
            P = shift_to_now(P)
        spec = self.method_spec(P, **spec_args)
        seed = self.seed if spec.method.is_randomized else None
        cs = spec.build(P, seed=seed, ctx=ctx, threads=self.threads)
        return format_dataset(cs.data, coreset_metadata(cs))

    def _queries(self, P, queries, cfg):
        if queries.startswith('random:'):
            try:
                n = int(queries[len('random:'):])
            except ValueError:
                raise ContractError('bad query spec %r' % queries) from None
            return evaluation_points(P, cfg, n)
        try:
            frame = pd.read_csv(queries, comment='#',
                                float_precision='round_trip')
        except (OSError, pd.errors.ParserError,
                pd.errors.EmptyDataError) as exc:
            raise DataError('cannot read %s: %s' % (queries, exc)) from exc
        for prefix in ('q', 'x'):
            names = ['%s%d' % (prefix, j + 1) for j in range(P.d)]
            if all(name in frame.columns for name in names):
                return frame[names].to_numpy(dtype=float)
        if frame.shape[1] < P.d:
            raise DataError('%s has %d columns, queries need %d'
                            % (queries, frame.shape[1], P.d))
        return frame.iloc[:, :P.d].to_numpy(dtype=float)

    def evaluate(self, path, schema, ctx, queries='random:1000',
                 coreset=None, rho=0.0, margin=0.0):
        """Evaluate reg over the data in path, or compare it with a coreset.

        Without a coreset the output has columns q1..qd, value, defined.
        With one it has q1..qd, reg_P, reg_S, abs_err, admissible and the
        ErrorReport as leading '#' lines (or as a JSON document).
        """
        P = load_csv(path, schema)
        cfg = EvalConfig(ctx, rho=rho, margin=margin, seed=self.seed,
                         threads=self.threads)
        q = self._queries(P, queries, cfg)
        if coreset is None:
            result = reg_batch(P, ctx, q, self.threads)
            columns = {'q%d' % (j + 1): q[:, j] for j in range(P.d)}
            columns.update(value=result.values,
                           defined=result.defined.astype(int))
            return self._table(pd.DataFrame(columns))
        cs = load_coreset(coreset)
        frame, report = pointwise(P, cs, cfg, q)
        if self.as_json:
            return json.dumps(report.to_dict(), indent=2) + '\n'
        header = ' '.join('%s=%s' % (key, format_param(value))
                          for key, value in report.to_dict().items()
                          if key not in ('argmax_q', 'runs'))
        argmax = ';'.join(repr(c) for c in report.argmax_q)
        return '# %s argmax_q=%s\n' % (header, argmax) + _csv(frame)

    def bench(self, path, schema, ctx, methods, sizes, spec_args=None,
              n_points=None, rho=0.0, margin=0.0):
        """Time and measure every method at every size."""
        P = load_csv(path, schema)
        spec_args = spec_args or {}
        specs = [self.method_spec(P, m, size=sizes[0], **spec_args)
                 for m in methods]
        cfg = EvalConfig(ctx, n_points=n_points, rho=rho, margin=margin,
                         seed=self.seed, threads=self.threads)
        return self._table(bench(P, specs, sizes, cfg))

    def sweep(self, path, schema, ctx, methods, sizes, sigmas,
              repetitions, spec_args=None, n_points=None, rho=0.0,
              margin=0.0, summary=False):
        """Run the methods x sizes x bandwidths x repetitions grid."""
        P = load_csv(path, schema)
        spec_args = spec_args or {}
        specs = [self.method_spec(P, m, size=sizes[0], **spec_args)
                 for m in methods]
        cfg = EvalConfig(ctx, n_points=n_points, rho=rho, margin=margin,
                         seed=self.seed, repetitions=repetitions,
                         threads=self.threads)
        rows = sweep(P, specs, sizes, sigmas, cfg)
        return self._table(summarize(rows) if summary else rows)

    def progressive(self, path, schema, ctx, spec, windows, shift_now=False,
                    n_points=None, rho=0.0):
        """Error of a progressive coreset over windows ending now."""
        P = load_csv(path, schema)
        if shift_now:
            P = shift_to_now(P)
        if np.any(P.x > 0):
            raise ContractError('data has x > 0; use --shift-now')
        cfg = EvalConfig(ctx, n_points=n_points, rho=rho, seed=self.seed,
                         threads=self.threads)
        return self._table(window_errors(P, spec, None, windows, cfg),
                           gamma1=spec.gamma1, width1=spec.width1, a=spec.a)


def progressive_spec(gamma1=None, width1=None, growth=1.5, regions=None,
                     eps=None, rho=None, sigma=None):
    """ProgressiveSpec from command-line values: gamma1 directly, or
    derived from eps, rho and sigma."""
    if width1 is None:
        raise ContractError('progressive aggregation needs --width1')
    if gamma1 is None:
        if None in (eps, rho, sigma):
            raise ContractError('give --gamma1, or --eps, --rho and --sigma')
        return ProgressiveSpec.from_error(eps, sigma, rho, width1, growth,
                                          regions)
    return ProgressiveSpec(gamma1, width1, growth, regions)
