"""
Command-line interface for kregcore.

    kregcore synth --n 1000 --seed 7 --out ar1.csv
    kregcore build --method ga --gamma 2 --in fig2.csv --out q.csv
    kregcore eval --in ar1.csv --coreset q.csv --queries random:10000

Exit codes: 0 on success, 1 on a usage error, 2 on a data or model error.
Output goes to --out or standard output and is only written once the command
has succeeded.
"""
import argparse
import logging
import sys

from kregcore import __version__, defaults
from kregcore.controller.controller import (Controller, eval_context,
                                            progressive_spec)
from kregcore.model.data import ColumnSchema
from kregcore.model.errors import KregError

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

METHOD_CODES = ('rs', 'kcen', 'z', 'za', 'g', 'ga', 'an', 'prog-ga')


class UsageError(Exception):
    """The command line could not be parsed."""


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError('%s: error: %s' % (self.prog, message))


def _floats(text):
    try:
        return [float(v) for v in text.split(',') if v]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma-separated numbers, '
                                         'got %r' % text) from None


def _ints(text):
    try:
        return [int(v) for v in text.split(',') if v]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma-separated integers, '
                                         'got %r' % text) from None


def _names(text):
    return tuple(v.strip() for v in text.split(',') if v.strip())


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0,
                        help='seed of randomized steps (default: %(default)s)')
    common.add_argument('--threads', type=int, default=None,
                        help='worker threads (default: $%s or 1)'
                        % defaults.THREADS_ENV)
    common.add_argument('--json', action='store_true',
                        help='emit tables as JSON')
    common.add_argument('-v', '--verbose', action='store_true',
                        help='log progress to standard error')
    common.add_argument('--out', default=None,
                        help='output file (default: standard output)')
    return common


def _schema_flags():
    schema = argparse.ArgumentParser(add_help=False)
    group = schema.add_argument_group('input columns')
    group.add_argument('--in', dest='input', required=True,
                       help='input CSV file')
    group.add_argument('--x-cols', type=_names, default=(),
                       help='comma-separated x columns (default: all but y '
                       'and w)')
    group.add_argument('--y-col', default='y',
                       help='y column (default: %(default)s)')
    group.add_argument('--w-col', default='w',
                       help='weight column, used when present '
                       '(default: %(default)s)')
    group.add_argument('--delim', default=',',
                       help='field delimiter (default: %(default)r)')
    group.add_argument('--missing-token', default='?',
                       help='missing-value marker (default: %(default)r)')
    group.add_argument('--date-time-cols', type=_names, default=None,
                       help='DATE,TIME columns combined into minutes since '
                       'the first record')
    return schema


def _kernel_flags(sigma_required=True):
    kernel = argparse.ArgumentParser(add_help=False)
    group = kernel.add_argument_group('kernel')
    group.add_argument('--sigma', type=float, required=sigma_required,
                       help='kernel bandwidth')
    group.add_argument('--kernel-form', choices=('half', 'plain'),
                       default='half',
                       help='exponent denominator 2 sigma^2 (half) or '
                       'sigma^2 (plain) (default: %(default)s)')
    group.add_argument('--truncate', default='10sigma',
                       help="'off' or '<k>sigma' (default: %(default)s)")
    return kernel


def _method_flags():
    method = argparse.ArgumentParser(add_help=False)
    group = method.add_argument_group('coreset method')
    group.add_argument('--k', type=int, default=None,
                       help='number of k-center centers')
    group.add_argument('--gamma', type=float, default=None,
                       help='grid cell side')
    group.add_argument('--eps', type=float, default=None,
                       help='target error; with --rho and --sigma gives the '
                       'grid side eps*sigma*rho/(8 sqrt(d))')
    group.add_argument('--rho', type=float, default=None,
                       help='kde threshold of the error guarantee')
    group.add_argument('--per-block', action='store_true',
                       help='z-order: independent offset in every block')
    group.add_argument('--grid-origin', choices=('zero', 'extent'),
                       default=None,
                       help='grid anchor (default: zero for d=1, extent '
                       'otherwise)')
    group.add_argument('--gamma1', type=float, default=None,
                       help='progressive: finest grid side')
    group.add_argument('--width1', type=float, default=None,
                       help='progressive: width of the newest region')
    group.add_argument('--growth', type=float,
                       default=defaults.PROGRESSIVE_GROWTH,
                       help='progressive: growth factor (default: '
                       '%(default)s)')
    group.add_argument('--regions', type=int, default=None,
                       help='progressive: number of regions (default: '
                       'cover the data)')
    group.add_argument('--shift-now', action='store_true',
                       help='shift x so that the latest point is at 0')
    return method


def _eval_flags():
    evaluation = argparse.ArgumentParser(add_help=False)
    group = evaluation.add_argument_group('evaluation')
    group.add_argument('--eval-points', type=int, default=None,
                       help='evaluation cloud size (default: %d for d=1, %d '
                       'otherwise)' % (defaults.EVAL_POINTS_1D,
                                       defaults.EVAL_POINTS_2D))
    group.add_argument('--margin', type=float, default=0.0,
                       help='widen the evaluation box (default: '
                       '%(default)s)')
    return evaluation


def build_parser():
    """Return the kregcore argument parser."""
    parser = _Parser(prog='kregcore',
                     description='Coresets for Nadaraya-Watson kernel '
                     'regression.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    sub = parser.add_subparsers(dest='command', metavar='command',
                                parser_class=_Parser)
    sub.required = True
    common = _common()

    synth = sub.add_parser('synth', parents=[common],
                           help='generate an AR(1) series')
    ar1 = defaults.ar1_defaults()
    synth.add_argument('--n', type=int, default=ar1['n'],
                       help='number of points (default: %(default)s)')
    synth.add_argument('--c', type=float, default=ar1['c'],
                       help='drift (default: %(default)s)')
    synth.add_argument('--phi', type=float, default=ar1['phi'],
                       help='autoregression coefficient (default: '
                       '%(default)s)')
    synth.add_argument('--y0', type=float, default=ar1['y0'],
                       help='first value (default: %(default)s)')
    synth.add_argument('--noise', type=float, default=ar1['noise_sigma'],
                       help='noise standard deviation (default: '
                       '%(default)s)')

    sub.add_parser('ingest', parents=[common, _schema_flags()],
                   help='convert a raw CSV into x..,y,w format')

    build = sub.add_parser('build', parents=[common, _schema_flags(),
                                             _kernel_flags(False),
                                             _method_flags()],
                           help='build a coreset')
    build.add_argument('--method', choices=METHOD_CODES, required=True)
    build.add_argument('--size', type=int, default=None,
                       help='coreset size (rs, z, za; grid methods via a '
                       'fitted gamma)')

    evaluate = sub.add_parser('eval', parents=[common, _schema_flags(),
                                               _kernel_flags(),
                                               _eval_flags()],
                              help='evaluate reg, or compare with a coreset')
    evaluate.add_argument('--queries', default='random:1000',
                          help="'random:N' or a CSV of query points "
                          "(default: %(default)s)")
    evaluate.add_argument('--coreset', default=None,
                          help='coreset file to compare against')
    evaluate.add_argument('--rho', type=float, default=0.0,
                          help='skip queries with kde_P < rho (default: '
                          '%(default)s)')

    for name, text in (('bench', 'time and measure methods by size'),
                       ('sweep', 'methods x sizes x bandwidths x seeds')):
        table = sub.add_parser(name, parents=[common, _schema_flags(),
                                              _kernel_flags(name == 'bench'),
                                              _method_flags(),
                                              _eval_flags()],
                               help=text)
        table.add_argument('--methods', type=_names, required=True,
                           help='comma-separated method codes')
        table.add_argument('--sizes', type=_ints, default=None,
                           help='comma-separated coreset sizes')
    sweep = sub.choices['sweep']
    sweep.add_argument('--sigmas', type=_floats, required=True,
                       help='comma-separated bandwidths')
    sweep.add_argument('--repetitions', type=int,
                       default=defaults.REPETITIONS,
                       help='seeds per cell (default: %(default)s)')
    sweep.add_argument('--summary', action='store_true',
                       help='emit medians per (method, size, sigma)')

    progressive = sub.add_parser('progressive',
                                 parents=[common, _schema_flags(),
                                          _kernel_flags(), _method_flags(),
                                          _eval_flags()],
                                 help='progressive coreset error by window')
    progressive.add_argument('--windows', type=_floats, required=True,
                             help='comma-separated window widths T')
    return parser


def _schema(args):
    return ColumnSchema(x_cols=args.x_cols, y_col=args.y_col,
                        w_col=args.w_col, delimiter=args.delim,
                        missing_token=args.missing_token,
                        date_time_cols=args.date_time_cols)


def _check_methods(methods):
    unknown = [m for m in methods if m not in METHOD_CODES]
    if unknown:
        raise UsageError('unknown methods %s (choose from %s)'
                         % (', '.join(unknown), ', '.join(METHOD_CODES)))


def _spec_args(args):
    progressive = None
    if args.width1 is not None:
        progressive = progressive_spec(args.gamma1, args.width1, args.growth,
                                       args.regions, args.eps, args.rho,
                                       args.sigma)
    return dict(k=args.k, gamma=args.gamma, eps=args.eps, rho=args.rho,
                sigma=args.sigma, per_block=args.per_block,
                origin=args.grid_origin, progressive=progressive)


def _dispatch(args):
    controller = Controller(args.seed, args.threads, args.json)
    if args.command == 'synth':
        return controller.synth(args.n, args.c, args.phi, args.y0, args.noise)
    schema = _schema(args)
    if args.command == 'ingest':
        return controller.ingest(args.input, schema)
    ctx = None
    if args.sigma is not None:
        ctx = eval_context(args.sigma, args.kernel_form, args.truncate)
    if args.command == 'build':
        spec_args = _spec_args(args)
        spec_args.update(method=args.method, size=args.size)
        return controller.build(args.input, schema, spec_args, ctx,
                                args.shift_now)
    if args.command == 'eval':
        return controller.evaluate(args.input, schema, ctx, args.queries,
                                   args.coreset, args.rho, args.margin)
    if args.command == 'progressive':
        spec = progressive_spec(args.gamma1, args.width1, args.growth,
                                args.regions, args.eps, args.rho, args.sigma)
        return controller.progressive(args.input, schema, ctx, spec,
                                      args.windows, args.shift_now,
                                      args.eval_points, args.rho or 0.0)
    _check_methods(args.methods)
    sizes = args.sizes or [None]
    spec_args = _spec_args(args)
    rho = spec_args['rho'] or 0.0
    if args.command == 'bench':
        return controller.bench(args.input, schema, ctx, args.methods, sizes,
                                spec_args, args.eval_points, rho, args.margin)
    if ctx is None:
        ctx = eval_context(args.sigmas[0], args.kernel_form, args.truncate)
    return controller.sweep(args.input, schema, ctx, args.methods, sizes,
                            args.sigmas, args.repetitions, spec_args,
                            args.eval_points, rho, args.margin, args.summary)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, 'w', newline='') as fh:
        fh.write(text)


def run(argv=None):
    """Run kregcore with argv (default sys.argv[1:]) and return the exit
    code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write('%s\n' % exc)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose
                        else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s',
                        stream=sys.stderr)
    try:
        text = _dispatch(args)
        _emit(text, args.out)
    except UsageError as exc:
        sys.stderr.write('kregcore: error: %s\n' % exc)
        return EXIT_USAGE
    except (KregError, OSError) as exc:
        sys.stderr.write('kregcore: %s\n' % exc)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())
