"""
The ``schemabridge`` command line. Each invocation works on the federation
persisted in the state directory (``--state-dir``, ``SB_STATE_DIR`` or
``./.schemabridge``), so subcommands compose across invocations.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 the convergence
check found a difference.
"""
import argparse
import io
import logging
import random
import sys

import schemabridge
from .adapters.directory import DirectorySourceAdapter
from .base import helpers as sb_helpers
from .base.propagation import SchemaChange
from .interfaces.exceptions import DuplicateSiteException
from .interfaces.exceptions import SchemaBridgeBaseException
from .mediator import SchemaMediator
from .scenario import RandomEvolution
from .scenario import ScenarioScript
from .scenario import parse_faults

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_DIVERGED = 3


class CommandContext(object):
    """
    What the subcommands of one invocation share: the options, the output
    streams, the lazily opened mediator and the seeded random generator.
    """

    def __init__(self, options, out, err):
        self.options = options
        self.out = out
        self.err = err
        self.rng = random.Random(options.seed)
        self.script = None
        self._mediator = None

    @property
    def mediator(self):
        if self._mediator is None:
            config = {}
            if self.options.state_dir:
                config['state_dir'] = self.options.state_dir
            self._mediator = SchemaMediator(config)
        return self._mediator

    def path(self, path):
        return self.script.resolve(path) if self.script else path

    def read(self, path):
        with io.open(self.path(path), encoding='utf-8') as f:
            return f.read()

    def echo(self, text=""):
        self.out.write(text + "\n")

    def warn(self, text):
        self.err.write("warning: %s\n" % text)


def do_register(ctx, args):
    mediator = ctx.mediator
    if args.site in mediator.registry.sites:
        raise DuplicateSiteException(
            "Site %s is already registered" % args.site)
    sb_helpers.assert_valid_site(args.site)
    adapter = DirectorySourceAdapter.create(
        mediator.site_dir(args.site), args.site, ctx.read(args.schema_file),
        ctx.read(args.data_file), mediator.config.two_digit_year_pivot)
    schema = mediator.registry.register_schema(args.site, adapter)
    ctx.echo("registered %s: %s" % (args.site,
                                    ", ".join(schema.class_names)))


def do_assert(ctx, args):
    assertions = ctx.mediator.correspondence.add(ctx.read(args.dsl_file))
    ctx.echo("stored %d assertions" % len(assertions))


def do_integrate(ctx, args):
    classes = ctx.mediator.integration.integrate(
        ctx.read(args.global_def_file))
    for vc in classes:
        ctx.echo("%s %s: %s" % (vc.operator.value, vc.name, vc.status_text))
        for warning in vc.warnings:
            ctx.warn("%s: %s" % (vc.name, warning))


def do_rename_class(ctx, args):
    ctx.mediator.registry.rename_class(args.site, args.old, args.new)
    ctx.echo("renamed %s.%s to %s" % (args.site, args.old, args.new))


def do_rename_attribute(ctx, args):
    ctx.mediator.registry.rename_attribute(args.site, args.cls, args.old,
                                           args.new)
    ctx.echo("renamed %s.%s.%s to %s" % (args.site, args.cls, args.old,
                                         args.new))


def do_show_global(ctx, args):
    text = ctx.mediator.integration.export()
    if args.export:
        sb_helpers.atomic_write(ctx.path(args.export),
                                text + "\n" if text else "")
    else:
        ctx.echo(text)


def do_query(ctx, args):
    result = ctx.mediator.query.execute(args.text)
    for warning in result.warnings:
        ctx.warn(warning)
    ctx.out.write(result.to_tsv() if args.format == 'tsv'
                  else result.to_table())


def do_change(ctx, args):
    adapter = ctx.mediator.adapter(args.site)
    change = SchemaChange.parse(" ".join(args.change_line))
    version = adapter.apply_local_change(change)
    ctx.echo("%s at version %d%s" % (args.site, version,
                                     "" if adapter.online else
                                     " (link down, pending)"))


def do_link(ctx, args):
    ctx.mediator.adapter(args.site).set_connectivity(args.state == 'up')
    ctx.echo("link %s %s" % (args.site, args.state))


def do_relay(ctx, args):
    if bool(args.all) == bool(args.site):
        raise SchemaBridgeBaseException(
            "relay takes either a site or --all")
    if args.all:
        reports = ctx.mediator.propagation.relay_all()
    else:
        reports = [ctx.mediator.propagation.relay(args.site)]
    for report in reports:
        if not report.link_up:
            ctx.echo("%s: link down" % report.site)
            continue
        ctx.echo("%s: delivered=%d skipped=%d buffered=%d" % (
            report.site, report.delivered, report.skipped_duplicates,
            report.buffered))
        for name, status in report.affected_virtual_classes:
            ctx.echo("  %s: %s" % (name, status))
        for seq, reason in report.rejected:
            ctx.echo("  rejected entry %d: %s" % (seq, reason))


def do_check_convergence(ctx, args):
    report = ctx.mediator.propagation.convergence_check()
    if report.equal:
        ctx.echo("equal")
        return EXIT_OK
    ctx.echo("not equal")
    for line in report.diff:
        ctx.echo(line)
    return EXIT_DIVERGED


def do_random_changes(ctx, args):
    evolution = RandomEvolution(ctx.rng, args.offline_probability)
    report = evolution.run(ctx.mediator, args.count)
    ctx.echo("applied %d random changes (%d refused, %d relays)" % (
        report.applied, report.refused, report.relays))


def do_run_scenario(ctx, args):
    script = ScenarioScript.load(args.script_file)
    if args.faults:
        with io.open(args.faults, encoding='utf-8') as f:
            script = script.merge_faults(parse_faults(f.read()))
    parser = build_parser(scenario=True)
    ctx.script = script
    try:
        for step in script:
            ctx.echo("> %s" % " ".join(step.argv))
            step_args = parser.parse_args(step.argv)
            code = step_args.func(ctx, step_args)
            if code:
                return code
    finally:
        ctx.script = None
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as validation errors instead of exiting."""

    def error(self, message):
        raise SchemaBridgeBaseException("%s: %s" % (self.prog, message))


def build_parser(scenario=False):
    """
    The argument parser of the command line. A scenario parser accepts the
    subcommands only.
    """
    parser = _Parser(
        prog='schemabridge',
        description="Mediate queries across autonomous component databases "
                    "through an integrated global schema.")
    if not scenario:
        parser.add_argument('--version', action='version',
                            version=schemabridge.get_version())
        parser.add_argument('--state-dir',
                            help="Federation state directory (default: "
                                 "$SB_STATE_DIR or ./.schemabridge)")
        parser.add_argument('--seed', type=int, default=0,
                            help="Seed for random scenario steps")
        parser.add_argument('-v', '--verbose', action='count', default=0,
                            help="Log to standard error; repeat for more")
        parser.add_argument('--log-file', metavar='FILE',
                            help="Append INFO and above (or the -v level)"
                                 " to FILE")
    commands = parser.add_subparsers(dest='command', metavar='<command>')
    commands.required = True

    def command(name, func, help_text):
        sub = commands.add_parser(name, help=help_text,
                                  description=help_text)
        sub.set_defaults(func=func)
        return sub

    sub = command('register', do_register,
                  "Register a component database from a schema file and a "
                  "data file")
    sub.add_argument('site')
    sub.add_argument('schema_file')
    sub.add_argument('data_file')

    sub = command('assert', do_assert,
                  "Load correspondence assertions")
    sub.add_argument('dsl_file')

    sub = command('integrate', do_integrate,
                  "Define virtual classes from a global schema definition")
    sub.add_argument('global_def_file')

    sub = command('rename-class', do_rename_class,
                  "Rename a class in the mediator's copy of a site schema")
    sub.add_argument('site')
    sub.add_argument('old')
    sub.add_argument('new')

    sub = command('rename-attribute', do_rename_attribute,
                  "Rename an attribute in the mediator's copy of a site "
                  "schema")
    sub.add_argument('site')
    sub.add_argument('cls', metavar='class')
    sub.add_argument('old')
    sub.add_argument('new')

    sub = command('show-global', do_show_global,
                  "Print the global schema in canonical form")
    sub.add_argument('--export', metavar='FILE',
                     help="Write the export to FILE instead")

    sub = command('query', do_query,
                  "Query a virtual class: select <attrs>|* from <class> "
                  "[where <attr> <op> <value> and ...]")
    sub.add_argument('text')
    sub.add_argument('--format', choices=('table', 'tsv'), default='table')

    sub = command('change', do_change,
                  "Apply a local schema change at a site, e.g. "
                  "kind=AddAttribute class=employees attr=fax type=text?")
    sub.add_argument('site')
    sub.add_argument('change_line', nargs='+')

    sub = command('link', do_link, "Bring a site's link up or down")
    sub.add_argument('site')
    sub.add_argument('state', choices=('up', 'down'))

    sub = command('relay', do_relay,
                  "Relay pending schema changes of a site to the mediator")
    sub.add_argument('site', nargs='?')
    sub.add_argument('--all', action='store_true',
                     help="Relay every registered site")

    command('check-convergence', do_check_convergence,
            "Compare the maintained global schema with a rebuild from "
            "scratch")

    sub = command('random-changes', do_random_changes,
                  "Apply seeded random schema changes across all sites")
    sub.add_argument('count', type=int)
    sub.add_argument('offline_probability', type=float, nargs='?',
                     default=0.0)

    if not scenario:
        sub = command('run-scenario', do_run_scenario,
                      "Replay a scenario script of subcommand lines")
        sub.add_argument('script_file')
        sub.add_argument('--faults', metavar='FILE',
                         help="Fault script of t=<step> site=<id> "
                              "online|offline|change lines")
    return parser


def exit_code(error):
    """The exit code of a failure, following the chain of causes."""
    seen = error
    while seen is not None:
        if isinstance(seen, (OSError, IOError)):
            return EXIT_IO
        seen = seen.__cause__ if hasattr(seen, '__cause__') else None
    return EXIT_VALIDATION


def _log_level(verbosity):
    if verbosity >= 3:
        return schemabridge.TRACE
    return {1: logging.INFO, 2: logging.DEBUG}.get(verbosity,
                                                   logging.WARNING)


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SchemaBridgeBaseException as e:
        err.write("error: %s\n" % e)
        return EXIT_VALIDATION
    handlers = []
    if args.verbose:
        handlers.append(schemabridge.set_stream_logger(
            'schemabridge', level=_log_level(args.verbose), stream=err))
    if args.log_file:
        handlers.append(schemabridge.set_file_logger(
            'schemabridge', args.log_file,
            level=min(logging.INFO, _log_level(args.verbose))))
    ctx = CommandContext(args, out, err)
    try:
        return args.func(ctx, args) or EXIT_OK
    except SchemaBridgeBaseException as e:
        err.write("error: %s\n" % e)
        return exit_code(e)
    except (OSError, IOError) as e:
        err.write("error: %s\n" % e)
        return EXIT_IO
    finally:
        for handler in handlers:
            logging.getLogger('schemabridge').removeHandler(handler)
            handler.close()


def run(argv=None):
    sys.exit(main(argv))


if __name__ == '__main__':
    run()
