'''
Command-line entrypoint for generating, solving and benchmarking scenarios.

Exit codes: 0 success, 1 usage error (bad arguments, unreadable or
malformed input), 2 validation failure, 3 no solution within the budget.
'''

import argparse
import sys
import time

from . import config, exact, harness, heuristic
from .model import validate
from .scenario import (GeneratorParams, generate, read_scenario, read_solution, write_scenario,
                       write_solution)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_TIMEOUT = 3


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Reports bad arguments with :data:`EXIT_USAGE`."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '{}: error: {}\n'.format(self.prog, message))


def _read_bytes(path):
    try:
        with open(path, 'rb') as f:
            return f.read()
    except OSError as err:
        raise UsageError('Cannot read {}: {}'.format(path, err.strerror))


def _write_bytes(path, data):
    try:
        with open(path, 'wb') as f:
            f.write(data)
    except OSError as err:
        raise UsageError('Cannot write {}: {}'.format(path, err.strerror))


def _log(args, msg_template, *values):
    if args.verbose:
        print(time.strftime('%H:%M:%S ') + msg_template.format(*values))


def cmd_generate(args):
    """Write a generated scenario."""
    settings = config.read_custom_config(args.params, section='generator') if args.params else None
    overrides = {'seed': args.seed}
    for option, name in (('locations', 'n_locations'), ('services', 'n_services'), ('horizon', 'horizon'),
                         ('qos_attrs', 'qos_attr_count')):
        if getattr(args, option) is not None:
            overrides[name] = getattr(args, option)
    if args.no_remote:
        overrides['include_remote_cloud'] = False
    params = GeneratorParams.from_settings(settings, **overrides)
    scenario = generate(params)
    _write_bytes(args.out, write_scenario(scenario))
    _log(args, 'Wrote {!r} to {}', scenario, args.out)
    return EXIT_OK


def cmd_solve(args):
    """Solve a scenario file and print the cost breakdown."""
    scenario = read_scenario(_read_bytes(args.scenario))
    if args.solver == 'exact':
        limits = exact.SolveLimits.from_settings(time_budget=args.time_budget, node_budget=args.node_budget)
        report = exact.solve(exact.build_milp(scenario), limits, verbose=args.verbose)
        solution, cost, status = report.solution, report.cost, report.status.value
        if solution is None:
            print('No solution found: {}'.format(status))
            return EXIT_TIMEOUT if report.status is exact.SolveStatus.time_limit else EXIT_INVALID
    else:
        rho = args.rho if args.solver == 'heu2' else None
        if rho is None and args.solver == 'heu2':
            rho = config.read_user_config()['heuristic']['rho']
        result = heuristic.solve(scenario, heuristic.Strategy.create(args.solver, rho))
        solution, cost, status = result.solution, result.cost, 'feasible'
    print('status: {}'.format(status))
    for name, value in cost.as_dict().items():
        print('{}: {}'.format(name, value))
    if args.out:
        _write_bytes(args.out, write_solution(solution))
    return EXIT_OK


def cmd_validate(args):
    """Check a solution file against a scenario file."""
    scenario = read_scenario(_read_bytes(args.scenario))
    solution = read_solution(_read_bytes(args.solution))
    violations = validate(scenario, solution)
    for v in violations:
        print('{} {} exceeded by {:g}'.format(v.tag, ' '.join(str(i) for i in v.indices), v.slack))
    if violations:
        print('{} violations'.format(len(violations)))
        return EXIT_INVALID
    print('Solution is feasible')
    return EXIT_OK


def cmd_export_mps(args):
    """Write the linearized program of a scenario in MPS format."""
    scenario = read_scenario(_read_bytes(args.scenario))
    _write_bytes(args.out, exact.export_mps(exact.build_milp(scenario)))
    return EXIT_OK


def cmd_bench(args):
    """Run an experiment sweep."""
    experiment = harness.ExperimentConfig.from_file(args.config)
    harness.run_bench(experiment, args.out_dir, verbose=args.verbose)
    return EXIT_OK


def build_parser():
    parser = ArgumentParser(prog='cloudletopt', description='Cloudlet placement and selection.')
    parser.add_argument('-v', '--verbose', action='store_true', help='print progress messages')
    commands = parser.add_subparsers(dest='command', metavar='command', parser_class=ArgumentParser)
    commands.required = True

    gen = commands.add_parser('generate', help='generate a random scenario')
    gen.add_argument('--params', help='YAML file of generator parameters')
    gen.add_argument('--seed', type=int, required=True, help='random seed')
    gen.add_argument('--out', required=True, help='path of the scenario file to write')
    gen.add_argument('--locations', type=int, help='number of locations (user clusters)')
    gen.add_argument('--services', type=int, help='number of services')
    gen.add_argument('--horizon', type=int, help='number of time slots')
    gen.add_argument('--qos-attrs', type=int, help='number of QoS attributes')
    gen.add_argument('--no-remote', action='store_true', help='leave out the remote cloud')
    gen.set_defaults(func=cmd_generate)

    solve = commands.add_parser('solve', help='solve a scenario')
    solve.add_argument('--scenario', required=True, help='path to a scenario file')
    solve.add_argument('--solver', choices=harness.SOLVERS, default='exact', help='solver to use')
    solve.add_argument('--time-budget', type=float, help='seconds the exact solver may use')
    solve.add_argument('--node-budget', type=int, help='nodes the exact solver may explore')
    solve.add_argument('--rho', type=float, help='cloudlet cap fraction for heu2')
    solve.add_argument('--out', help='path of the solution file to write')
    solve.set_defaults(func=cmd_solve)

    check = commands.add_parser('validate', help='check a solution against its scenario')
    check.add_argument('--scenario', required=True, help='path to a scenario file')
    check.add_argument('--solution', required=True, help='path to a solution file')
    check.set_defaults(func=cmd_validate)

    mps = commands.add_parser('export-mps', help='export the mixed-integer program')
    mps.add_argument('--scenario', required=True, help='path to a scenario file')
    mps.add_argument('--out', required=True, help='path of the MPS file to write')
    mps.set_defaults(func=cmd_export_mps)

    bench = commands.add_parser('bench', help='run an experiment sweep')
    bench.add_argument('--config', required=True, help='YAML experiment file')
    bench.add_argument('--out-dir', required=True, help='folder for results, statistics and charts')
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    """Run the command line and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code
    try:
        return args.func(args)
    except (UsageError, OSError, ValueError) as err:
        print('{}: error: {}'.format(parser.prog, err), file=sys.stderr)
        return EXIT_USAGE
    except harness.ContractBreachError as err:
        print('{}: error: {}'.format(parser.prog, err), file=sys.stderr)
        return EXIT_INVALID


def run():
    sys.exit(main())
