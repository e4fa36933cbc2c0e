'''
Exact solvers: LP-based branch-and-bound over the linearized program, and
an exhaustive oracle for tiny scenarios.

Money is integral, so a node is pruned as soon as its lower bound exceeds
the incumbent minus one half.
'''

import heapq
import itertools
import math
import time
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from . import config, heuristic
from .milp import BRANCH_ORDER, build_milp, export_mps  # noqa: F401
from .model import Solution, evaluate_cost, migration_tensor, network_load

# Values closer than this to an integer count as integral
INTEGRALITY_TOLERANCE = 1e-6


class SearchSpaceError(ValueError):
    """The brute-force enumeration would exceed its size guard."""
    pass


class SolveStatus(Enum):
    optimal = 'optimal'
    feasible_bound_gap = 'feasible-bound-gap'
    time_limit = 'time-limit'
    infeasible = 'infeasible'


@dataclass(frozen=True)
class SolveLimits:
    """Budgets for one branch-and-bound run. ``None`` means unlimited.

    With ``warm_start`` the search starts from the better of the all-penalty
    solution and the uncapped greedy one.
    """
    time_budget: float = 60.0
    node_budget: int = None
    max_open_nodes: int = 200000
    warm_start: bool = True

    @classmethod
    def from_settings(cls, settings=None, **overrides):
        if settings is None:
            settings = config.read_user_config().get('solver', {})
        values = {k: settings[k] for k in ('time_budget', 'node_budget', 'max_open_nodes', 'warm_start')
                  if k in settings}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class SolveReport:
    """Outcome of an exact solve.

    ``best_bound`` never exceeds ``objective``; they are equal when the
    status is optimal. ``migrations`` holds the migrated units ``[d, u, s, t]``
    as read from the program's ``y_mig`` variables.
    """
    solution: Solution
    objective: int
    status: SolveStatus
    nodes: int
    wall_time: float
    best_bound: int
    cost: object = None
    migrations: np.ndarray = None


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = 0
    changes: tuple = ()


class BranchAndBound(object):
    """Best-first branch-and-bound on a :class:`~cloudletopt.milp.MilpModel`.

    Each node solves the LP relaxation with HiGHS and combines it with a
    combinatorial bound: every unit of demand costs at least the cheaper of
    its penalty and the lowest operating price of a data center still allowed
    to serve it. Branching takes the most fractional variable of the first
    family in :data:`~cloudletopt.milp.BRANCH_ORDER` that has one. Every
    fractional node also offers its :meth:`round_down` point as an incumbent.
    """

    def __init__(self, milp, limits=None, verbose=False):
        self.milp = milp
        self.limits = limits or SolveLimits()
        self.verbose = verbose
        self.scenario = milp.scenario
        (self._c, self._a_ub, self._b_ub, self._a_eq, self._b_eq,
         self._lower, self._upper, self._integral) = milp.matrices()
        self._families = [(family, milp.index[family].ravel()) for family in BRANCH_ORDER if family in milp.index]
        s = self.scenario
        p = s.eligibility_matrix()
        # Operating price of every (d, u, s, t), infinite where ineligible
        self._prices = np.where(p[..., None], s.c_op[:, None, None, :].astype(float), np.inf)
        self._penalties = np.broadcast_to(s.penalty_costs[:, :, None], s.demand.shape).astype(float)

    def log(self, msg_template, *args):
        """Print a timestamped message if verbose."""
        if self.verbose:
            print(time.strftime('%H:%M:%S ') + msg_template.format(*args))

    def _bounds(self, changes):
        lower = self._lower.copy()
        upper = self._upper.copy()
        for column, lo, hi in changes:
            lower[column] = lo
            upper[column] = hi
        return lower, upper

    def combinatorial_bound(self, lower, upper):
        """A lower bound valid for every integral point within the given bounds."""
        index = self.milp.index
        x_open = upper[index['x']] >= 1
        usable = (upper[index['y']] >= 1) & x_open[:, None, None, None]
        prices = np.where(usable, self._prices, np.inf).min(axis=0) if usable.shape[0] else self._penalties
        unit = np.minimum(prices, self._penalties)
        fixed = np.dot(np.ceil(lower[index['x']] - INTEGRALITY_TOLERANCE), self.scenario.c_fix)
        hardware = np.dot(np.ceil(lower[index['z']] - INTEGRALITY_TOLERANCE), self.scenario.c_hw)
        return float(fixed + hardware + np.sum(unit * self.scenario.demand))

    def _relax(self, lower, upper):
        has_eq = self._a_eq.shape[0] > 0
        return linprog(self._c, A_ub=self._a_ub if self._a_ub.shape[0] else None,
                       b_ub=self._b_ub if self._a_ub.shape[0] else None,
                       A_eq=self._a_eq if has_eq else None, b_eq=self._b_eq if has_eq else None,
                       bounds=np.column_stack([lower, upper]), method='highs')

    def _branch_column(self, values):
        """Column to branch on, or None if all integral columns are integral."""
        for family, columns in self._families:
            frac = values[columns] - np.floor(values[columns])
            spread = np.minimum(frac, 1 - frac)
            if np.any(spread > INTEGRALITY_TOLERANCE):
                return int(columns[np.argmax(spread)])
        return None

    def _score(self, vector):
        solution = self.milp.to_solution(vector)
        return evaluate_cost(self.scenario, solution).total

    def round_down(self, values):
        """A feasible vector near an LP point: ``y`` floored, the rest derived from it.

        Flooring never raises a data center's load or a link's traffic, so
        the result keeps every capacity and bandwidth row.
        """
        y = np.floor(values[self.milp.index['y']] + INTEGRALITY_TOLERANCE).astype(np.int64)
        return self.milp.to_vector(Solution.from_assignment(self.scenario, np.maximum(y, 0)))

    def _starts(self):
        yield 'the all-penalty solution', Solution.empty(self.scenario)
        if self.limits.warm_start:
            yield 'the greedy solution', heuristic.solve(self.scenario, heuristic.Heu1Strategy()).solution

    def run(self):
        """Explore the tree within the budgets and return a :class:`SolveReport`."""
        start = time.perf_counter()
        limits = self.limits
        incumbent, incumbent_value = None, math.inf
        for name, solution in self._starts():
            seed = self.milp.to_vector(solution)
            value = self._score(seed) if self.milp.is_feasible(seed) else math.inf
            if value < incumbent_value:
                incumbent, incumbent_value = seed, value
                self.log('Seeded incumbent with {}: {}', name, incumbent_value)

        counter = itertools.count()
        heap = [_Node(-math.inf, next(counter))]
        dive = []
        nodes = 0
        stopped = None
        unresolved = []
        while heap or dive:
            if limits.time_budget is not None and time.perf_counter() - start > limits.time_budget:
                stopped = SolveStatus.time_limit
                break
            if limits.node_budget is not None and nodes >= limits.node_budget:
                stopped = SolveStatus.feasible_bound_gap
                break
            node = dive.pop() if dive else heapq.heappop(heap)
            if node.bound > incumbent_value - 0.5:
                continue
            nodes += 1
            lower, upper = self._bounds(node.changes)
            if np.any(lower > upper):
                continue
            result = self._relax(lower, upper)
            if result.status == 2:
                continue
            if result.status != 0:
                warnings.warn('LP relaxation failed at depth {}: {}'.format(node.depth, result.message))
                unresolved.append(node.bound)
                continue
            bound = max(node.bound, result.fun, self.combinatorial_bound(lower, upper))
            if bound > incumbent_value - 0.5:
                continue
            values = np.asarray(result.x)
            column = self._branch_column(values)
            if column is None:
                candidate = np.round(values)
                if not self.milp.is_feasible(candidate):
                    warnings.warn('Rounded LP solution is infeasible at depth {}'.format(node.depth))
                    unresolved.append(bound)
                    continue
                value = self._score(candidate)
                if value < incumbent_value:
                    # Store y_mig and delta at their tight values for the chosen assignment
                    incumbent = self.milp.to_vector(self.milp.to_solution(candidate))
                    incumbent_value = value
                    self.log('New incumbent {} after {} nodes (bound {:.1f})', value, nodes, bound)
                continue
            rounded = self.round_down(values)
            if self.milp.is_feasible(rounded):
                value = self._score(rounded)
                if value < incumbent_value:
                    incumbent, incumbent_value = rounded, value
                    self.log('Rounded incumbent {} after {} nodes (bound {:.1f})', value, nodes, bound)
                    if bound > incumbent_value - 0.5:
                        continue
            value = values[column]
            children = (
                _Node(bound, next(counter), node.depth + 1,
                      node.changes + ((column, lower[column], math.floor(value)),)),
                _Node(bound, next(counter), node.depth + 1,
                      node.changes + ((column, math.ceil(value), upper[column]),)),
            )
            if dive or len(heap) >= limits.max_open_nodes:
                dive.extend(children)
            else:
                for child in children:
                    heapq.heappush(heap, child)

        wall_time = time.perf_counter() - start
        open_bounds = [n.bound for n in itertools.chain(heap, dive)] + unresolved
        if incumbent is None:
            self.log('No feasible point found after {} nodes', nodes)
            status = stopped or SolveStatus.infeasible
            return SolveReport(None, None, status, nodes, wall_time, None)
        if stopped is None and not unresolved:
            status, best_bound = SolveStatus.optimal, incumbent_value
        else:
            status = stopped or SolveStatus.feasible_bound_gap
            # Unexplored nodes may still carry the root bound of -inf
            lowest = max(min(open_bounds), self.combinatorial_bound(self._lower, self._upper)) \
                if open_bounds else incumbent_value
            best_bound = min(incumbent_value, int(math.ceil(lowest - INTEGRALITY_TOLERANCE)))
            warnings.warn('Search stopped ({}) with objective {} and bound {}'.format(
                status.value, incumbent_value, best_bound))
        self.log('Finished: {} after {} nodes in {:.3f}s, objective {}', status.value, nodes, wall_time,
                 incumbent_value)
        solution = self.milp.to_solution(incumbent)
        return SolveReport(solution, incumbent_value, status, nodes, wall_time, best_bound,
                           cost=evaluate_cost(self.scenario, solution), migrations=self.milp.migrations(incumbent))


def solve(milp, limits=None, verbose=False):
    """Solve a program by branch-and-bound within the given limits."""
    return BranchAndBound(milp, limits, verbose).run()


def _compositions(n_cells, total):
    """All non-negative integer vectors of length ``n_cells`` summing to at most ``total``.

    Built one cell at a time, so no intermediate array holds more rows
    than the comb(total + n_cells, n_cells) of the result.
    """
    vectors = np.zeros((1, 0), dtype=np.int64)
    for _ in range(n_cells):
        room = total - vectors.sum(axis=1)
        vectors = np.concatenate([
            np.column_stack([vectors[room >= v], np.full(int(np.count_nonzero(room >= v)), v, dtype=np.int64)])
            for v in range(total + 1)])
    return vectors


def _search_size(scenario):
    """Assignments per slot, and (x, z) combinations."""
    p = scenario.eligibility_matrix()
    per_slot, placements = 1, 1
    for d in range(len(scenario.data_centers)):
        k_max, k_min = int(scenario.k_max[d]), int(scenario.k_min[d])
        cells = int(p[d].sum())
        per_slot *= math.comb(k_max + cells, cells)
        placements *= k_max - k_min + 2
    return per_slot, placements


def brute_force(scenario, guard=None, max_assignments=3000):
    """Exhaustively solve a tiny scenario.

    Every per-slot assignment within the data center caps, eligibility and
    bandwidth is enumerated once; for each choice of (x, z) a dynamic
    program over slots adds up operating, penalty and migration costs.

    :param guard: maximal work (placements times assignments times
        transitions); defaults to the configured ``brute_force_guard``
    :param max_assignments: maximal number of assignments per slot
    :raises SearchSpaceError: if either limit would be exceeded
    """
    start = time.perf_counter()
    if guard is None:
        guard = config.read_user_config()['solver']['brute_force_guard']
    D, U, S, T = scenario.shape
    per_slot, placements = _search_size(scenario)
    work = placements * (per_slot + per_slot ** 2 * (T - 1))
    if per_slot > max_assignments or work > guard:
        raise SearchSpaceError('Search space too large: {} assignments per slot, {} placements, {} work units'.format(
            per_slot, placements, work))

    p = scenario.eligibility_matrix()
    options = []
    for d in range(D):
        cells = np.argwhere(p[d])
        vectors = _compositions(len(cells), int(scenario.k_max[d]))
        slices = np.zeros((len(vectors), U, S), dtype=np.int64)
        for i, (u, s) in enumerate(cells):
            slices[:, u, s] = vectors[:, i]
        options.append(slices)
    choices = np.array(list(itertools.product(*(range(len(o)) for o in options))), dtype=np.int64)
    assignments = np.stack([options[d][choices[:, d]] for d in range(D)], axis=1)

    # Bandwidth limits do not depend on the slot, so filter once
    loads = network_load(scenario, assignments.transpose(1, 2, 3, 0))
    fits = np.ones(len(assignments), dtype=bool)
    for column, tag in enumerate(('lan-down', 'lan-up', 'man-down', 'man-up')):
        fits &= np.all(loads[tag] <= scenario.bandwidth[:, column, None], axis=0)
    assignments = assignments[fits]

    served = assignments.sum(axis=1)
    unserved = np.maximum(scenario.demand[None] - served[..., None], 0)
    slot_cost = (np.einsum('ldus,dt->lt', assignments, scenario.c_op)
                 + np.einsum('lust,us->lt', unserved, scenario.penalty_costs))
    dc_load = assignments.sum(axis=(2, 3))
    moves = _transition_costs(scenario, assignments) if T > 1 else None

    best = (math.inf, None, None)
    levels = [[(0, 0)] + [(1, k) for k in range(int(scenario.k_min[d]), int(scenario.k_max[d]) + 1)]
              for d in range(D)]
    for placement in itertools.product(*levels):
        x = np.array([level[0] for level in placement], dtype=np.int64)
        z = np.array([level[1] for level in placement], dtype=np.int64)
        fixed = int(np.dot(x, scenario.c_fix) + np.dot(z, scenario.c_hw))
        if fixed >= best[0]:
            continue
        allowed = np.flatnonzero(np.all(dc_load <= z, axis=1))
        value, path = _cheapest_path(slot_cost[allowed], None if moves is None else moves[np.ix_(allowed, allowed)])
        if fixed + value < best[0]:
            best = (fixed + value, (x, z), allowed[path])

    total, (x, z), path = best
    y = assignments[path].transpose(1, 2, 3, 0)
    solution = Solution(x, z, y, np.maximum(scenario.demand - y.sum(axis=0), 0))
    cost = evaluate_cost(scenario, solution)
    assert cost.total == total, 'Enumerated cost {} disagrees with evaluated cost {}'.format(total, cost.total)
    return SolveReport(solution, cost.total, SolveStatus.optimal, placements * len(assignments),
                       time.perf_counter() - start, cost.total, cost=cost,
                       migrations=migration_tensor(scenario, y))


def _transition_costs(scenario, assignments, chunk=64):
    """Migration cost between every pair of assignments, ``[previous, next]``."""
    n = len(assignments)
    costs = np.empty((n, n), dtype=np.int64)
    after = assignments[None]
    for begin in range(0, n, chunk):
        before = assignments[begin:begin + chunk, None]
        non_decreasing = after.sum(axis=2) >= before.sum(axis=2)
        decreases = np.maximum(before - after, 0).sum(axis=2)
        increases = np.maximum(after - before, 0).sum(axis=2)
        moved = np.where(non_decreasing, decreases, increases)
        costs[begin:begin + chunk] = np.einsum('klus,s->kl', moved, scenario.c_mig)
    return costs


def _cheapest_path(slot_cost, moves):
    """Minimal sum of slot costs plus transition costs, and the assignment per slot."""
    best = slot_cost[:, 0].copy()
    back = []
    for t in range(1, slot_cost.shape[1]):
        through = best[:, None] + moves
        previous = np.argmin(through, axis=0)
        best = through[previous, np.arange(len(best))] + slot_cost[:, t]
        back.append(previous)
    last = int(np.argmin(best))
    path = [last]
    for previous in reversed(back):
        path.append(int(previous[path[-1]]))
    return int(best[last]), np.array(path[::-1])
