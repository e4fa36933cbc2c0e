'''
Greedy multi-period assignment.

Slots are handled one after another. Each slot starts by carrying over the
previous slot's assignments of the two highest-priority services, then
repeatedly picks the most urgent open demand and the cheapest data center
able to serve it, and assigns as large a lot as capacity and bandwidth
allow. Two strategies exist: :class:`Heu1Strategy` uses cloudlets freely,
:class:`Heu2Strategy` caps the units placed on cloudlets per slot below the
peak the uncapped strategy reaches.
'''

import abc
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .model import QosDirection, Solution, evaluate_cost

# Services ranked below this many are carried over between slots
TRANSFERRED_SERVICES = 2

_UNBOUNDED = np.iinfo(np.int64).max


class StrategyVariant(Enum):
    heu1 = 'heu1'
    heu2 = 'heu2'


class Strategy(metaclass=abc.ABCMeta):
    """Base class for the greedy strategies."""

    variant = None

    @abc.abstractmethod
    def cloudlet_cap(self, scenario):
        """Units that may be placed on cloudlets per slot, or None."""
        pass

    @staticmethod
    def create(name, rho=None):
        """Build a strategy from its name (``heu1`` or ``heu2``)."""
        variant = StrategyVariant(name)
        if variant is StrategyVariant.heu1:
            if rho is not None:
                raise ValueError('The cloudlet cap fraction only applies to heu2')
            return Heu1Strategy()
        return Heu2Strategy() if rho is None else Heu2Strategy(rho)


class Heu1Strategy(Strategy):
    """Cover as much demand as possible."""

    variant = StrategyVariant.heu1

    def cloudlet_cap(self, scenario):
        return None

    def __repr__(self):
        return 'Heu1Strategy()'


class Heu2Strategy(Strategy):
    """Limit cloudlet use per slot to a fraction of the uncapped peak.

    :param rho: the fraction, in (0, 1]
    """

    variant = StrategyVariant.heu2

    def __init__(self, rho=0.8):
        if not 0 < rho <= 1:
            raise ValueError('rho must lie in (0, 1], got {}'.format(rho))
        self.rho = rho

    def cloudlet_cap(self, scenario):
        return heu2_cap(scenario, self.rho)

    def __repr__(self):
        return 'Heu2Strategy(rho={})'.format(self.rho)


def cloudlet_units(scenario, y):
    """Units placed on cloudlets in each slot."""
    cloudlets = [d for d in range(len(scenario.data_centers)) if scenario.is_cloudlet(d)]
    return np.asarray(y)[cloudlets].sum(axis=(0, 1, 2)).astype(np.int64)


def heu2_cap(scenario, rho=0.8):
    """Cloudlet cap: ceil(rho * peak cloudlet units per slot of an uncapped run).

    The peak comes from :class:`Heu1Strategy` on the same scenario, so for
    rho < 1 the cap cuts into the slots where cloudlet use is highest. The
    fraction is taken at its decimal value, so 0.8 of 100 is exactly 80.
    """
    if not 0 < rho <= 1:
        raise ValueError('rho must lie in (0, 1], got {}'.format(rho))
    units = cloudlet_units(scenario, solve(scenario, Heu1Strategy()).solution.y)
    peak = int(units.max()) if units.size else 0
    return int(math.ceil(Fraction(str(rho)) * peak))


@dataclass
class HeuristicResult:
    solution: Solution
    cost: object
    iterations: int


def service_ranks(scenario):
    """Priority rank of every service, 0 being served first.

    Services with stricter lower-is-better requirements (latency) rank
    first, comparing the attributes in declared order; a missing
    requirement counts as the laxest. Equal requirements keep declared order.
    """
    strict = [attr.id for attr in scenario.qos_attributes if attr.direction is QosDirection.lower_is_better]
    services = scenario.services
    order = sorted(range(len(services)),
                   key=lambda s: (tuple(services[s].qos_req.get(a, math.inf) for a in strict), s))
    ranks = np.empty(len(services), dtype=np.int64)
    ranks[order] = np.arange(len(services))
    return ranks


def _fit(budget, rate):
    """Units of ``rate`` Mbps fitting in ``budget`` Mbps."""
    return budget // rate if rate > 0 else _UNBOUNDED


class HeuristicState(object):
    """Residual quantities of one greedy run.

    Capacities, bandwidth and the cloudlet counter are per slot; the
    assignment tensor, the set of opened data centers and the peak loads
    accumulate over the run.
    """

    def __init__(self, scenario, cap=None):
        self.scenario = scenario
        self.cap = cap
        D, U, S, T = scenario.shape
        self.assigned = np.zeros((D, U, S, T), dtype=np.int64)
        self.opened = set()
        self.peak = np.zeros(D, dtype=np.int64)
        self.t = None
        latency = [q for q, attr in enumerate(scenario.qos_attributes)
                   if attr.direction is QosDirection.lower_is_better]
        self.latency = scenario.qos_guarantees[:, :, latency[0]] if latency else np.zeros((D, U))
        self.service_rank = service_ranks(scenario)

    def start_slot(self, t):
        """Reset the per-slot residuals for slot ``t``."""
        s = self.scenario
        D, U, S, _ = s.shape
        p = s.eligibility_matrix()
        self.t = t
        self.permitted = {(u, v): [d for d in range(D) if p[d, u, v]] for u in range(U) for v in range(S)}
        self.residual_demand = s.demand[:, :, t].copy()
        self.residual_capacity = s.k_max.copy()
        self.residual_network = s.bandwidth.copy()
        self.cap_count = 0
        self.pending = []

    def is_local(self, d, u):
        return self.scenario.local_cloudlets[u] == d

    def cap_reached(self, d):
        return self.cap is not None and self.scenario.is_cloudlet(d) and self.cap_count >= self.cap

    def assign(self, d, u, s, units):
        """Record an assignment and draw it from every residual it uses."""
        sc = self.scenario
        down, up = units * sc.l_down[s], units * sc.l_up[s]
        self.assigned[d, u, s, self.t] += units
        self.residual_demand[u, s] -= units
        self.residual_capacity[d] -= units
        self.residual_network[u, 0] -= down
        self.residual_network[u, 1] -= up
        if not self.is_local(d, u):
            self.residual_network[u, 2] -= down
            self.residual_network[u, 3] -= up
        home = sc.home_clusters[d]
        if home >= 0 and home != u:
            self.residual_network[home, 2] -= up
            self.residual_network[home, 3] -= down
        if sc.is_cloudlet(d):
            self.cap_count += units
        self.opened.add(d)
        self.peak[d] = max(self.peak[d], sc.k_max[d] - self.residual_capacity[d])
        assert np.all(self.residual_network >= 0) and self.residual_capacity[d] >= 0 \
            and self.residual_demand[u, s] >= 0, 'Assignment overdrew a residual'

    def marginal_cost(self, d, units):
        """Estimated cost per unit of placing ``units`` more units on ``d`` for the rest of the horizon."""
        sc = self.scenario
        remaining = sc.c_op[d, self.t:]
        operating = Fraction(int(remaining.sum()), len(remaining))
        if d in self.opened:
            headroom = max(0, int(self.peak[d]) - int(sc.k_max[d] - self.residual_capacity[d]))
            activation = int(sc.c_hw[d]) * max(0, units - headroom)
        else:
            activation = int(sc.c_fix[d]) + int(sc.c_hw[d]) * max(units, int(sc.k_min[d]))
        return operating + Fraction(activation, units)


def calc_lot_size(state, d, u, s):
    """Largest number of units ``d`` can serve to ``(u, s)`` right now."""
    sc = state.scenario
    down, up = sc.l_down[s], sc.l_up[s]
    net = state.residual_network
    limits = [state.residual_demand[u, s], state.residual_capacity[d], _fit(net[u, 0], down), _fit(net[u, 1], up)]
    if not state.is_local(d, u):
        limits += [_fit(net[u, 2], down), _fit(net[u, 3], up)]
    home = sc.home_clusters[d]
    if home >= 0 and home != u:
        limits += [_fit(net[home, 2], up), _fit(net[home, 3], down)]
    if state.cap is not None and sc.is_cloudlet(d):
        limits.append(state.cap - state.cap_count)
    return max(0, int(min(limits)))


def select_service_demand(state):
    """The pending (cluster, service) pair to serve next.

    Pairs are ordered by :func:`service_ranks`, then larger residual
    demand, then lower cluster index.
    """
    assert state.pending, 'No pending demand to select from'
    rank = state.service_rank
    return min(state.pending, key=lambda pair: (rank[pair[1]], -state.residual_demand[pair], pair[0]))


def select_data_center(state, u, s, candidates=None):
    """The data center with the least marginal cost per unit, or None.

    Candidates default to the permitted data centers of ``(u, s)``; only
    those able to take at least one unit count. Ties go to the local
    cloudlet, then lower latency, then lower index.
    """
    if candidates is None:
        candidates = state.permitted[u, s]
    best, best_key = None, None
    for d in candidates:
        if state.residual_capacity[d] <= 0 or state.cap_reached(d):
            continue
        units = calc_lot_size(state, d, u, s)
        if units < 1:
            continue
        key = (state.marginal_cost(d, units), not state.is_local(d, u), state.latency[d, u], d)
        if best_key is None or key < best_key:
            best, best_key = d, key
    return best


def _transfer(state):
    """Carry the previous slot's assignments of the top-ranked services over."""
    sc = state.scenario
    D, U, S, _ = sc.shape
    p = sc.eligibility_matrix()
    for s in np.argsort(state.service_rank)[:TRANSFERRED_SERVICES]:
        for u in range(U):
            for d in range(D):
                previous = int(state.assigned[d, u, s, state.t - 1])
                if previous > 0 and p[d, u, s]:
                    units = min(previous, calc_lot_size(state, d, u, s))
                    if units > 0:
                        state.assign(d, u, s, units)


def solve(scenario, strategy=None):
    """Run the greedy heuristic and return a :class:`HeuristicResult`.

    :param strategy: a :class:`Strategy` or its name; defaults to heu1
    """
    if strategy is None:
        strategy = Heu1Strategy()
    elif isinstance(strategy, str):
        strategy = Strategy.create(strategy)
    sc = scenario
    D, U, S, T = sc.shape
    state = HeuristicState(sc, strategy.cloudlet_cap(sc))
    iterations = 0
    for t in range(T):
        state.start_slot(t)
        if t > 0:
            _transfer(state)
        state.pending = [(u, s) for u in range(U) for s in range(S)
                         if state.residual_demand[u, s] > 0 and state.permitted[u, s]]
        while state.pending:
            iterations += 1
            u, s = select_service_demand(state)
            net = state.residual_network
            lan_lot = min(_fit(net[u, 0], sc.l_down[s]), _fit(net[u, 1], sc.l_up[s]))
            man_lot = min(_fit(net[u, 2], sc.l_down[s]), _fit(net[u, 3], sc.l_up[s]))
            local = sc.local_cloudlet_index(u)
            d = None
            if lan_lot >= 1:
                if man_lot >= 1:
                    d = select_data_center(state, u, s)
                elif local is not None and local in state.permitted[u, s]:
                    d = select_data_center(state, u, s, [local])
            if d is None:
                state.pending.remove((u, s))
                continue
            state.assign(d, u, s, calc_lot_size(state, d, u, s))
            if state.residual_demand[u, s] == 0:
                state.pending.remove((u, s))
            if state.residual_capacity[d] == 0:
                for permitted in state.permitted.values():
                    if d in permitted:
                        permitted.remove(d)
    solution = Solution.from_assignment(sc, state.assigned)
    return HeuristicResult(solution, evaluate_cost(sc, solution), iterations)
