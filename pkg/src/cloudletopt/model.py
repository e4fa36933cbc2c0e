'''
Domain model for cloudlet placement and selection.

A :class:`Scenario` describes one planning problem: candidate data centers
(one optional remote cloud plus cloudlets co-located with user clusters),
the user clusters and their network capacities, the offered services, the
QoS guarantees of every data center towards every cluster, and the demand
per cluster, service and time slot. A :class:`Solution` is a placement
(``x``, ``z``) plus an assignment (``y``) and the demand left unserved
(``y_pen``).

All money values are integers (milli-units), so cost sums are exact.
Tensors follow the declared order of the scenario lists:

* ``demand[u, s, t]``
* ``qos_guarantees[d, u, q]``
* ``penalty_costs[u, s]``
* ``y[d, u, s, t]`` and ``y_pen[u, s, t]``

The functions here make up the shared oracle that every solver is checked
against: eligibility, migration counting, cost evaluation and validation.
'''

import numbers
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class InvalidReferenceError(ValueError):
    """An identifier or tensor shape does not match the scenario."""
    pass


class ScenarioValidationError(ValueError):
    """A scenario violates one of its invariants.

    :param field: dotted path of the offending field, e.g. ``data_centers[2].c_op``
    """

    def __init__(self, field, message):
        super().__init__('{}: {}'.format(field, message))
        self.field = field


class QosDirection(Enum):
    """Which way a QoS attribute improves."""
    higher_is_better = 'higher-is-better'
    lower_is_better = 'lower-is-better'


class DataCenterKind(Enum):
    remote_cloud = 'remote-cloud'
    cloudlet = 'cloudlet'


@dataclass(frozen=True)
class QosAttribute:
    id: str
    direction: QosDirection

    def satisfied(self, guarantee, requirement):
        """Whether a guaranteed value meets a required one (non-strict)."""
        if self.direction is QosDirection.lower_is_better:
            return guarantee <= requirement
        return guarantee >= requirement


@dataclass(frozen=True)
class DataCenter:
    """A candidate data center.

    ``c_fix`` and ``c_hw`` are charged once per planning horizon; ``c_op``
    holds one price per resource unit for each time slot.
    """
    id: str
    kind: DataCenterKind
    k_min: int
    k_max: int
    c_fix: int
    c_hw: int
    c_op: tuple
    home_cluster: str = None

    def __post_init__(self):
        object.__setattr__(self, 'c_op', tuple(self.c_op))

    @property
    def is_cloudlet(self):
        return self.kind is DataCenterKind.cloudlet


@dataclass(frozen=True)
class UserCluster:
    """All users behind one hotspot, with its LAN and MAN capacities in Mbps."""
    id: str
    lan_down: int
    lan_up: int
    man_down: int
    man_up: int
    local_cloudlet: str = None


@dataclass(frozen=True)
class Service:
    """A service class: bandwidth per resource unit, migration cost, QoS needs."""
    id: str
    l_down: int
    l_up: int
    c_mig: int
    qos_req: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'qos_req', dict(self.qos_req))


@dataclass(frozen=True)
class CostBreakdown:
    """The five summands of the objective, plus their total."""
    fixed: int = 0
    operational: int = 0
    penalty: int = 0
    migration: int = 0
    hardware: int = 0

    @property
    def total(self):
        return self.fixed + self.operational + self.penalty + self.migration + self.hardware

    def as_dict(self):
        return {
            'fixed': self.fixed,
            'operational': self.operational,
            'penalty': self.penalty,
            'migration': self.migration,
            'hardware': self.hardware,
            'total': self.total,
        }


@dataclass(frozen=True)
class Violation:
    """One violated constraint instance.

    :param tag: constraint family, e.g. ``capacity-link``
    :param indices: identifiers (and slot index) locating the violation
    :param slack: amount by which the constraint is exceeded (> 0)
    """
    tag: str
    indices: tuple
    slack: float


def _readonly(array, dtype):
    result = np.array(array, dtype=dtype)
    result.setflags(write=False)
    return result


def _check_count(value, field_name):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise ScenarioValidationError(field_name, 'expected an integer, got {!r}'.format(value))
    if value < 0:
        raise ScenarioValidationError(field_name, 'must be non-negative, got {}'.format(value))


def _check_unique(items, field_name):
    seen = set()
    for i, item in enumerate(items):
        if item.id in seen:
            raise ScenarioValidationError('{}[{}].id'.format(field_name, i), 'duplicate id {!r}'.format(item.id))
        seen.add(item.id)


def _integral_tensor(values, shape, field_name):
    try:
        array = np.asarray(values)
    except ValueError as err:
        raise ScenarioValidationError(field_name, str(err))
    if array.shape != shape:
        raise ScenarioValidationError(field_name, 'expected shape {}, got {}'.format(shape, array.shape))
    if array.size and not np.issubdtype(array.dtype, np.integer):
        if not np.issubdtype(array.dtype, np.number) or not np.all(np.mod(array, 1) == 0):
            raise ScenarioValidationError(field_name, 'entries must be integers')
    if array.size and np.any(array < 0):
        raise ScenarioValidationError(field_name, 'entries must be non-negative')
    return _readonly(array, np.int64)


class Scenario(object):
    """An immutable planning problem.

    Construction checks every invariant and raises
    :class:`ScenarioValidationError` naming the first offending field.
    """

    def __init__(self, horizon, qos_attributes, data_centers, user_clusters, services,
                 demand, qos_guarantees, penalty_costs):
        if not isinstance(horizon, numbers.Integral) or isinstance(horizon, bool) or horizon < 1:
            raise ScenarioValidationError('horizon', 'must be an integer >= 1, got {!r}'.format(horizon))
        self.horizon = int(horizon)
        self.qos_attributes = tuple(qos_attributes)
        self.data_centers = tuple(data_centers)
        self.user_clusters = tuple(user_clusters)
        self.services = tuple(services)
        for name in ('qos_attributes', 'data_centers', 'user_clusters', 'services'):
            _check_unique(getattr(self, name), name)
        if not self.data_centers:
            raise ScenarioValidationError('data_centers', 'at least one data center is required')
        self._dc_index = {dc.id: i for i, dc in enumerate(self.data_centers)}
        self._cluster_index = {uc.id: i for i, uc in enumerate(self.user_clusters)}
        self._service_index = {sv.id: i for i, sv in enumerate(self.services)}
        self._attr_index = {qa.id: i for i, qa in enumerate(self.qos_attributes)}
        self._check_data_centers()
        self._check_clusters()
        self._check_services()

        D, U, S, T, Q = self.shape + (len(self.qos_attributes),)
        self.demand = _integral_tensor(demand, (U, S, T), 'demand')
        self.penalty_costs = _integral_tensor(penalty_costs, (U, S), 'penalty_costs')
        try:
            gua = np.asarray(qos_guarantees, dtype=float)
        except (TypeError, ValueError) as err:
            raise ScenarioValidationError('qos_guarantees', str(err))
        if gua.shape != (D, U, Q):
            raise ScenarioValidationError('qos_guarantees', 'expected shape {}, got {}'.format((D, U, Q), gua.shape))
        if not np.all(np.isfinite(gua)):
            raise ScenarioValidationError('qos_guarantees', 'entries must be finite')
        self.qos_guarantees = _readonly(gua, float)

        # Flat arrays used by the evaluators and solvers
        self.k_min = _readonly([dc.k_min for dc in self.data_centers], np.int64)
        self.k_max = _readonly([dc.k_max for dc in self.data_centers], np.int64)
        self.c_fix = _readonly([dc.c_fix for dc in self.data_centers], np.int64)
        self.c_hw = _readonly([dc.c_hw for dc in self.data_centers], np.int64)
        self.c_op = _readonly([list(dc.c_op) for dc in self.data_centers], np.int64).reshape(D, T)
        self.l_down = _readonly([sv.l_down for sv in self.services], np.int64)
        self.l_up = _readonly([sv.l_up for sv in self.services], np.int64)
        self.c_mig = _readonly([sv.c_mig for sv in self.services], np.int64)
        self.bandwidth = _readonly(
            [[uc.lan_down, uc.lan_up, uc.man_down, uc.man_up] for uc in self.user_clusters], np.int64).reshape(U, 4)
        self.local_cloudlets = _readonly(
            [-1 if uc.local_cloudlet is None else self._dc_index[uc.local_cloudlet] for uc in self.user_clusters],
            np.int64)
        self.home_clusters = _readonly(
            [-1 if dc.home_cluster is None else self._cluster_index[dc.home_cluster] for dc in self.data_centers],
            np.int64)
        self._eligibility = _readonly(self._compute_eligibility(), bool)

    def _check_data_centers(self):
        for i, dc in enumerate(self.data_centers):
            prefix = 'data_centers[{}]'.format(i)
            if not isinstance(dc.kind, DataCenterKind):
                raise ScenarioValidationError(prefix + '.kind', 'unknown kind {!r}'.format(dc.kind))
            for name in ('k_min', 'k_max', 'c_fix', 'c_hw'):
                _check_count(getattr(dc, name), '{}.{}'.format(prefix, name))
            if dc.k_max < dc.k_min:
                raise ScenarioValidationError(prefix + '.k_max', 'must be >= k_min ({} < {})'.format(dc.k_max, dc.k_min))
            if len(dc.c_op) != self.horizon:
                raise ScenarioValidationError(
                    prefix + '.c_op', 'length {} does not match horizon {}'.format(len(dc.c_op), self.horizon))
            for t, price in enumerate(dc.c_op):
                _check_count(price, '{}.c_op[{}]'.format(prefix, t))
            if dc.is_cloudlet:
                if dc.k_max < 1:
                    raise ScenarioValidationError(prefix + '.k_max', 'a cloudlet needs k_max >= 1')
                if dc.home_cluster is not None and dc.home_cluster not in self._cluster_index:
                    raise ScenarioValidationError(
                        prefix + '.home_cluster', 'unknown user cluster {!r}'.format(dc.home_cluster))
            else:
                if dc.k_min != 0:
                    raise ScenarioValidationError(prefix + '.k_min', 'the remote cloud must have k_min = 0')
                if dc.home_cluster is not None:
                    raise ScenarioValidationError(prefix + '.home_cluster', 'the remote cloud has no home cluster')

    def _check_clusters(self):
        for i, uc in enumerate(self.user_clusters):
            prefix = 'user_clusters[{}]'.format(i)
            for name in ('lan_down', 'lan_up', 'man_down', 'man_up'):
                _check_count(getattr(uc, name), '{}.{}'.format(prefix, name))
            if uc.local_cloudlet is None:
                continue
            d = self._dc_index.get(uc.local_cloudlet)
            if d is None:
                raise ScenarioValidationError(
                    prefix + '.local_cloudlet', 'unknown data center {!r}'.format(uc.local_cloudlet))
            dc = self.data_centers[d]
            if not dc.is_cloudlet or dc.home_cluster != uc.id:
                raise ScenarioValidationError(
                    prefix + '.local_cloudlet', '{!r} is not a cloudlet homed at {!r}'.format(dc.id, uc.id))
        for i, dc in enumerate(self.data_centers):
            if dc.home_cluster is None:
                continue
            uc = self.user_clusters[self._cluster_index[dc.home_cluster]]
            if uc.local_cloudlet != dc.id:
                raise ScenarioValidationError(
                    'data_centers[{}].home_cluster'.format(i),
                    'cluster {!r} does not list {!r} as its local cloudlet'.format(uc.id, dc.id))

    def _check_services(self):
        for i, sv in enumerate(self.services):
            prefix = 'services[{}]'.format(i)
            for name in ('l_down', 'l_up', 'c_mig'):
                _check_count(getattr(sv, name), '{}.{}'.format(prefix, name))
            for attr in sv.qos_req:
                if attr not in self._attr_index:
                    raise ScenarioValidationError(prefix + '.qos_req', 'unknown QoS attribute {!r}'.format(attr))

    def _compute_eligibility(self):
        D, U, S, _ = self.shape
        p = np.ones((D, U, S), dtype=bool)
        for s, service in enumerate(self.services):
            for attr_id, required in service.qos_req.items():
                q = self._attr_index[attr_id]
                p[:, :, s] &= self.qos_attributes[q].satisfied(self.qos_guarantees[:, :, q], required)
        return p

    @property
    def shape(self):
        """``(|D|, |U|, |S|, |T|)``"""
        return len(self.data_centers), len(self.user_clusters), len(self.services), self.horizon

    def dc_index(self, dc_id):
        try:
            return self._dc_index[dc_id]
        except KeyError:
            raise InvalidReferenceError('Unknown data center {!r}'.format(dc_id))

    def cluster_index(self, cluster_id):
        try:
            return self._cluster_index[cluster_id]
        except KeyError:
            raise InvalidReferenceError('Unknown user cluster {!r}'.format(cluster_id))

    def service_index(self, service_id):
        try:
            return self._service_index[service_id]
        except KeyError:
            raise InvalidReferenceError('Unknown service {!r}'.format(service_id))

    def local_cloudlet_index(self, u):
        """Index of cluster ``u``'s local cloudlet, or None."""
        d = self.local_cloudlets[u]
        return None if d < 0 else int(d)

    def is_cloudlet(self, d):
        return self.data_centers[d].is_cloudlet

    def eligibility_matrix(self):
        """Boolean tensor ``p[d, u, s]`` (read-only)."""
        return self._eligibility

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.horizon == other.horizon
                and self.qos_attributes == other.qos_attributes
                and self.data_centers == other.data_centers
                and self.user_clusters == other.user_clusters
                and self.services == other.services
                and np.array_equal(self.demand, other.demand)
                and np.array_equal(self.qos_guarantees, other.qos_guarantees)
                and np.array_equal(self.penalty_costs, other.penalty_costs))

    __hash__ = None

    def __repr__(self):
        return 'Scenario(|D|={}, |U|={}, |S|={}, |T|={})'.format(*self.shape)

    def with_demand(self, demand):
        """A copy of this scenario with a different demand tensor."""
        return Scenario(self.horizon, self.qos_attributes, self.data_centers, self.user_clusters,
                        self.services, demand, self.qos_guarantees, self.penalty_costs)


class Solution(object):
    """Placement and assignment decisions for a scenario.

    Arrays are stored read-only as given, so a validator can still report
    integrality problems in hand-made solutions.
    """

    def __init__(self, x, z, y, y_pen):
        x = np.asarray(x)
        self.x = _readonly(x, np.int64 if x.dtype == bool else x.dtype)
        self.z = _readonly(z, np.asarray(z).dtype)
        self.y = _readonly(y, np.asarray(y).dtype)
        self.y_pen = _readonly(y_pen, np.asarray(y_pen).dtype)

    @classmethod
    def empty(cls, scenario):
        """The all-penalty solution: nothing placed, all demand unserved."""
        D, U, S, T = scenario.shape
        return cls(np.zeros(D, dtype=np.int64), np.zeros(D, dtype=np.int64),
                   np.zeros((D, U, S, T), dtype=np.int64), scenario.demand)

    @classmethod
    def from_assignment(cls, scenario, y):
        """Complete an assignment tensor into a solution.

        ``z`` is the peak per-DC load over all slots, lifted to ``k_min`` for
        used data centers, ``x`` marks the used ones, and ``y_pen`` covers
        whatever demand the assignment leaves open.
        """
        y = np.asarray(y, dtype=np.int64)
        check_shape(scenario, y=y)
        peak = y.sum(axis=(1, 2)).max(axis=1) if y.size else np.zeros(len(scenario.data_centers), dtype=np.int64)
        used = peak > 0
        z = np.where(used, np.maximum(peak, scenario.k_min), 0)
        y_pen = np.maximum(scenario.demand - y.sum(axis=0), 0)
        return cls(used.astype(np.int64), z, y, y_pen)

    def __eq__(self, other):
        if not isinstance(other, Solution):
            return NotImplemented
        return all(np.array_equal(getattr(self, name), getattr(other, name)) for name in ('x', 'z', 'y', 'y_pen'))

    __hash__ = None

    def __repr__(self):
        return 'Solution(open={}, servers={}, served={}, unserved={})'.format(
            int(np.sum(self.x)), int(np.sum(self.z)), int(np.sum(self.y)), int(np.sum(self.y_pen)))


def check_shape(scenario, **arrays):
    """Raise :class:`InvalidReferenceError` unless the arrays fit the scenario."""
    D, U, S, T = scenario.shape
    expected = {'x': (D,), 'z': (D,), 'y': (D, U, S, T), 'y_pen': (U, S, T)}
    for name, array in arrays.items():
        if np.shape(array) != expected[name]:
            raise InvalidReferenceError('{} has shape {}, expected {} for {!r}'.format(
                name, np.shape(array), expected[name], scenario))


def eligibility(scenario, d, u, s):
    """Whether data center ``d`` may serve service ``s`` for cluster ``u``.

    True iff every QoS requirement of the service is met by the guarantee of
    the data center towards the cluster, under the attribute's direction.
    All three arguments are identifiers.
    """
    return bool(scenario.eligibility_matrix()[scenario.dc_index(d), scenario.cluster_index(u),
                                              scenario.service_index(s)])


def _migrations(prev, curr):
    """Migrated units along axis 0 (data centers), broadcasting over the rest.

    A non-decreasing aggregate counts per-DC decreases, a strictly
    decreasing one counts per-DC increases.
    """
    prev = np.asarray(prev, dtype=np.int64)
    curr = np.asarray(curr, dtype=np.int64)
    non_decreasing = curr.sum(axis=0) >= prev.sum(axis=0)
    decreases = np.maximum(prev - curr, 0)
    increases = np.maximum(curr - prev, 0)
    return np.where(non_decreasing, decreases, increases)


def compute_migrations(y_prev, y_curr):
    """Units migrated between two consecutive slots for one (cluster, service).

    >>> compute_migrations({'A': 5, 'B': 0}, {'A': 3, 'B': 2})
    {'A': 2, 'B': 0}
    >>> compute_migrations({'A': 4, 'B': 0}, {'A': 1, 'B': 1})
    {'A': 0, 'B': 1}
    >>> compute_migrations(None, {'A': 3})
    {'A': 0}

    :param y_prev: mapping data-center id -> units at the previous slot, or None for the first slot
    :param y_curr: mapping data-center id -> units at the current slot
    """
    if y_prev is None:
        return {d: 0 for d in y_curr}
    if set(y_prev) != set(y_curr):
        raise InvalidReferenceError('Migration slices cover different data centers: {} vs {}'.format(
            sorted(y_prev), sorted(y_curr)))
    keys = list(y_curr)
    moved = _migrations([y_prev[k] for k in keys], [y_curr[k] for k in keys])
    return {k: int(v) for k, v in zip(keys, moved)}


def migration_tensor(scenario, y):
    """Migrated units ``[d, u, s, t]``; slot 0 is always zero."""
    y = np.asarray(y, dtype=np.int64)
    check_shape(scenario, y=y)
    result = np.zeros_like(y)
    if scenario.horizon > 1:
        result[..., 1:] = _migrations(y[..., :-1], y[..., 1:])
    return result


def evaluate_cost(scenario, solution):
    """The objective of a solution, split by cost kind. Feasibility is not checked."""
    check_shape(scenario, x=solution.x, z=solution.z, y=solution.y, y_pen=solution.y_pen)
    y = solution.y.astype(np.int64)
    moved = migration_tensor(scenario, y)
    return CostBreakdown(
        fixed=int(np.dot(solution.x.astype(np.int64), scenario.c_fix)),
        operational=int(np.einsum('dust,dt->', y, scenario.c_op)),
        penalty=int(np.einsum('ust,us->', solution.y_pen.astype(np.int64), scenario.penalty_costs)),
        migration=int(np.einsum('dust,s->', moved, scenario.c_mig)),
        hardware=int(np.dot(solution.z.astype(np.int64), scenario.c_hw)),
    )


def network_load(scenario, y, t=None):
    """Per-cluster bandwidth use in Mbps.

    Returns a dict with keys ``lan-down``, ``lan-up``, ``man-down`` and
    ``man-up``, each an array ``[u, t]`` (or ``[u]`` if ``t`` is given).
    Every flow into a cluster crosses its LAN. Flows from anywhere except the
    cluster's own cloudlet cross its MAN, and so do flows that its cloudlet
    sends to other clusters (in the opposite direction).
    """
    y = np.asarray(y)
    if t is not None:
        y = y[..., t:t + 1]
    D, U = y.shape[:2]
    flow_down = np.einsum('dust,s->dut', y, scenario.l_down)
    flow_up = np.einsum('dust,s->dut', y, scenario.l_up)
    local = np.zeros((D, U), dtype=bool)
    has_local = scenario.local_cloudlets >= 0
    local[scenario.local_cloudlets[has_local], np.flatnonzero(has_local)] = True
    remote = (~local).astype(flow_down.dtype)
    inbound_down = np.einsum('dut,du->ut', flow_down, remote)
    inbound_up = np.einsum('dut,du->ut', flow_up, remote)
    # Traffic a cloudlet exchanges with foreign clusters leaves through its home cluster's MAN
    outbound_down = np.zeros_like(inbound_down)
    outbound_up = np.zeros_like(inbound_up)
    for alpha in np.flatnonzero(has_local):
        d = scenario.local_cloudlets[alpha]
        foreign = np.arange(U) != alpha
        outbound_down[alpha] = flow_down[d, foreign].sum(axis=0)
        outbound_up[alpha] = flow_up[d, foreign].sum(axis=0)
    loads = {
        'lan-down': flow_down.sum(axis=0),
        'lan-up': flow_up.sum(axis=0),
        'man-down': inbound_down + outbound_up,
        'man-up': inbound_up + outbound_down,
    }
    if t is not None:
        loads = {k: v[:, 0] for k, v in loads.items()}
    return loads


def _report(violations, tag, excess, labeller):
    for index in zip(*np.nonzero(excess > 0)):
        violations.append(Violation(tag, labeller(*index), excess[index].item()))


def validate(scenario, solution):
    """Check every constraint of the model against a solution.

    Returns a list of :class:`Violation` records, empty iff the solution is
    feasible. Only a shape mismatch raises.
    """
    check_shape(scenario, x=solution.x, z=solution.z, y=solution.y, y_pen=solution.y_pen)
    dcs = [dc.id for dc in scenario.data_centers]
    ucs = [uc.id for uc in scenario.user_clusters]
    svs = [sv.id for sv in scenario.services]
    violations = []

    for name in ('x', 'z', 'y', 'y_pen'):
        values = np.asarray(getattr(solution, name), dtype=float)
        _report(violations, 'integrality', np.abs(values - np.round(values)),
                lambda *i, n=name: (n,) + tuple(int(j) for j in i))
        _report(violations, 'non-negativity', -values, lambda *i, n=name: (n,) + tuple(int(j) for j in i))
    x = np.asarray(solution.x, dtype=float)
    _report(violations, 'integrality', np.where(x > 1, x - 1, 0), lambda d: ('x', int(d)))

    x = np.clip(x, 0, 1)
    z = np.asarray(solution.z, dtype=float)
    y = np.asarray(solution.y, dtype=float)
    y_pen = np.asarray(solution.y_pen, dtype=float)

    _report(violations, 'demand-coverage', scenario.demand - y_pen - y.sum(axis=0),
            lambda u, s, t: (ucs[u], svs[s], int(t)))
    _report(violations, 'capacity-link', y.sum(axis=(1, 2)) - z[:, None],
            lambda d, t: (dcs[d], int(t)))
    _report(violations, 'capacity-max', z - x * scenario.k_max, lambda d: (dcs[d],))
    _report(violations, 'capacity-min', x * scenario.k_min - z, lambda d: (dcs[d],))
    ineligible = ~scenario.eligibility_matrix()
    _report(violations, 'qos-eligibility', np.where(ineligible[..., None], y, 0),
            lambda d, u, s, t: (dcs[d], ucs[u], svs[s], int(t)))

    loads = network_load(scenario, y)
    for column, tag in enumerate(('lan-down', 'lan-up', 'man-down', 'man-up')):
        _report(violations, tag, loads[tag] - scenario.bandwidth[:, column, None],
                lambda u, t: (ucs[u], int(t)))
    return violations
