'''
Seeded scenario generation and the scenario / solution file formats.

Generated instances model a metropolitan area: every location is a user
cluster around a Wi-Fi hotspot that may host a cloudlet, and an optional
remote cloud serves everyone at higher latency and operating price.

Files are JSON documents (UTF-8) with a ``format_version`` field. All counts
and money values are integers; tensors are nested lists in declared order.
See ``docs/scenario_format.rst`` for the full schema.
'''

import json
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import config
from .model import (DataCenter, DataCenterKind, QosAttribute, QosDirection, Scenario, ScenarioValidationError,
                    Service, Solution, UserCluster)

FORMAT_VERSION = 1

# Money is given in whole units by the generator knobs and stored in milli-units
MILLI = 1000

# Service classes: bandwidth per unit (Mbps), latency requirement (ms),
# and multipliers applied to the base migration and penalty costs.
SERVICE_CLASSES = (
    {'l_down': 40, 'l_up': 10, 'latency': 50.0, 'migration': 1.0, 'penalty': 1.2},
    {'l_down': 40, 'l_up': 10, 'latency': 100.0, 'migration': 0.75, 'penalty': 1.0},
    {'l_down': 20, 'l_up': 20, 'latency': 250.0, 'migration': 0.5, 'penalty': 1.0},
)


class InvalidParamsError(ValueError):
    """Generator parameters out of range."""
    pass


class ScenarioParseError(ValueError):
    """A document that is not a readable scenario or solution file.

    :param line: 1-based line of the problem
    :param column: 1-based column of the problem
    """

    def __init__(self, message, line=1, column=1):
        super().__init__('{} (line {}, column {})'.format(message, line, column))
        self.line = line
        self.column = column


@dataclass(frozen=True)
class GeneratorParams:
    """Knobs for :func:`generate`. Defaults mirror the packaged configuration."""
    n_locations: int = 20
    include_remote_cloud: bool = True
    remote_replaces_cloudlet: bool = False
    n_services: int = 3
    horizon: int = 5
    qos_attr_count: int = 1
    seed: int = 0
    k_max_range: tuple = (1, 20)
    routers_range: tuple = (2, 6)
    router_rate: int = 500
    man_rate: int = 1000
    hardware_cost: float = 100
    fixed_cost_share: float = 0.5
    operating_cost_share: float = 0.5
    operating_cost_jitter: float = 0.2
    remote_operating_factor: float = 2.0
    penalty_factor: float = 3.0
    migration_share: float = 0.5
    demand_headroom: int = 5
    demand_amplitude: float = 0.5
    demand_noise: float = 1.0
    latency_local: float = 10
    latency_metro: float = 60
    latency_remote: float = 150

    @classmethod
    def from_settings(cls, settings=None, **overrides):
        """Build parameters from the ``generator`` configuration section.

        :param settings: a settings dictionary; defaults to the user configuration
        :param overrides: individual parameters taking precedence over the settings
        """
        if settings is None:
            settings = config.read_user_config().get('generator', {})
        known = {f.name for f in fields(cls)}
        values = dict(settings)
        values.update(overrides)
        unknown = set(values) - known
        if unknown:
            raise InvalidParamsError('Unknown generator parameters: {}'.format(', '.join(sorted(unknown))))
        for name in ('k_max_range', 'routers_range'):
            if name in values:
                values[name] = tuple(values[name])
        return cls(**values)

    def replace(self, **changes):
        values = asdict(self)
        values.update(changes)
        return type(self)(**values)

    def check(self):
        """Raise :class:`InvalidParamsError` if any parameter is out of range."""
        for name in ('n_locations', 'n_services', 'horizon', 'qos_attr_count'):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise InvalidParamsError('{} must be an integer >= 1, got {!r}'.format(name, value))
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise InvalidParamsError('seed must be a 64-bit unsigned integer, got {!r}'.format(self.seed))
        for name, lowest in (('k_max_range', 1), ('routers_range', 0)):
            lo, hi = getattr(self, name)
            if not lowest <= lo <= hi:
                raise InvalidParamsError('{} must satisfy {} <= low <= high, got {!r}'.format(
                    name, lowest, getattr(self, name)))
        if self.remote_replaces_cloudlet and not self.include_remote_cloud:
            raise InvalidParamsError('remote_replaces_cloudlet requires include_remote_cloud')
        for name in ('router_rate', 'man_rate', 'hardware_cost', 'fixed_cost_share', 'operating_cost_share',
                     'remote_operating_factor', 'penalty_factor', 'migration_share', 'demand_headroom',
                     'demand_amplitude', 'demand_noise', 'latency_local', 'latency_metro', 'latency_remote'):
            if getattr(self, name) < 0:
                raise InvalidParamsError('{} must be non-negative, got {!r}'.format(name, getattr(self, name)))
        if not 0 <= self.operating_cost_jitter < 1:
            raise InvalidParamsError('operating_cost_jitter must lie in [0, 1), got {!r}'.format(
                self.operating_cost_jitter))


def demand_profile(base, t, horizon, amplitude=0.0, phase=0.0, noise=0.0):
    """Demand at slot ``t`` for a sinusoidal profile around ``base``.

    The amplitude, phase and noise are drawn by :func:`generate` from the
    seeded generator; this function only evaluates the profile. Works
    elementwise on arrays. Zero base demand stays zero.

    >>> [demand_profile(10, t, 4, amplitude=0.5) for t in range(4)]
    [10, 15, 10, 5]
    >>> demand_profile(0, 1, 4, amplitude=0.5, noise=2.0)
    0
    """
    value = np.asarray(base) * (1 + np.asarray(amplitude) * np.sin(2 * np.pi * np.asarray(t) / horizon + phase))
    value = np.floor(value + noise + 0.5)
    result = np.where(np.asarray(base) > 0, np.maximum(value, 0), 0).astype(np.int64)
    return int(result) if result.ndim == 0 else result


def _money(units):
    return int(round(units * MILLI))


def generate(params):
    """Generate a scenario from parameters; equal parameters give equal scenarios."""
    params.check()
    rng = np.random.default_rng(params.seed)
    n = params.n_locations
    T = params.horizon
    replace = params.include_remote_cloud and params.remote_replaces_cloudlet
    hosts = list(range(1, n)) if replace else list(range(n))
    n_cloudlets = len(hosts)

    k_max = rng.integers(params.k_max_range[0], params.k_max_range[1] + 1, size=n_cloudlets)
    routers = rng.integers(params.routers_range[0], params.routers_range[1] + 1, size=n)
    jitter = rng.uniform(-params.operating_cost_jitter, params.operating_cost_jitter, size=(n_cloudlets, T))

    classes = [SERVICE_CLASSES[s % len(SERVICE_CLASSES)] for s in range(params.n_services)]
    local_capacity = np.full(n, int(round(k_max.mean())) if n_cloudlets else params.k_max_range[1])
    local_capacity[hosts] = k_max
    base = rng.integers(0, local_capacity[:, None] + params.demand_headroom + 1, size=(n, params.n_services))
    amplitude = rng.uniform(0, params.demand_amplitude, size=base.shape)
    phase = rng.uniform(0, 2 * np.pi, size=base.shape)
    noise = rng.normal(0, params.demand_noise, size=base.shape + (T,)) if params.demand_noise > 0 \
        else np.zeros(base.shape + (T,))
    slots = np.arange(T)
    demand = demand_profile(base[..., None], slots, T, amplitude[..., None], phase[..., None], noise)
    margins = rng.uniform(0, 50, size=(n_cloudlets + int(params.include_remote_cloud), n,
                                       params.qos_attr_count - 1))

    clusters = ['u-{:02d}'.format(u) for u in range(n)]
    hardware = _money(params.hardware_cost)
    nominal_op = params.operating_cost_share * params.hardware_cost / T
    cloudlets = []
    for i, u in enumerate(hosts):
        cloudlets.append(DataCenter(
            id='cl-{:02d}'.format(u), kind=DataCenterKind.cloudlet, k_min=0, k_max=int(k_max[i]),
            c_fix=_money(params.fixed_cost_share * params.hardware_cost * k_max[i]), c_hw=hardware,
            c_op=tuple(_money(nominal_op * (1 + j)) for j in jitter[i]), home_cluster=clusters[u]))
    data_centers = []
    if params.include_remote_cloud:
        mean_op = np.mean([dc.c_op for dc in cloudlets]) if cloudlets else _money(nominal_op)
        remote_op = int(round(params.remote_operating_factor * mean_op))
        peak = int(demand.sum(axis=(0, 1)).max())
        data_centers.append(DataCenter(
            id='remote', kind=DataCenterKind.remote_cloud, k_min=0, k_max=max(peak, 1),
            c_fix=0, c_hw=0, c_op=(remote_op,) * T))
    data_centers.extend(cloudlets)
    home = {dc.home_cluster: dc.id for dc in cloudlets}
    user_clusters = [
        UserCluster(id=c, lan_down=int(routers[u] * params.router_rate), lan_up=int(routers[u] * params.router_rate),
                    man_down=int(params.man_rate), man_up=int(params.man_rate), local_cloudlet=home.get(c))
        for u, c in enumerate(clusters)]

    attributes = [QosAttribute('latency', QosDirection.lower_is_better)]
    attributes += [QosAttribute('throughput-{}'.format(k), QosDirection.higher_is_better)
                   for k in range(1, params.qos_attr_count)]
    services = []
    for s, cls in enumerate(classes):
        qos_req = {'latency': float(cls['latency'])}
        qos_req.update({a.id: float(cls['l_down']) for a in attributes[1:]})
        services.append(Service(
            id='svc-{}'.format(s + 1), l_down=cls['l_down'], l_up=cls['l_up'],
            c_mig=_money(params.migration_share * params.hardware_cost * cls['migration']), qos_req=qos_req))

    guarantees = np.empty((len(data_centers), n, len(attributes)))
    for d, dc in enumerate(data_centers):
        if not dc.is_cloudlet:
            guarantees[d, :, 0] = params.latency_remote
        else:
            guarantees[d, :, 0] = params.latency_metro
            guarantees[d, clusters.index(dc.home_cluster), 0] = params.latency_local
    # Synthetic throughput attributes never exclude anyone
    top_rate = max(cls['l_down'] for cls in classes)
    guarantees[:, :, 1:] = np.round(top_rate + margins, 3)

    marginal = max(max(dc.c_op) + dc.c_hw + dc.c_fix / dc.k_max for dc in data_centers)
    penalty_base = params.penalty_factor * marginal
    penalties = np.array([[int(round(penalty_base * cls['penalty'])) for cls in classes]] * n, dtype=np.int64)

    return Scenario(T, attributes, data_centers, user_clusters, services, demand, guarantees, penalties)


def generate_tiny(seed, max_dcs=3, max_clusters=3, max_services=2, max_horizon=2, max_k=3, max_demand=4):
    """A small random scenario for exhaustive cross-checks.

    Unlike :func:`generate` the costs, bandwidths and latencies are drawn
    freely, so eligibility and binding constraints vary from seed to seed.
    """
    rng = np.random.default_rng(seed)
    D = int(rng.integers(1, max_dcs + 1))
    U = int(rng.integers(1, max_clusters + 1))
    S = int(rng.integers(1, max_services + 1))
    T = int(rng.integers(1, max_horizon + 1))
    with_remote = bool(rng.random() < 0.5)
    with_throughput = bool(rng.random() < 0.3)

    clusters = ['u{}'.format(u) for u in range(U)]
    data_centers, homes = [], {}
    for d in range(D):
        k_max = int(rng.integers(1, max_k + 1))
        c_op = tuple(int(c) for c in rng.integers(0, 11, size=T))
        if d == 0 and with_remote:
            data_centers.append(DataCenter('d0', DataCenterKind.remote_cloud, 0, k_max, 0, 0, c_op))
            continue
        slot = d - int(with_remote)
        home = clusters[slot] if slot < U and rng.random() < 0.8 else None
        dc_id = 'd{}'.format(d)
        if home is not None:
            homes[home] = dc_id
        data_centers.append(DataCenter(
            dc_id, DataCenterKind.cloudlet, int(rng.integers(0, min(1, k_max) + 1)), k_max,
            int(rng.integers(0, 21)), int(rng.integers(0, 11)), c_op, home))
    user_clusters = [UserCluster(c, *(int(b) for b in rng.integers(0, 13, size=4)), local_cloudlet=homes.get(c))
                     for c in clusters]

    attributes = [QosAttribute('latency', QosDirection.lower_is_better)]
    if with_throughput:
        attributes.append(QosAttribute('throughput', QosDirection.higher_is_better))
    services = []
    for s in range(S):
        qos_req = {'latency': float(rng.integers(20, 101))}
        if with_throughput:
            qos_req['throughput'] = float(rng.integers(0, 11))
        services.append(Service('s{}'.format(s), int(rng.integers(0, 4)), int(rng.integers(0, 4)),
                                int(rng.integers(0, 11)), qos_req))
    guarantees = np.empty((D, U, len(attributes)))
    guarantees[:, :, 0] = rng.integers(10, 101, size=(D, U))
    if with_throughput:
        guarantees[:, :, 1] = rng.integers(0, 11, size=(D, U))
    demand = rng.integers(0, max_demand + 1, size=(U, S, T))
    penalties = rng.integers(0, 31, size=(U, S))
    return Scenario(T, attributes, data_centers, user_clusters, services, demand, guarantees, penalties)


def _dump(document):
    return (json.dumps(document, indent=1, ensure_ascii=False) + '\n').encode('utf-8')


def _load(data):
    """Parse JSON bytes or text, raising :class:`ScenarioParseError` on malformed input."""
    if isinstance(data, bytes):
        try:
            data = data.decode('utf-8')
        except UnicodeDecodeError as err:
            raise ScenarioParseError('Document is not valid UTF-8', 1, err.start + 1)
    try:
        document = json.loads(data)
    except json.JSONDecodeError as err:
        raise ScenarioParseError(err.msg, err.lineno, err.colno)
    if not isinstance(document, dict):
        raise ScenarioParseError('Expected a JSON object at the top level')
    version = document.get('format_version')
    if version != FORMAT_VERSION:
        raise ScenarioParseError('Unsupported format_version {!r}'.format(version))
    return document


def write_scenario(scenario):
    """Serialize a scenario to UTF-8 JSON bytes."""
    document = {
        'format_version': FORMAT_VERSION,
        'horizon': scenario.horizon,
        'qos_attributes': [{'id': qa.id, 'direction': qa.direction.value} for qa in scenario.qos_attributes],
        'data_centers': [{
            'id': dc.id,
            'kind': dc.kind.value,
            'k_min': int(dc.k_min),
            'k_max': int(dc.k_max),
            'c_fix': int(dc.c_fix),
            'c_hw': int(dc.c_hw),
            'c_op': [int(c) for c in dc.c_op],
            'home_cluster': dc.home_cluster,
        } for dc in scenario.data_centers],
        'user_clusters': [{
            'id': uc.id,
            'lan_down': int(uc.lan_down),
            'lan_up': int(uc.lan_up),
            'man_down': int(uc.man_down),
            'man_up': int(uc.man_up),
            'local_cloudlet': uc.local_cloudlet,
        } for uc in scenario.user_clusters],
        'services': [{
            'id': sv.id,
            'l_down': int(sv.l_down),
            'l_up': int(sv.l_up),
            'c_mig': int(sv.c_mig),
            'qos_req': {k: float(v) for k, v in sv.qos_req.items()},
        } for sv in scenario.services],
        'demand': scenario.demand.tolist(),
        'qos_guarantees': scenario.qos_guarantees.tolist(),
        'penalty_costs': scenario.penalty_costs.tolist(),
    }
    return _dump(document)


_SCENARIO_KEYS = ('format_version', 'horizon', 'qos_attributes', 'data_centers', 'user_clusters', 'services',
                  'demand', 'qos_guarantees', 'penalty_costs')


def _get(mapping, key, path):
    if not isinstance(mapping, dict):
        raise ScenarioValidationError(path, 'expected an object')
    try:
        return mapping[key]
    except KeyError:
        raise ScenarioValidationError('{}.{}'.format(path, key) if path else key, 'missing field')


def _records(document, key):
    items = _get(document, key, '')
    if not isinstance(items, list):
        raise ScenarioValidationError(key, 'expected a list')
    return [('{}[{}]'.format(key, i), item) for i, item in enumerate(items)]


def _enum(enum_class, value, path):
    try:
        return enum_class(value)
    except ValueError:
        raise ScenarioValidationError(path, 'unknown value {!r}'.format(value))


def read_scenario(data):
    """Parse scenario bytes (or text) written by :func:`write_scenario`.

    Malformed JSON raises :class:`ScenarioParseError` with the line and
    column; well-formed documents that break a scenario invariant raise
    :class:`ScenarioValidationError` naming the field.
    """
    document = _load(data)
    unknown = sorted(set(document) - set(_SCENARIO_KEYS))
    if unknown:
        warnings.warn('Ignoring unknown scenario fields: {}'.format(', '.join(unknown)))
    attributes = [QosAttribute(_get(item, 'id', path), _enum(QosDirection, _get(item, 'direction', path),
                                                            path + '.direction'))
                  for path, item in _records(document, 'qos_attributes')]
    data_centers = []
    for path, item in _records(document, 'data_centers'):
        c_op = _get(item, 'c_op', path)
        if not isinstance(c_op, list):
            raise ScenarioValidationError(path + '.c_op', 'expected a list')
        data_centers.append(DataCenter(
            id=_get(item, 'id', path), kind=_enum(DataCenterKind, _get(item, 'kind', path), path + '.kind'),
            k_min=_get(item, 'k_min', path), k_max=_get(item, 'k_max', path), c_fix=_get(item, 'c_fix', path),
            c_hw=_get(item, 'c_hw', path), c_op=tuple(c_op), home_cluster=item.get('home_cluster')))
    user_clusters = [UserCluster(
        id=_get(item, 'id', path), lan_down=_get(item, 'lan_down', path), lan_up=_get(item, 'lan_up', path),
        man_down=_get(item, 'man_down', path), man_up=_get(item, 'man_up', path),
        local_cloudlet=item.get('local_cloudlet')) for path, item in _records(document, 'user_clusters')]
    services = []
    for path, item in _records(document, 'services'):
        qos_req = _get(item, 'qos_req', path)
        if not isinstance(qos_req, dict):
            raise ScenarioValidationError(path + '.qos_req', 'expected an object')
        services.append(Service(
            id=_get(item, 'id', path), l_down=_get(item, 'l_down', path), l_up=_get(item, 'l_up', path),
            c_mig=_get(item, 'c_mig', path), qos_req={k: float(v) for k, v in qos_req.items()}))
    return Scenario(_get(document, 'horizon', ''), attributes, data_centers, user_clusters, services,
                    _get(document, 'demand', ''), _get(document, 'qos_guarantees', ''),
                    _get(document, 'penalty_costs', ''))


def write_solution(solution):
    """Serialize a solution to UTF-8 JSON bytes."""
    def plain(array):
        array = np.asarray(array)
        return array.astype(np.int64).tolist() if np.all(np.mod(array, 1) == 0) else array.tolist()

    return _dump({
        'format_version': FORMAT_VERSION,
        'x': plain(solution.x),
        'z': plain(solution.z),
        'y': plain(solution.y),
        'y_pen': plain(solution.y_pen),
    })


def read_solution(data):
    """Parse solution bytes (or text) written by :func:`write_solution`."""
    document = _load(data)
    arrays = []
    for key in ('x', 'z', 'y', 'y_pen'):
        try:
            arrays.append(np.asarray(_get(document, key, '')))
        except ValueError as err:
            raise ScenarioValidationError(key, str(err))
        if not np.issubdtype(arrays[-1].dtype, np.number):
            raise ScenarioValidationError(key, 'entries must be numbers')
    return Solution(*arrays)

