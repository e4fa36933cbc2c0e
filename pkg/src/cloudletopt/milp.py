'''
The linearized mixed-integer program of a scenario, and its MPS export.

Variable families (all integral):

========  ===============  ==================================================
family    shape            meaning
========  ===============  ==================================================
x         [d]              data center opened (binary)
z         [d]              servers installed
y         [d, u, s, t]     units of service s served to cluster u from d
y_pen     [u, s, t]        units left unserved
y_mig     [d, u, s, t-1]   units migrated into slot t (t >= 1)
delta     [u, s, t-1]      1 unless the aggregate strictly decreases into t
========  ===============  ==================================================

Eligibility enters as constants: ineligible pairs get zero upper bounds on
``y`` and ``y_mig``, rows fixing ``y`` to zero, and no migration rows.
'''

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse

from .model import Solution, check_shape, migration_tensor


class VarKind(Enum):
    binary = 'binary'
    integer = 'integer'
    continuous = 'continuous'


class Relation(Enum):
    le = '<='
    ge = '>='
    eq = '='


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lower: float
    upper: float


@dataclass(frozen=True)
class Constraint:
    """A linear row ``sum(coef * var) <relation> rhs``.

    :param coefficients: tuple of ``(variable index, coefficient)`` pairs
    :param tag: the constraint family this row belongs to
    """
    coefficients: tuple
    relation: Relation
    rhs: float
    tag: str


# Order in which branch-and-bound picks variable families
BRANCH_ORDER = ('x', 'delta', 'z', 'y', 'y_pen', 'y_mig')


class MilpModel(object):
    """Variables, rows and objective of a minimization problem.

    ``index[family]`` maps each variable family onto an integer array of
    column indices with the family's natural shape.
    """

    def __init__(self, scenario):
        self.scenario = scenario
        self.variables = []
        self.constraints = []
        self.objective = []
        self.index = {}
        self._matrices = None

    def add_family(self, family, shape, kind, lower, upper, cost, labels):
        """Append one variable per cell of ``shape``.

        ``lower``, ``upper`` and ``cost`` broadcast against ``shape``;
        ``labels(*cell)`` returns the name suffix for a cell.
        """
        start = len(self.variables)
        lower = np.broadcast_to(lower, shape)
        upper = np.broadcast_to(upper, shape)
        cost = np.broadcast_to(cost, shape)
        for cell in np.ndindex(*shape):
            self.variables.append(Variable('{}[{}]'.format(family, labels(*cell)), kind,
                                           float(lower[cell]), float(upper[cell])))
            self.objective.append(int(cost[cell]))
        self.index[family] = np.arange(start, len(self.variables)).reshape(shape)
        self._matrices = None
        return self.index[family]

    def add_constraint(self, terms, relation, rhs, tag):
        """Append a row from ``(column, coefficient)`` pairs; repeated columns are summed."""
        merged = {}
        for column, coef in terms:
            merged[int(column)] = merged.get(int(column), 0) + coef
        coefficients = tuple((j, c) for j, c in merged.items() if c != 0)
        self.constraints.append(Constraint(coefficients, relation, rhs, tag))
        self._matrices = None

    @property
    def tags(self):
        return sorted({c.tag for c in self.constraints})

    def family_size(self, family):
        return self.index[family].size if family in self.index else 0

    def matrices(self):
        """Sparse form for LP solvers.

        Returns ``(c, a_ub, b_ub, a_eq, b_eq, lower, upper, integral)`` where
        ``>=`` rows are negated into ``a_ub``.
        """
        if self._matrices is None:
            rows = {False: ([], [], [], []), True: ([], [], [], [])}
            for constraint in self.constraints:
                is_eq = constraint.relation is Relation.eq
                sign = -1 if constraint.relation is Relation.ge else 1
                r, c, v, b = rows[is_eq]
                row = len(b)
                for column, coef in constraint.coefficients:
                    r.append(row)
                    c.append(column)
                    v.append(sign * coef)
                b.append(sign * constraint.rhs)
            n = len(self.variables)

            def sparse(r, c, v, b):
                return scipy.sparse.csr_matrix((v, (r, c)), shape=(len(b), n), dtype=float), np.array(b, dtype=float)

            a_ub, b_ub = sparse(*rows[False])
            a_eq, b_eq = sparse(*rows[True])
            self._matrices = (
                np.array(self.objective, dtype=float), a_ub, b_ub, a_eq, b_eq,
                np.array([v.lower for v in self.variables]), np.array([v.upper for v in self.variables]),
                np.array([v.kind is not VarKind.continuous for v in self.variables]))
        return self._matrices

    def objective_value(self, vector):
        return float(np.dot(self.matrices()[0], vector))

    def is_feasible(self, vector, tol=1e-6):
        """Whether a full variable vector satisfies bounds, rows and integrality."""
        _, a_ub, b_ub, a_eq, b_eq, lower, upper, integral = self.matrices()
        vector = np.asarray(vector, dtype=float)
        return bool(np.all(vector >= lower - tol) and np.all(vector <= upper + tol)
                    and np.all(a_ub.dot(vector) <= b_ub + tol)
                    and np.all(np.abs(a_eq.dot(vector) - b_eq) <= tol)
                    and np.all(np.abs(vector[integral] - np.round(vector[integral])) <= tol))

    def to_solution(self, vector):
        """Read the placement and assignment out of an integral vector."""
        vector = np.round(np.asarray(vector, dtype=float)).astype(np.int64)
        return Solution(*(vector[self.index[family]] for family in ('x', 'z', 'y', 'y_pen')))

    def migrations(self, vector):
        """The ``y_mig`` values of a vector, padded with a zero first slot."""
        D, U, S, T = self.scenario.shape
        result = np.zeros((D, U, S, T), dtype=np.int64)
        if T > 1:
            result[..., 1:] = np.round(np.asarray(vector)[self.index['y_mig']]).astype(np.int64)
        return result

    def to_vector(self, solution):
        """A full variable vector for a solution, with y_mig and delta at their tight values."""
        check_shape(self.scenario, x=solution.x, z=solution.z, y=solution.y, y_pen=solution.y_pen)
        vector = np.zeros(len(self.variables))
        for family in ('x', 'z', 'y', 'y_pen'):
            vector[self.index[family]] = getattr(solution, family)
        if self.scenario.horizon > 1:
            y = np.asarray(solution.y, dtype=np.int64)
            aggregate = y.sum(axis=0)
            vector[self.index['delta']] = aggregate[..., 1:] >= aggregate[..., :-1]
            vector[self.index['y_mig']] = migration_tensor(self.scenario, y)[..., 1:]
        return vector


def build_milp(scenario):
    """Build the linearized program of a scenario.

    With ``A_t`` the aggregate assignment of one (cluster, service) at slot
    ``t``, ``delta = 0`` forces ``A_t <= A_{t-1} - 1`` and ``delta = 1``
    forces ``A_t >= A_{t-1}``, so ``y_mig`` is bounded below by the per-DC
    decreases or increases exactly as
    :func:`cloudletopt.model.compute_migrations` counts them.

    Each big-M is the smallest constant valid for its row: ``k_max[d]`` for
    the per-DC rows, and the summed ``k_max`` of the data centers eligible
    for the pair for the ``delta`` rows.
    """
    D, U, S, T = scenario.shape
    dcs = [dc.id for dc in scenario.data_centers]
    ucs = [uc.id for uc in scenario.user_clusters]
    svs = [sv.id for sv in scenario.services]
    p = scenario.eligibility_matrix()
    # Largest value y[d, u, s, t] can take
    reach = p * scenario.k_max[:, None, None]
    milp = MilpModel(scenario)

    x = milp.add_family('x', (D,), VarKind.binary, 0, 1, scenario.c_fix, lambda d: dcs[d])
    z = milp.add_family('z', (D,), VarKind.integer, 0, scenario.k_max, scenario.c_hw, lambda d: dcs[d])
    y = milp.add_family('y', (D, U, S, T), VarKind.integer, 0, reach[..., None],
                        scenario.c_op[:, None, None, :],
                        lambda d, u, s, t: '{},{},{},{}'.format(dcs[d], ucs[u], svs[s], t))
    y_pen = milp.add_family('y_pen', (U, S, T), VarKind.integer, 0, scenario.demand,
                            scenario.penalty_costs[:, :, None],
                            lambda u, s, t: '{},{},{}'.format(ucs[u], svs[s], t))
    if T > 1:
        y_mig = milp.add_family('y_mig', (D, U, S, T - 1), VarKind.integer, 0, reach[..., None],
                                scenario.c_mig[None, None, :, None],
                                lambda d, u, s, t: '{},{},{},{}'.format(dcs[d], ucs[u], svs[s], t + 1))
        delta = milp.add_family('delta', (U, S, T - 1), VarKind.binary, 0, 1, 0,
                                lambda u, s, t: '{},{},{}'.format(ucs[u], svs[s], t + 1))

    for u, s, t in np.ndindex(U, S, T):
        milp.add_constraint([(y_pen[u, s, t], 1)] + [(y[d, u, s, t], 1) for d in range(D)],
                            Relation.ge, int(scenario.demand[u, s, t]), 'demand-coverage')
    for d, t in np.ndindex(D, T):
        milp.add_constraint([(j, 1) for j in y[d, :, :, t].ravel()] + [(z[d], -1)], Relation.le, 0,
                            'capacity-link')
    for d in range(D):
        milp.add_constraint([(z[d], 1), (x[d], -int(scenario.k_max[d]))], Relation.le, 0, 'capacity-max')
        milp.add_constraint([(z[d], 1), (x[d], -int(scenario.k_min[d]))], Relation.ge, 0, 'capacity-min')
    for d, u, s, t in np.ndindex(D, U, S, T):
        milp.add_constraint([(y[d, u, s, t], 1)], Relation.le, int(p[d, u, s]) * int(scenario.k_max[d]),
                            'qos-eligibility')

    # Bandwidth rows, aggregated over services per (cluster, slot)
    local = scenario.local_cloudlets
    for u, t in np.ndindex(U, T):
        for tag, rate, column in (('lan-down', scenario.l_down, 0), ('lan-up', scenario.l_up, 1)):
            terms = [(y[d, u, s, t], int(rate[s])) for d in range(D) for s in range(S)]
            milp.add_constraint(terms, Relation.le, int(scenario.bandwidth[u, column]), tag)
        for tag, inbound, outbound, column in (('man-down', scenario.l_down, scenario.l_up, 2),
                                               ('man-up', scenario.l_up, scenario.l_down, 3)):
            terms = [(y[d, u, s, t], int(inbound[s])) for d in range(D) if d != local[u] for s in range(S)]
            if local[u] >= 0:
                terms += [(y[local[u], v, s, t], int(outbound[s])) for v in range(U) if v != u for s in range(S)]
            milp.add_constraint(terms, Relation.le, int(scenario.bandwidth[u, column]), tag)

    for u, s, t in np.ndindex(U, S, T - 1):
        now = [(y[d, u, s, t + 1], 1) for d in range(D)]
        before = [(y[d, u, s, t], -1) for d in range(D)]
        growth = now + before
        shrink = [(j, -c) for j, c in growth]
        pair_m = int(reach[:, u, s].sum())
        milp.add_constraint(growth + [(delta[u, s, t], -pair_m)], Relation.le, 0, 'migration-delta-up')
        milp.add_constraint(shrink + [(delta[u, s, t], pair_m)], Relation.le, pair_m, 'migration-delta-down')
        milp.add_constraint(shrink + [(delta[u, s, t], pair_m + 1)], Relation.ge, 1, 'migration-delta-strict')
        for d in np.flatnonzero(reach[:, u, s]):
            dc_m = int(reach[d, u, s])
            milp.add_constraint([(y_mig[d, u, s, t], 1), (y[d, u, s, t], -1), (y[d, u, s, t + 1], 1),
                                 (delta[u, s, t], -dc_m)], Relation.ge, -dc_m, 'migration-decrease')
            milp.add_constraint([(y_mig[d, u, s, t], 1), (y[d, u, s, t + 1], -1), (y[d, u, s, t], 1),
                                 (delta[u, s, t], dc_m)], Relation.ge, 0, 'migration-increase')
    return milp


def _number(value):
    value = float(value)
    return str(int(value)) if value.is_integer() else '{:.12g}'.format(value)


def export_mps(milp):
    """Write the program as a fixed-format MPS document (minimization).

    Rows and columns get 8-character codes; a comment block maps the codes
    back to the model's names. Every column lies between integer markers.
    """
    n_rows = len(milp.constraints)
    column_codes = ['C{:07d}'.format(j + 1) for j in range(len(milp.variables))]
    row_codes = ['R{:07d}'.format(i + 1) for i in range(n_rows)]
    by_column = [[] for _ in milp.variables]
    for i, constraint in enumerate(milp.constraints):
        for j, coef in constraint.coefficients:
            by_column[j].append((row_codes[i], coef))

    out = io.StringIO()
    out.write('* cloudletopt model export\n')
    for code, variable in zip(column_codes, milp.variables):
        out.write('* {} {}\n'.format(code, variable.name))
    for code, constraint in zip(row_codes, milp.constraints):
        out.write('* {} {}\n'.format(code, constraint.tag))
    out.write('NAME          CLOUDLET\n')
    out.write('ROWS\n')
    out.write(' N  COST\n')
    kinds = {Relation.le: 'L', Relation.ge: 'G', Relation.eq: 'E'}
    for code, constraint in zip(row_codes, milp.constraints):
        out.write(' {}  {}\n'.format(kinds[constraint.relation], code))
    out.write('COLUMNS\n')
    out.write("    MARKER                 'MARKER'                 'INTORG'\n")
    for j, code in enumerate(column_codes):
        # The cost entry is always written so that every column is declared
        out.write('    {:<8}  {:<8}  {:>12}\n'.format(code, 'COST', _number(milp.objective[j])))
        for row, coef in by_column[j]:
            out.write('    {:<8}  {:<8}  {:>12}\n'.format(code, row, _number(coef)))
    out.write("    MARKER                 'MARKER'                 'INTEND'\n")
    out.write('RHS\n')
    for code, constraint in zip(row_codes, milp.constraints):
        if constraint.rhs != 0:
            out.write('    {:<8}  {:<8}  {:>12}\n'.format('RHS', code, _number(constraint.rhs)))
    out.write('BOUNDS\n')
    for code, variable in zip(column_codes, milp.variables):
        if variable.lower != 0:
            out.write(' LO {:<8}  {:<8}  {:>12}\n'.format('BND', code, _number(variable.lower)))
        out.write(' UP {:<8}  {:<8}  {:>12}\n'.format('BND', code, _number(variable.upper)))
    out.write('ENDATA\n')
    return out.getvalue().encode('ascii', 'replace')
