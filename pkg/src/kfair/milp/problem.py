"""Mixed-integer linear problems over continuous and binary variables."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InputError
from .lp import LinearProgram

CONTINUOUS = "continuous"
BINARY = "binary"
LE, EQ, GE = "<=", "==", ">="


@dataclass
class Variable:
    id: int
    name: str
    kind: str
    lower: float
    upper: float


@dataclass
class LinearExpr:
    coefficients: dict = field(default_factory=dict)
    constant: float = 0.0

    @classmethod
    def of(cls, var_id, coef=1.0):
        return cls({var_id: float(coef)})

    @classmethod
    def const(cls, value):
        return cls({}, float(value))

    def copy(self):
        return LinearExpr(dict(self.coefficients), self.constant)

    def add(self, other, scale=1.0):
        """In-place ``self += scale * other``; returns self."""
        if scale == 0.0:
            return self
        for k, v in other.coefficients.items():
            self.coefficients[k] = self.coefficients.get(k, 0.0) + scale * v
        self.constant += scale * other.constant
        return self

    def __add__(self, other):
        return self.copy().add(other)

    def __sub__(self, other):
        return self.copy().add(other, -1.0)

    def scaled(self, s):
        return LinearExpr({k: s * v for k, v in self.coefficients.items()}, s * self.constant)

    def value(self, x):
        return float(sum(c * x[k] for k, c in self.coefficients.items()) + self.constant)


@dataclass
class Constraint:
    expr: LinearExpr
    relation: str
    rhs: float
    name: str = ""


class MilpProblem:
    """Maximize a linear objective; ``var_map`` gives named handles to variables.

    ``repair`` (optional) maps an LP point to a complete 0/1 assignment of the
    binaries; the solver uses it as a primal heuristic.
    """

    def __init__(self):
        self.variables = []
        self.constraints = []
        self.objective = LinearExpr()
        self.var_map = {}
        self.repair = None
        self.meta = {}
        self._matrices = None
        self._program = None
        self._program_key = None

    # -- building -----------------------------------------------------------
    def add_var(self, name, kind=CONTINUOUS, lower=0.0, upper=1.0):
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        if not (np.isfinite(lower) and np.isfinite(upper)) or lower > upper:
            raise InputError(f"variable {name}: bounds [{lower}, {upper}] invalid")
        if name in self.var_map:
            raise InputError(f"duplicate variable name {name}")
        var = Variable(len(self.variables), name, kind, float(lower), float(upper))
        self.variables.append(var)
        self.var_map[name] = var.id
        self._matrices = None
        return var.id

    def add_constraint(self, expr, relation, rhs=0.0, name=""):
        if relation not in (LE, EQ, GE):
            raise InputError(f"unknown relation {relation!r}")
        expr = expr.copy()
        rhs = float(rhs) - expr.constant
        expr.constant = 0.0
        expr.coefficients = {k: v for k, v in expr.coefficients.items() if v != 0.0}
        for k in expr.coefficients:
            if not 0 <= k < len(self.variables):
                raise InputError(f"constraint {name!r} references undeclared variable {k}")
        self.constraints.append(Constraint(expr, relation, rhs, name))
        self._matrices = None

    def maximize(self, expr):
        self.objective = expr.copy()
        self._matrices = None

    # -- queries ------------------------------------------------------------
    @property
    def n_vars(self):
        return len(self.variables)

    @property
    def binary_ids(self):
        return np.array([v.id for v in self.variables if v.kind == BINARY], dtype=int)

    def id(self, name):
        return self.var_map[name]

    def bounds(self):
        lo = np.array([v.lower for v in self.variables])
        hi = np.array([v.upper for v in self.variables])
        return lo, hi

    def matrices(self):
        """Dense ``(c, A_ub, b_ub, A_eq, b_eq)`` with ≥ rows negated into ≤ rows."""
        if self._matrices is None:
            n = self.n_vars
            c = np.zeros(n)
            for k, v in self.objective.coefficients.items():
                c[k] = v
            ub, bub, eq, beq = [], [], [], []
            for con in self.constraints:
                row = np.zeros(n)
                for k, v in con.expr.coefficients.items():
                    row[k] = v
                if con.relation == LE:
                    ub.append(row)
                    bub.append(con.rhs)
                elif con.relation == GE:
                    ub.append(-row)
                    bub.append(-con.rhs)
                else:
                    eq.append(row)
                    beq.append(con.rhs)
            self._matrices = (
                c,
                np.array(ub).reshape(-1, n), np.array(bub),
                np.array(eq).reshape(-1, n), np.array(beq),
            )
        return self._matrices

    def linear_program(self):
        """The relaxation as a :class:`LinearProgram` (minimizing ``-objective``)."""
        if self._program is None or self._program_key is not self._matrices:
            c, A_ub, b_ub, A_eq, b_eq = self.matrices()
            self._program = LinearProgram(-c, A_ub, b_ub, A_eq, b_eq)
            self._program_key = self._matrices
        return self._program

    def objective_value(self, x):
        return self.objective.value(x)

    def max_violation(self, x):
        """Largest constraint or bound violation of point ``x``."""
        x = np.asarray(x, dtype=float)
        c, A_ub, b_ub, A_eq, b_eq = self.matrices()
        lo, hi = self.bounds()
        worst = float(np.max(np.concatenate([lo - x, x - hi, [0.0]])))
        if A_ub.size:
            worst = max(worst, float(np.max(A_ub @ x - b_ub)))
        if A_eq.size:
            worst = max(worst, float(np.max(np.abs(A_eq @ x - b_eq))))
        bins = self.binary_ids
        if bins.size:
            worst = max(worst, float(np.max(np.abs(x[bins] - np.round(x[bins])))))
        return worst

    # -- LP text format -------------------------------------------------------
    def to_lp_string(self):
        names = [_lp_name(v.name, v.id) for v in self.variables]

        def terms(expr):
            parts = []
            for k in sorted(expr.coefficients):
                v = expr.coefficients[k]
                parts.append(f"{'-' if v < 0 else '+'} {abs(v):.17g} {names[k]}")
            return " ".join(parts) if parts else "0 " + names[0]

        out = io.StringIO()
        out.write("\\ kfair pair-fairness MILP\nMaximize\n")
        out.write(f" obj: {terms(self.objective)}\nSubject To\n")
        for i, con in enumerate(self.constraints):
            rel = {LE: "<=", GE: ">=", EQ: "="}[con.relation]
            label = _lp_name(con.name, i) if con.name else f"c{i}"
            out.write(f" {label}: {terms(con.expr)} {rel} {con.rhs:.17g}\n")
        out.write("Bounds\n")
        for v, name in zip(self.variables, names):
            if v.kind != BINARY:
                out.write(f" {v.lower:.17g} <= {name} <= {v.upper:.17g}\n")
        bins = [names[v.id] for v in self.variables if v.kind == BINARY]
        if bins:
            out.write("Binaries\n")
            for i in range(0, len(bins), 8):
                out.write(" " + " ".join(bins[i:i + 8]) + "\n")
        out.write("End\n")
        return out.getvalue()

    def write_lp(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lp_string())


def _lp_name(name, fallback):
    clean = re.sub(r"[^A-Za-z0-9_.]", "_", name)
    if not clean or clean[0].isdigit() or clean[0] == ".":
        clean = f"v{fallback}_{clean}"
    return clean[:255]
