"""The eleven analytic min-max test problems.

Each problem is an objective ``f(x, y)`` on box domains, together with a
closed-form worst scenario ``yhat(x)``, the worst-case objective
``F(x) = max_y f(x, y)``, and the known optimum of ``F``.  The coupling
between the design vector ``x`` and the scenario vector ``y`` runs through
``z = B^T x`` for an interaction matrix ``B`` (diagonal, or banded for the
rectangular scalability instances).

Every objective splits as ``f(x, y) = phi(x) + psi(z, y)``; the kernels
exploit this so inner-maximization loops that fix ``x`` can precompute
``(z, phi)`` once.

All problems are categorized by the structure of the global solution:
``S`` (strict min-max saddle point), ``W`` (weak saddle point), and ``N``
(not a saddle point).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import kernel
from .exceptions import InvalidInputError, UnsupportedError
from .linalg import moore_penrose

SINH1 = math.sinh(1.0)

SADDLE_CATEGORY = {
    1: "W", 2: "W", 3: "S", 4: "N", 5: "S", 6: "S",
    7: "S", 8: "S", 9: "N", 10: "N", 11: "S",
}

#: problems whose worst scenario stays well-defined without domain clipping
UNBOUNDED_OK = (5, 7, 11)


class EvalCounter:
    """Mutable f-call ledger, shareable with the jitted kernels."""

    __slots__ = ("array",)

    def __init__(self, start=0):
        self.array = np.array([int(start)], dtype=np.int64)

    @property
    def n(self):
        return int(self.array[0])

    def add(self, k=1):
        self.array[0] += int(k)

    def __repr__(self):
        return f"EvalCounter(n={self.n})"


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with strictly ordered bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InvalidInputError("domain bounds must be matching vectors")
        if not np.all(lower < upper):
            raise InvalidInputError("domain requires lower < upper in every axis")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, x, atol=0.0):
        return bool(
            np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        )

    def clip(self, x):
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def sample_uniform(self, rng):
        return rng.uniform(self.lower, self.upper)


@dataclass(frozen=True)
class InteractionMatrix:
    """Interaction matrix spec: ``diag(b)`` or the all-equal band matrix.

    The band variant has bandwidth ``|dy - dx| + 1`` so that every row and
    column carries at least one entry.
    """

    kind: str
    value: float
    dx: int
    dy: int

    def __post_init__(self):
        if self.kind not in ("diag", "band"):
            raise InvalidInputError(f"unknown matrix kind {self.kind!r}")
        if self.kind == "diag" and self.dx != self.dy:
            raise InvalidInputError("diagonal interaction matrix needs dx == dy")
        if self.value == 0.0:
            raise InvalidInputError("interaction value must be nonzero")
        if self.dx < 1 or self.dy < 1:
            raise InvalidInputError("dimensions must be positive")

    @property
    def bandwidth(self):
        return abs(self.dy - self.dx) + 1

    @property
    def is_identity(self):
        return self.kind == "diag" and self.value == 1.0

    def dense(self):
        b = np.zeros((self.dx, self.dy))
        if self.kind == "diag":
            np.fill_diagonal(b, self.value)
            return b
        bw = self.bandwidth
        for i in range(self.dx):
            for j in range(self.dy):
                off = j - i if self.dy >= self.dx else i - j
                if 0 <= off < bw:
                    b[i, j] = self.value
        return b


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@kernel
def _bt_x(bmat, diag_value, x, z):
    """z = B^T x, with a fast path for diagonal B."""
    dy = z.shape[0]
    if diag_value != 0.0:
        for j in range(dy):
            z[j] = diag_value * x[j]
        return
    dx = x.shape[0]
    for j in range(dy):
        s = 0.0
        for i in range(dx):
            s += bmat[i, j] * x[i]
        z[j] = s


@kernel
def _phi(pid, x, z, by, gamma, alpha):
    """The x-only part of the objective."""
    if pid == 1 or pid == 9:
        return 0.0
    if pid == 2 or pid == 4 or pid == 5 or pid == 11:
        s = 0.0
        for i in range(x.shape[0]):
            s += x[i] * x[i]
        return 0.5 * s
    if pid == 3:
        c = alpha - gamma * by
        s = 0.0
        for j in range(z.shape[0]):
            t = z[j] - c
            s += t * t
        return 0.5 * s
    if pid == 6:
        s = 0.0
        a = 0.0
        for i in range(x.shape[0]):
            s += x[i] * x[i]
            a += np.abs(x[i])
        return 0.5 * s + a
    if pid == 7:
        s = 0.0
        for i in range(x.shape[0]):
            s += x[i] * x[i]
        return 0.25 * s * s
    if pid == 8:
        a = 0.0
        for i in range(x.shape[0]):
            a += np.abs(x[i])
        return a
    # pid == 10
    s = 0.0
    for j in range(z.shape[0]):
        s += z[j] * z[j]
    return s


@kernel
def _psi(pid, z, y, by, gamma, dystar):
    """The coupled part of the objective, as a function of (z, y)."""
    dy = z.shape[0]
    if pid == 1 or pid == 2:
        s = 0.0
        for j in range(dy):
            s += z[j] * y[j]
        return s
    if pid == 3:
        s = 0.0
        for j in range(dy):
            s += z[j] * y[j]
        return gamma * s
    if pid == 4:
        s = 0.0
        for j in range(dy):
            s += z[j] * y[j] + 0.5 * y[j] * y[j]
        return s
    if pid == 5:
        s = 0.0
        for j in range(dy):
            s += z[j] * y[j] - 0.5 * y[j] * y[j]
        return s
    if pid == 6:
        s = 0.0
        for j in range(dy):
            s += z[j] * y[j] - np.abs(y[j]) - 0.5 * y[j] * y[j]
        return s
    if pid == 7:
        s = 0.0
        n2 = 0.0
        for j in range(dy):
            s += z[j] * y[j]
            n2 += y[j] * y[j]
        return s - 0.25 * n2 * n2
    if pid == 8:
        s = 0.0
        for j in range(dy):
            s += z[j] * y[j] - np.abs(y[j])
        return s
    if pid == 9:
        s = 0.0
        for j in range(dystar):
            if y[j] > 0.0:
                sg = 1.0
            elif y[j] < 0.0:
                sg = -1.0
            else:
                sg = 0.0
            t = z[j] + np.exp(sg) * np.sin(np.pi * y[j] / by)
            s += t * t
        for j in range(dystar, dy):
            s += z[j] * z[j] - y[j] * y[j]
        return s
    if pid == 10:
        s = 0.0
        for j in range(dy):
            t = y[j] - z[j]
            s += t * t
        return -2.0 * s
    # pid == 11
    s = 0.0
    for j in range(dy):
        c = 10.0 ** (-3.0 * (j + 1) / dy)
        s += c * z[j] * y[j] - 0.5 * c * c * y[j] * y[j]
    return s


@kernel
def _worst_y(pid, z, by, dystar, bounded, y):
    """Closed-form worst scenario as a function of z (ties resolved +)."""
    dy = z.shape[0]
    if pid == 1 or pid == 2 or pid == 3 or pid == 4:
        for j in range(dy):
            y[j] = by if z[j] >= 0.0 else -by
        return
    if pid == 5 or pid == 10:
        for j in range(dy):
            w = z[j]
            if bounded:
                w = min(max(w, -by), by)
            y[j] = w
        return
    if pid == 6:
        for j in range(dy):
            a = np.abs(z[j])
            sg = 1.0 if z[j] >= 0.0 else -1.0
            if a <= 1.0:
                y[j] = 0.0
            elif a <= by + 1.0:
                y[j] = z[j] - sg
            else:
                y[j] = by * sg
        return
    if pid == 7:
        n2 = 0.0
        for j in range(dy):
            n2 += z[j] * z[j]
        if n2 == 0.0:
            for j in range(dy):
                y[j] = 0.0
            return
        scale = n2 ** (1.0 / 3.0)
        for j in range(dy):
            w = z[j] / scale
            if bounded:
                w = min(max(w, -by), by)
            y[j] = w
        return
    if pid == 8:
        for j in range(dy):
            if np.abs(z[j]) <= 1.0:
                y[j] = 0.0
            else:
                y[j] = by if z[j] > 0.0 else -by
        return
    if pid == 9:
        for j in range(dy):
            if j < dystar:
                y[j] = 0.5 * by if z[j] >= -SINH1 else -0.5 * by
            else:
                y[j] = 0.0
        return
    # pid == 11
    for j in range(dy):
        w = (10.0 ** (3.0 * (j + 1) / dy)) * z[j]
        if bounded:
            w = min(max(w, -by), by)
        y[j] = w


@kernel
def _eval_from_cache(pid, phi, z, y, by, gamma, dystar):
    return phi + _psi(pid, z, y, by, gamma, dystar)


@kernel
def _worst_value_from_cache(pid, phi, z, by, gamma, dystar, bounded, ybuf):
    _worst_y(pid, z, by, dystar, bounded, ybuf)
    return phi + _psi(pid, z, ybuf, by, gamma, dystar)


@kernel
def _grid_max(pid, phi, z, by, gamma, dystar, n, ybuf):
    """Brute-force max of psi over the regular grid on the y-box."""
    dy = z.shape[0]
    step = 2.0 * by / (n - 1)
    best = -np.inf
    if dy == 1:
        for i in range(n):
            ybuf[0] = -by + i * step
            v = _psi(pid, z, ybuf, by, gamma, dystar)
            if v > best:
                best = v
    elif dy == 2:
        for i in range(n):
            ybuf[0] = -by + i * step
            for j in range(n):
                ybuf[1] = -by + j * step
                v = _psi(pid, z, ybuf, by, gamma, dystar)
                if v > best:
                    best = v
    else:
        for i in range(n):
            ybuf[0] = -by + i * step
            for j in range(n):
                ybuf[1] = -by + j * step
                for k in range(n):
                    ybuf[2] = -by + k * step
                    v = _psi(pid, z, ybuf, by, gamma, dystar)
                    if v > best:
                        best = v
    return phi + best


# ---------------------------------------------------------------------------
# problem objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """An immutable min-max test problem instance.

    Build instances with :func:`make_problem`; the constructor performs no
    validation of the cross-field constraints.
    """

    index: int
    matrix: InteractionMatrix
    x_domain: BoxDomain
    y_domain: BoxDomain
    by: float
    gamma: float
    alpha: float
    dy_star: int
    bounded: bool
    b_dense: np.ndarray = field(repr=False)
    diag_value: float = field(repr=False)

    @property
    def name(self):
        return f"f{self.index}"

    @property
    def dx(self):
        return self.matrix.dx

    @property
    def dy(self):
        return self.matrix.dy

    @property
    def saddle_category(self):
        return SADDLE_CATEGORY[self.index]

    # -- evaluation --------------------------------------------------------

    def _zcache(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.dx,):
            raise InvalidInputError(
                f"{self.name}: expected design vector of length {self.dx}"
            )
        z = np.empty(self.dy)
        _bt_x(self.b_dense, self.diag_value, x, z)
        phi = _phi(self.index, x, z, self.by, self.gamma, self.alpha)
        return z, float(phi)

    def evaluate(self, x, y, counter=None):
        """f(x, y).  Total in its arguments; counts one f-call if a counter
        is supplied."""
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.shape != (self.dy,):
            raise InvalidInputError(
                f"{self.name}: expected scenario vector of length {self.dy}"
            )
        z, phi = self._zcache(x)
        if counter is not None:
            counter.add(1)
        return float(
            _eval_from_cache(self.index, phi, z, y, self.by, self.gamma, self.dy_star)
        )

    def worst_scenario(self, x):
        """The closed-form maximizer yhat(x) (ties resolved to the positive
        branch; exact zero input maps to the zero scenario for f7)."""
        z, _ = self._zcache(x)
        y = np.empty(self.dy)
        _worst_y(self.index, z, self.by, self.dy_star, self.bounded, y)
        return y

    def worst_case_value(self, x):
        """F(x) = f(x, yhat(x)).  Oracle path: never counts f-calls."""
        z, phi = self._zcache(x)
        ybuf = np.empty(self.dy)
        return float(
            _worst_value_from_cache(
                self.index, phi, z, self.by, self.gamma, self.dy_star,
                self.bounded, ybuf,
            )
        )

    def optimum(self):
        """(x*, F*) for the worst-case objective.

        Solves the closed-form optimality conditions on ``z* = B^T x*``;
        raises :class:`UnsupportedError` when they have no solution for the
        configured interaction matrix.
        """
        if self.index == 3:
            target = np.full(self.dy, self.alpha)
        elif self.index == 9:
            target = np.zeros(self.dy)
            target[: self.dy_star] = -SINH1
        else:
            x_star = np.zeros(self.dx)
            return x_star, self.worst_case_value(x_star)
        if self.matrix.kind == "diag":
            x_star = target / self.matrix.value
        else:
            pinv = moore_penrose(self.b_dense)
            x_star = pinv.T @ target
            if np.linalg.norm(self.b_dense.T @ x_star - target) > 1e-9:
                raise UnsupportedError(
                    f"{self.name}: optimality condition unsolvable for this B"
                )
        return x_star, self.worst_case_value(x_star)

    def brute_force_worst_case(self, x, grid_points_per_axis):
        """Grid-search oracle for F(x); supported for dy <= 3 only."""
        if self.dy > 3:
            raise UnsupportedError("grid oracle supports dy <= 3")
        if grid_points_per_axis < 2:
            raise InvalidInputError("need at least two grid points per axis")
        z, phi = self._zcache(x)
        ybuf = np.empty(self.dy)
        return float(
            _grid_max(
                self.index, phi, z, self.by, self.gamma, self.dy_star,
                int(grid_points_per_axis), ybuf,
            )
        )


def make_problem(
    name,
    dx=20,
    dy=20,
    b=1.0,
    matrix="diag",
    by=3.0,
    bounded=True,
    gamma=1.0,
    x_bound=3.0,
):
    """Construct one of the eleven problems ``"f1"`` .. ``"f11"``.

    Parameters
    ----------
    name : str or int
        Problem identifier.
    dx, dy : int
        Design and scenario dimensions.
    b : float
        Interaction strength: the diagonal value, or the band value for
        ``matrix="band"``.
    matrix : {"diag", "band"}
        Interaction matrix shape.  ``diag`` requires ``dx == dy``.
    by : float
        Scenario box is ``[-by, by]**dy``.
    bounded : bool
        With ``bounded=False`` the box constraints are ignored by the
        solvers and the worst-scenario formulas drop their clipping branch;
        only f5, f7 and f11 support this mode.
    gamma : float
        The positive coupling weight of f3.
    x_bound : float
        Design box is ``[-x_bound, x_bound]**dx``.
    """
    if isinstance(name, str):
        key = name.strip().lower()
        if not key.startswith("f"):
            raise InvalidInputError(f"unknown problem {name!r}")
        try:
            index = int(key[1:])
        except ValueError:
            raise InvalidInputError(f"unknown problem {name!r}") from None
    else:
        index = int(name)
    if not 1 <= index <= 11:
        raise InvalidInputError(f"problem index {index} outside f1..f11")
    if by <= 0 or x_bound <= 0:
        raise InvalidInputError("domain half-widths must be positive")
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")

    im = InteractionMatrix(matrix, float(b), int(dx), int(dy))

    if index == 3 and im.kind != "diag":
        raise UnsupportedError("f3 is supported with a diagonal B only")
    if index == 10 and not im.is_identity:
        raise UnsupportedError("f10 requires dx == dy and B == I")
    if index == 11 and dx != dy:
        raise UnsupportedError("f11 requires dx == dy")
    if not bounded and index not in UNBOUNDED_OK:
        raise UnsupportedError(
            f"unbounded mode is supported for "
            f"{', '.join('f%d' % i for i in UNBOUNDED_OK)} only"
        )

    b_dense = im.dense()
    alpha = 0.0
    if index == 3:
        pinv = moore_penrose(b_dense)
        col_norms = np.abs(pinv).sum(axis=0)
        alpha = -x_bound / ((30.0 / 7.0) * float(col_norms.max()))

    return Problem(
        index=index,
        matrix=im,
        x_domain=BoxDomain(np.full(dx, -float(x_bound)), np.full(dx, float(x_bound))),
        y_domain=BoxDomain(np.full(dy, -float(by)), np.full(dy, float(by))),
        by=float(by),
        gamma=float(gamma),
        alpha=float(alpha),
        dy_star=min(int(dy), 3),
        bounded=bool(bounded),
        b_dense=b_dense,
        diag_value=float(b) if im.kind == "diag" else 0.0,
    )


def list_problems():
    """Metadata rows for all eleven problems (id, category, constraints)."""
    rows = []
    for i in range(1, 12):
        rows.append(
            {
                "id": f"f{i}",
                "saddle_category": SADDLE_CATEGORY[i],
                "default_dx": 20,
                "default_dy": 20,
                "matrix_kinds": ["diag"] if i in (3, 10, 11) else ["diag", "band"],
                "unbounded_ok": i in UNBOUNDED_OK,
            }
        )
    return rows
