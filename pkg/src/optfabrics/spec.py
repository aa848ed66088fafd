"""Specs, task maps, potentials and star-shaped transform trees.

A spec is the pair ``(M, f)`` of a second-order system ``M xdd + f = 0``.
Everything here works on point evaluations: a :class:`Spec` holds two
callables and the algebra (pullback, summation, forcing, damping) either
returns a new :class:`SpecEval` at a point or composes closures into a new
:class:`Spec`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

ArrayFn = Callable[..., np.ndarray]

CURVATURE_FD_STEP = 1e-6
JACOBIAN_FD_STEP = 1e-6
SYMMETRY_TOL = 1e-12
COND_LIMIT = 1e12


class FabricError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(FabricError, ValueError):
    pass


class SingularMetricError(FabricError, np.linalg.LinAlgError):
    pass


class NotPositiveDefiniteError(FabricError, ValueError):
    pass


def _vec(a, dim: int | None = None, name: str = "vector") -> np.ndarray:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {a.shape[0]}, expected {dim}")
    return a


def check_symmetric(M: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if M.size and np.max(np.abs(M - M.T)) > SYMMETRY_TOL * scale:
        raise FabricError("metric is not symmetric")


def solve_metric(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``M y = b`` for a symmetric metric.

    Cholesky is tried first. Invertible indefinite metrics fall back to an
    LU solve guarded by a condition-number check; anything else raises
    :class:`SingularMetricError` rather than returning a pseudo-inverse.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise SingularMetricError("metric has non-finite entries")
    try:
        c = scipy.linalg.cho_factor(M, check_finite=False)
        return scipy.linalg.cho_solve(c, b, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetricError(f"metric is singular (condition number {cond:.3g})")
    return np.linalg.solve(M, b)


class SpecEval(NamedTuple):
    """A spec evaluated at one state: metric ``M`` and force ``f``."""

    M: np.ndarray
    f: np.ndarray

    @property
    def dim(self) -> int:
        return self.f.shape[0]

    def accel(self) -> np.ndarray:
        """Canonical acceleration ``a = M^-1 f``."""
        return solve_metric(self.M, self.f)

    def policy(self) -> np.ndarray:
        """Policy acceleration ``pi = -M^-1 f``."""
        return -self.accel()


@dataclass(frozen=True)
class Spec:
    dim: int
    metric_fn: ArrayFn
    force_fn: ArrayFn
    label: str = ""

    def __call__(self, x, v) -> SpecEval:
        x = _vec(x, self.dim, "position")
        v = _vec(v, self.dim, "velocity")
        M = np.atleast_2d(np.asarray(self.metric_fn(x, v), dtype=float))
        f = np.atleast_1d(np.asarray(self.force_fn(x, v), dtype=float))
        if M.shape != (self.dim, self.dim) or f.shape != (self.dim,):
            raise DimensionError(f"spec {self.label!r} returned M{M.shape}, f{f.shape} for dim {self.dim}")
        return SpecEval(M, f)


def canonical_spec(dim: int, accel_fn: ArrayFn, label: str = "") -> Spec:
    """A ``(I, h)`` spec for ``xdd + h(x, xd) = 0``."""
    eye = np.eye(dim)
    return Spec(dim, lambda x, v: eye, accel_fn, label)


@dataclass(frozen=True)
class TaskMap:
    """A differentiable map ``x = phi(q)`` with Jacobian and curvature ``Jdot qd``.

    ``jacobian_fn`` and ``curvature_fn`` may be ``None``, in which case
    central finite differences are used (step 1e-6, directional in ``qd``
    for the curvature). ``evaluate_fn(q, qd) -> (x, J, c)`` is an optional
    fused version of all three used on the hot path.
    """

    domain_dim: int
    codomain_dim: int
    map_fn: ArrayFn
    jacobian_fn: ArrayFn | None = None
    curvature_fn: ArrayFn | None = None
    label: str = ""
    evaluate_fn: Callable | None = None

    def __call__(self, q) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.map_fn(q), dtype=float))

    def jacobian(self, q) -> np.ndarray:
        if self.jacobian_fn is not None:
            return np.atleast_2d(np.asarray(self.jacobian_fn(q), dtype=float))
        return fd_jacobian(self.map_fn, q, self.codomain_dim)

    def curvature(self, q, qd) -> np.ndarray:
        if self.curvature_fn is not None:
            return np.atleast_1d(np.asarray(self.curvature_fn(q, qd), dtype=float))
        return fd_curvature(self.jacobian, q, qd)

    def evaluate(self, q, qd):
        """Return ``(x, xd, J, c)`` at ``(q, qd)``."""
        q = _vec(q, self.domain_dim, "q")
        qd = _vec(qd, self.domain_dim, "qd")
        if self.evaluate_fn is not None:
            x, J, c = self.evaluate_fn(q, qd)
            return x, J @ qd, J, c
        J = self.jacobian(q)
        return self(q), J @ qd, J, self.curvature(q, qd)

    def compose(self, inner: "TaskMap") -> "TaskMap":
        """The map ``self o inner``."""
        if inner.codomain_dim != self.domain_dim:
            raise DimensionError("cannot compose task maps with mismatched dimensions")

        def jac(q):
            return self.jacobian(inner(q)) @ inner.jacobian(q)

        def curv(q, qd):
            y = inner(q)
            J1 = inner.jacobian(q)
            return self.jacobian(y) @ inner.curvature(q, qd) + self.curvature(y, J1 @ qd)

        return TaskMap(inner.domain_dim, self.codomain_dim, lambda q: self(inner(q)), jac, curv,
                       f"{self.label}∘{inner.label}")


def identity_map(dim: int) -> TaskMap:
    eye = np.eye(dim)
    zero = np.zeros(dim)
    return TaskMap(dim, dim, lambda q: np.array(q, dtype=float), lambda q: eye, lambda q, qd: zero, "identity",
                   lambda q, qd: (q, eye, zero))


def linear_map(A, b=None) -> TaskMap:
    """Affine map ``x = A q + b``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(A.shape[0]) if b is None else _vec(b, A.shape[0])
    zero = np.zeros(A.shape[0])
    return TaskMap(A.shape[1], A.shape[0], lambda q: A @ q + b, lambda q: A, lambda q, qd: zero, "affine")


def fd_jacobian(fn: ArrayFn, q, out_dim: int | None = None, step: float = JACOBIAN_FD_STEP) -> np.ndarray:
    q = _vec(q)
    cols = []
    for i in range(q.shape[0]):
        dq = np.zeros_like(q)
        dq[i] = step
        cols.append((np.atleast_1d(fn(q + dq)) - np.atleast_1d(fn(q - dq))) / (2 * step))
    J = np.column_stack(cols)
    if out_dim is not None and J.shape[0] != out_dim:
        raise DimensionError(f"map returned dimension {J.shape[0]}, expected {out_dim}")
    return J


def fd_curvature(jacobian: ArrayFn, q, qd, step: float = CURVATURE_FD_STEP) -> np.ndarray:
    q = _vec(q)
    qd = _vec(qd)
    return (jacobian(q + step * qd) - jacobian(q - step * qd)) @ qd / (2 * step)


@dataclass(frozen=True)
class Potential:
    dim: int
    value_fn: Callable[[np.ndarray], float]
    gradient_fn: ArrayFn
    label: str = ""

    def value(self, x) -> float:
        return float(self.value_fn(_vec(x, self.dim, "position")))

    def gradient(self, x) -> np.ndarray:
        g = np.atleast_1d(np.asarray(self.gradient_fn(_vec(x, self.dim, "position")), dtype=float))
        if not np.all(np.isfinite(g)):
            raise FabricError(f"potential {self.label!r} has a non-finite gradient")
        return g

    def pullback(self, tm: TaskMap) -> "Potential":
        """``psi(phi(q))`` with gradient ``J^T dpsi``."""
        if tm.codomain_dim != self.dim:
            raise DimensionError("potential and task map dimensions differ")
        return Potential(
            tm.domain_dim,
            lambda q: self.value_fn(tm(q)),
            lambda q: tm.jacobian(q).T @ self.gradient_fn(tm(q)),
            self.label,
        )

    def __add__(self, other: "Potential") -> "Potential":
        if other.dim != self.dim:
            raise DimensionError("cannot add potentials of different dimension")
        return Potential(self.dim, lambda x: self.value_fn(x) + other.value_fn(x),
                         lambda x: self.gradient_fn(x) + other.gradient_fn(x), f"{self.label}+{other.label}")


def gradient_fd_check(psi: Potential, x, step: float = 1e-6) -> float:
    """Relative (unit-floor) disagreement of ``psi.gradient`` with central differences."""
    x = _vec(x, psi.dim, "position")
    g = psi.gradient(x)
    num = fd_jacobian(lambda y: np.array([psi.value(y)]), x, 1, step)[0]
    return float(np.max(np.abs(g - num))) / max(1.0, float(np.max(np.abs(num))))


def zero_potential(dim: int) -> Potential:
    return Potential(dim, lambda x: 0.0, lambda x: np.zeros(dim), "zero")


# ---------------------------------------------------------------------------
# spec algebra


def evaluate_policy(spec: Spec, x, v) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M, pi)`` with ``pi = -M^-1 f`` at ``(x, v)``."""
    x = _vec(x, spec.dim, "position")
    v = _vec(v, spec.dim, "velocity")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise FabricError("state must be finite")
    ev = spec(x, v)
    check_symmetric(ev.M)
    return ev.M, -solve_metric(ev.M, ev.f)


def pullback_eval(ev: SpecEval, J: np.ndarray, c: np.ndarray) -> SpecEval:
    """Pull a codomain evaluation back through Jacobian ``J`` and curvature ``c``."""
    MJ = ev.M @ J
    return SpecEval(J.T @ MJ, J.T @ (ev.f + ev.M @ c))


def pullback(spec: Spec, tm: TaskMap, q, qd) -> SpecEval:
    """``(J^T M J, J^T (f + M Jdot qd))`` evaluated at ``x = phi(q)``, ``xd = J qd``."""
    if tm.codomain_dim != spec.dim:
        raise DimensionError(f"task map codomain {tm.codomain_dim} does not match spec dimension {spec.dim}")
    x, xd, J, c = tm.evaluate(q, qd)
    return pullback_eval(spec(x, xd), J, c)


def pulled_spec(spec: Spec, tm: TaskMap) -> Spec:
    """Lazy pullback: a spec on the domain of ``tm``."""
    if tm.codomain_dim != spec.dim:
        raise DimensionError(f"task map codomain {tm.codomain_dim} does not match spec dimension {spec.dim}")
    return Spec(tm.domain_dim, lambda q, qd: pullback(spec, tm, q, qd).M,
                lambda q, qd: pullback(spec, tm, q, qd).f, f"pull({spec.label})")


def sum_specs(evals: Sequence[SpecEval]) -> SpecEval:
    """Natural-form sum ``(sum M_i, sum f_i)``."""
    evals = list(evals)
    if not evals:
        raise FabricError("cannot sum an empty list of specs")
    dim = evals[0].dim
    M = np.zeros((dim, dim))
    f = np.zeros(dim)
    for ev in evals:
        if ev.dim != dim or ev.M.shape != (dim, dim):
            raise DimensionError("specs in a sum must share one dimension")
        M = M + ev.M
        f = f + ev.f
    return SpecEval(M, f)


def canonical_sum(evals: Sequence[SpecEval]) -> tuple[np.ndarray, np.ndarray]:
    """Canonical view of :func:`sum_specs`: ``(sum M_i, (sum M_i)^-1 sum M_i a_i)``."""
    total = sum_specs(evals)
    return total.M, total.accel()


def force_spec(spec: Spec, psi: Potential) -> Spec:
    """Forced variant ``(M, f + dpsi)``."""
    if psi.dim != spec.dim:
        raise DimensionError("potential and spec dimensions differ")
    return Spec(spec.dim, spec.metric_fn, lambda x, v: spec.force_fn(x, v) + psi.gradient(x),
                f"forced({spec.label})")


def check_spd(B: np.ndarray) -> None:
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != B.shape[1]:
        raise NotPositiveDefiniteError("damping matrix must be square")
    scale = max(1.0, float(np.max(np.abs(B))))
    if np.max(np.abs(B - B.T)) > SYMMETRY_TOL * scale:
        raise NotPositiveDefiniteError("damping matrix is not symmetric")
    try:
        np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("damping matrix is not positive definite") from None


def damp_spec(spec: Spec, B_fn: ArrayFn) -> Spec:
    """Damped variant ``(M, f + B xd)``; ``B_fn`` must return SPD matrices."""

    def force(x, v):
        B = np.atleast_2d(np.asarray(B_fn(x, v), dtype=float))
        check_spd(B)
        return spec.force_fn(x, v) + B @ v

    return Spec(spec.dim, spec.metric_fn, force, f"damped({spec.label})")


# ---------------------------------------------------------------------------
# transform trees


@dataclass
class TransformTree:
    """Star-shaped tree: every leaf maps directly from the root."""

    root_dim: int
    leaves: list = field(default_factory=list)

    def __post_init__(self):
        for tm, _ in self.leaves:
            self._check_leaf(tm)

    def _check_leaf(self, tm: TaskMap) -> None:
        if tm.domain_dim != self.root_dim:
            raise DimensionError(f"leaf map {tm.label!r} has domain {tm.domain_dim}, root is {self.root_dim}")

    def add(self, tm: TaskMap, node) -> "TransformTree":
        self._check_leaf(tm)
        self.leaves.append((tm, node))
        return self


def _leaf_spec(node) -> Spec:
    if isinstance(node, Spec):
        return node
    lower = getattr(node, "geometry_spec", None)
    if lower is None:
        raise TypeError(f"tree leaf {node!r} is neither a Spec nor a fabric term")
    return lower()


def tree_resolve(tree: TransformTree, q, qd) -> SpecEval:
    """Pull every leaf back to the root and sum."""
    if not tree.leaves:
        raise FabricError("transform tree has no leaves")
    q = _vec(q, tree.root_dim, "q")
    qd = _vec(qd, tree.root_dim, "qd")
    return sum_specs([pullback(_leaf_spec(node), tm, q, qd) for tm, node in tree.leaves])
