"""Proper cones, ordered value objects, and cone linear absolute norms.

Two self-dual cones are supported: the nonnegative orthant (value objects are
real vectors, ordered elementwise) and the positive-semidefinite cone (value
objects are symmetric matrices, ordered in the Loewner sense).  A cone linear
absolute norm ``|x|_w = <w, x>`` is an inner product against a strictly
interior weight; on the orthant this is the weighted 1-norm, on the PSD cone
the Frobenius pairing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConeMismatch,
    EmptySet,
    NotInCone,
    NotInteriorWeight,
    ShapeMismatch,
)

#: default tolerance for cone-membership tests
MEMBERSHIP_TOL = 1e-10

#: relative tolerance for accepting a nearly-symmetric matrix before symmetrizing
SYMMETRY_TOL = 1e-12


class ConeKind(enum.Enum):
    ORTHANT = "orthant"
    PSD = "psd"


@dataclass(frozen=True)
class ConeTag:
    """Identifies which proper cone a value object lives in."""

    kind: ConeKind
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeMismatch(f"cone dimension must be >= 1, got {self.dim}")

    @staticmethod
    def orthant(dim: int) -> "ConeTag":
        return ConeTag(ConeKind.ORTHANT, dim)

    @staticmethod
    def psd(dim: int) -> "ConeTag":
        return ConeTag(ConeKind.PSD, dim)

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind is ConeKind.ORTHANT:
            return (self.dim,)
        return (self.dim, self.dim)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ValueObject:
    """An element of a cone's ambient space, tagged with its cone.

    Construction checks shape only; PSD-tagged matrices must be symmetric to
    a relative tolerance of 1e-12 and are symmetrized as (M + M^T)/2 before
    being stored.  Cone membership is a separate, tolerance-based predicate
    (:func:`in_cone`) so that intermediate iterates slightly outside the cone
    can still be represented.
    """

    cone: ConeTag
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != self.cone.shape:
            raise ShapeMismatch(
                f"data shape {data.shape} does not match cone shape {self.cone.shape}"
            )
        if self.cone.kind is ConeKind.PSD:
            asym = np.max(np.abs(data - data.T)) if data.size else 0.0
            scale = max(1.0, float(np.max(np.abs(data))) if data.size else 1.0)
            if asym > SYMMETRY_TOL * scale:
                raise ShapeMismatch(
                    f"matrix is not symmetric: max asymmetry {asym:.3e} "
                    f"exceeds {SYMMETRY_TOL:.0e} * {scale:.3e}"
                )
            data = 0.5 * (data + data.T)
        object.__setattr__(self, "data", _frozen(data))

    @staticmethod
    def zeros(cone: ConeTag) -> "ValueObject":
        return ValueObject(cone, np.zeros(cone.shape))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


class Order(enum.Enum):
    LEQ = "leq"
    GEQ = "geq"
    EQUAL = "equal"
    UNORDERED = "unordered"


def _min_eig(sym: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (sym + sym.T)).min())


def in_cone(x: ValueObject, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership test: entries >= -tol (orthant) / min eigenvalue >= -tol (PSD)."""
    if x.cone.kind is ConeKind.ORTHANT:
        return bool(np.all(x.data >= -tol))
    return _min_eig(x.data) >= -tol


def is_interior(x: ValueObject) -> bool:
    """Strict interior test: entries > 0 (orthant) / positive definite (PSD)."""
    if x.cone.kind is ConeKind.ORTHANT:
        return bool(np.all(x.data > 0.0))
    return _min_eig(x.data) > 0.0


def cone_norm(w: ValueObject, x: ValueObject) -> float:
    """Cone linear absolute norm <w, x> of x with respect to the weight w.

    On the orthant this is the ordinary dot product; on the PSD cone the
    Frobenius inner product trace(w x).  The weight must be strictly interior
    to the (self-dual) cone and x must be a cone member, which makes the
    result nonnegative and zero exactly at x = 0.
    """
    if w.cone != x.cone:
        raise ConeMismatch(f"weight cone {w.cone} != element cone {x.cone}")
    if not is_interior(w):
        raise NotInteriorWeight("norm weight must be strictly inside the cone")
    if not in_cone(x):
        raise NotInCone("cone_norm argument lies outside its cone")
    if x.cone.kind is ConeKind.ORTHANT:
        return float(np.dot(w.data, x.data))
    return float(np.tensordot(w.data, x.data))


def _membership_data(kind: ConeKind, diff: np.ndarray, tol: float) -> bool:
    if kind is ConeKind.ORTHANT:
        return bool(np.all(diff >= -tol))
    return _min_eig(diff) >= -tol


def partial_order_leq(a: ValueObject, b: ValueObject, tol: float = MEMBERSHIP_TOL) -> Order:
    """Classify the pair (a, b) in the cone's partial order.

    Returns LEQ when b - a is in the cone, GEQ when a - b is, EQUAL when both
    differences are (a and b agree to within tol), and UNORDERED when neither
    is.  Membership uses the standard 1e-10 tolerance.
    """
    if a.cone != b.cone:
        raise ConeMismatch(f"cannot order elements of {a.cone} and {b.cone}")
    kind = a.cone.kind
    ab = _membership_data(kind, b.data - a.data, tol)  # a <= b
    ba = _membership_data(kind, a.data - b.data, tol)  # b <= a
    if ab and ba:
        return Order.EQUAL
    if ab:
        return Order.LEQ
    if ba:
        return Order.GEQ
    return Order.UNORDERED


def min_of_ordered_set(candidates: list[ValueObject]) -> tuple[int, ValueObject]:
    """Pick a minimal element of a finite candidate set.

    An element is minimal when no other candidate is strictly below it in the
    cone order.  Among several minimal elements (mutually unordered or equal)
    the lowest index wins, which keeps downstream solvers deterministic.
    """
    if not candidates:
        raise EmptySet("min_of_ordered_set needs at least one candidate")
    cone = candidates[0].cone
    for c in candidates[1:]:
        if c.cone != cone:
            raise ConeMismatch("candidates must share a cone")
    for i, ci in enumerate(candidates):
        dominated = False
        for j, cj in enumerate(candidates):
            if i == j:
                continue
            rel = partial_order_leq(cj, ci)
            if rel is Order.LEQ or (rel is Order.EQUAL and j < i):
                dominated = True
                break
        if not dominated:
            return i, ci
    # Unreachable for a finite set under a partial order, but keep a clear
    # failure mode rather than silently returning nothing.
    raise EmptySet("no minimal element found (inconsistent order data)")
