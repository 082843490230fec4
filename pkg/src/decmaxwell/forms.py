"""Discrete differential forms (cochains) and the DEC operators.

A primal k-form stores one value per k-cell.  A dual k-form is evaluated
on dual k-cells and stored indexed by the primal (2-k)-cell it pairs with
(face circumcenters carry dual 0-forms, edges dual 1-forms, vertices dual
2-forms), so no second indexing scheme is needed.

The exterior derivative is the transpose of the signed incidence matrix
of k-cells on (k+1)-cells; the Hodge star is the diagonal scaling by the
ratio of dual to primal measures.  Incidence is applied as sparse signed
sums, never densified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DualMesh, SimplicialSurface

PRIMAL = "primal"
DUAL = "dual"


class FormError(ValueError):
    """Degree/placement mismatch or invalid cochain data."""


@dataclass
class DiscreteForm:
    """Cochain: ``values[i]`` is the evaluation on cell ``i``.

    ``degree`` is the form's own degree; for dual forms the indexing cell
    set is the primal (2-degree)-cells.
    """

    degree: int
    placement: str
    values: np.ndarray

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise FormError(f"degree must be 0, 1 or 2, got {self.degree}")
        if self.placement not in (PRIMAL, DUAL):
            raise FormError(f"placement must be 'primal' or 'dual'")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise FormError("cochain values must be a 1-d array")
        if not np.isfinite(self.values).all():
            raise FormError("cochain values must be finite")

    def copy(self) -> "DiscreteForm":
        return DiscreteForm(self.degree, self.placement, self.values.copy())


def cell_count(surface: SimplicialSurface, degree: int, placement: str = PRIMAL) -> int:
    """Number of cells indexing a form of the given degree/placement."""
    primal_counts = (surface.n_vertices, surface.n_edges, surface.n_faces)
    if placement == PRIMAL:
        return primal_counts[degree]
    return primal_counts[2 - degree]


def zeros(surface: SimplicialSurface, degree: int, placement: str = PRIMAL) -> DiscreteForm:
    return DiscreteForm(degree, placement, np.zeros(cell_count(surface, degree, placement)))


def _check(surface, form, degree=None, placement=None):
    if degree is not None and form.degree != degree:
        raise FormError(f"expected degree {degree}, got {form.degree}")
    if placement is not None and form.placement != placement:
        raise FormError(f"expected a {placement} form")
    if len(form.values) != cell_count(surface, form.degree, form.placement):
        raise FormError("form does not match the mesh (wrong cell count)")


def exterior_derivative(surface: SimplicialSurface, form: DiscreteForm) -> DiscreteForm:
    """d on primal forms: signed sum over the boundary cells of each cell."""
    _check(surface, form, placement=PRIMAL)
    if form.degree == 0:
        return DiscreteForm(1, PRIMAL, surface.d0 @ form.values)
    if form.degree == 1:
        return DiscreteForm(2, PRIMAL, surface.d1 @ form.values)
    raise FormError("primal exterior derivative needs degree 0 or 1")


def exterior_derivative_dual(surface: SimplicialSurface, form: DiscreteForm) -> DiscreteForm:
    """d on dual forms: the transposed primal incidence (adjoint coboundary).

    Dual 0-forms (face-indexed) map to dual 1-forms (edge-indexed), dual
    1-forms to dual 2-forms (vertex-indexed).  Applying it twice is the
    zero map because the incidence matrices compose to zero exactly.
    """
    _check(surface, form, placement=DUAL)
    if form.degree == 0:
        return DiscreteForm(1, DUAL, surface.boundary2 @ form.values)
    if form.degree == 1:
        return DiscreteForm(2, DUAL, surface.boundary1 @ form.values)
    raise FormError("dual exterior derivative needs degree 0 or 1")


def hodge_weights(dual: DualMesh, degree: int) -> np.ndarray:
    """Diagonal Hodge factors |dual cell| / |primal cell| for primal k-forms."""
    if degree == 0:
        return dual.dual_vertex_areas
    if degree == 1:
        return dual.dual_edge_lengths / dual.edge_lengths
    if degree == 2:
        return 1.0 / dual.face_areas
    raise FormError(f"no Hodge weights for degree {degree}")


def hodge(form: DiscreteForm, dual: DualMesh) -> DiscreteForm:
    """Diagonal Hodge star: primal k-form -> dual (2-k)-form."""
    if form.placement != PRIMAL:
        raise FormError("hodge maps primal forms; use hodge_inverse for dual")
    w = hodge_weights(dual, form.degree)
    if len(w) != len(form.values):
        raise FormError("form does not match the dual mesh")
    return DiscreteForm(2 - form.degree, DUAL, form.values * w)


def hodge_inverse(form: DiscreteForm, dual: DualMesh) -> DiscreteForm:
    """Exact inverse scaling of :func:`hodge` (dual -> primal)."""
    if form.placement != DUAL:
        raise FormError("hodge_inverse maps dual forms")
    primal_degree = 2 - form.degree
    w = hodge_weights(dual, primal_degree)
    if len(w) != len(form.values):
        raise FormError("form does not match the dual mesh")
    if np.any(w == 0.0):
        raise FormError("zero measure: Hodge star is not invertible")
    return DiscreteForm(primal_degree, PRIMAL, form.values / w)


def codifferential(surface: SimplicialSurface, dual: DualMesh,
                   form: DiscreteForm) -> DiscreteForm:
    """delta = hodge_inverse . d_dual . hodge, lowering the degree by one."""
    _check(surface, form, placement=PRIMAL)
    if form.degree not in (1, 2):
        raise FormError("codifferential needs a primal 1- or 2-form")
    return hodge_inverse(exterior_derivative_dual(surface, hodge(form, dual)), dual)


def inner_product(surface: SimplicialSurface, dual: DualMesh,
                  a: DiscreteForm, b: DiscreteForm) -> float:
    """Hodge inner product of two primal k-forms (diagonal weights)."""
    _check(surface, a, placement=PRIMAL)
    _check(surface, b, placement=PRIMAL)
    if a.degree != b.degree:
        raise FormError("inner product needs matching degrees")
    w = hodge_weights(dual, a.degree)
    return float(np.sum(a.values * b.values * w))
