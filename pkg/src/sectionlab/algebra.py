"""Exterior algebra on R^3 / R^4 and homogeneous polynomial vector fields.

Bivectors in R^3 are stored in the basis ``(e2^e3, e3^e1, e1^e2)`` so that the
wedge of two vectors has the same components as their cross product.
Polynomial fields are stored densely: one row of coefficients per output
component, one column per monomial, monomials of a fixed total degree in
graded lexicographic order (``x1^d`` first).
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import NotDivisible

__all__ = [
    "wedge", "phi_iso", "hodge_normal", "skew", "monomials",
    "PolyVectorField", "linear_form", "linear_field", "constant_field",
    "poly_mul", "poly_cross", "divide_by_linear_form", "symmetrize",
]


def wedge(u, v) -> np.ndarray:
    """Wedge product of two vectors of R^3 in the cofactor basis."""
    return np.cross(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def phi_iso(sigma) -> np.ndarray:
    """Covector ``omega(u, v, .)`` attached to ``sigma = u^v`` with omega = det.

    With bivectors in the cofactor basis and covectors in the dual basis the
    isomorphism is the identity on components: ``det(u, v, w) = (u x v) . w``.
    """
    return np.array(sigma, dtype=float, copy=True)


def hodge_normal(vectors) -> np.ndarray:
    """Vector ``n`` with ``n . w = det[v_1, ..., v_{d-1}, w]`` for all ``w``.

    ``vectors`` has shape ``(d, d-1)`` (columns are the v_i).  This identifies
    the (d-1)-vector ``v_1 ^ ... ^ v_{d-1}`` with a vector of R^d.
    """
    a = np.asarray(vectors, dtype=float)
    d = a.shape[0]
    n = np.empty(d)
    for i in range(d):
        m = np.column_stack([a, np.eye(d)[:, i]])
        n[i] = np.linalg.det(m)
    return n


def skew(w) -> np.ndarray:
    """Matrix of ``x -> w x x`` in R^3."""
    w1, w2, w3 = np.asarray(w, dtype=float)
    return np.array([[0.0, -w3, w2], [w3, 0.0, -w1], [-w2, w1, 0.0]])


def symmetrize(q) -> np.ndarray:
    """Return the symmetric part of a square matrix (exactly symmetric)."""
    q = np.asarray(q, dtype=float)
    s = 0.5 * (q + q.T)
    return s


# --------------------------------------------------------------------------
# monomial bookkeeping

@lru_cache(maxsize=None)
def monomials(nvars: int, degree: int) -> tuple:
    """Exponent tuples of total ``degree`` in ``nvars`` variables, graded lex."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=nvars)
            if sum(e) == degree]
    exps.sort(reverse=True)
    return tuple(exps)


@lru_cache(maxsize=None)
def _exponents(nvars: int, degree: int) -> np.ndarray:
    e = np.array(monomials(nvars, degree), dtype=int).reshape(-1, nvars)
    e.setflags(write=False)
    return e


@lru_cache(maxsize=None)
def _index(nvars: int, degree: int) -> dict:
    return {e: i for i, e in enumerate(monomials(nvars, degree))}


@lru_cache(maxsize=None)
def _mult_table(nvars: int, d1: int, d2: int) -> np.ndarray:
    """0/1 matrix mapping flattened outer products of coefficients to products."""
    m1, m2 = monomials(nvars, d1), monomials(nvars, d2)
    idx = _index(nvars, d1 + d2)
    t = np.zeros((len(m1) * len(m2), len(idx)))
    for i, a in enumerate(m1):
        for j, b in enumerate(m2):
            t[i * len(m2) + j, idx[tuple(x + y for x, y in zip(a, b))]] = 1.0
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def _diff_table(nvars: int, degree: int, k: int) -> np.ndarray:
    """Matrix of d/dx_k from degree ``degree`` to ``degree - 1`` monomials."""
    src = monomials(nvars, degree)
    idx = _index(nvars, degree - 1)
    t = np.zeros((len(src), len(idx)))
    for i, a in enumerate(src):
        if a[k] > 0:
            b = list(a)
            b[k] -= 1
            t[i, idx[tuple(b)]] = a[k]
    t.setflags(write=False)
    return t


class PolyVectorField:
    """Homogeneous polynomial map R^nvars -> R^n_out of a fixed degree.

    Parameters
    ----------
    nvars : int
        Number of input variables.
    degree : int
        Total degree of every component.
    coeffs : array_like, shape (n_out, n_monomials)
        Row ``a`` holds the coefficients of output component ``a`` in the
        order returned by :func:`monomials`.
    """

    __slots__ = ("nvars", "degree", "coeffs")

    def __init__(self, nvars: int, degree: int, coeffs):
        c = np.array(coeffs, dtype=float)
        nm = len(monomials(nvars, degree))
        if c.ndim == 1:
            c = c[None, :]
        if c.shape[1] != nm:
            raise ValueError(f"expected {nm} monomials, got {c.shape[1]}")
        c.setflags(write=False)
        self.nvars = int(nvars)
        self.degree = int(degree)
        self.coeffs = c

    # -- construction helpers
    @classmethod
    def zero(cls, nvars, degree, n_out):
        return cls(nvars, degree, np.zeros((n_out, len(monomials(nvars, degree)))))

    @classmethod
    def stack(cls, fields):
        fields = list(fields)
        f0 = fields[0]
        for f in fields:
            if (f.nvars, f.degree) != (f0.nvars, f0.degree):
                raise ValueError("cannot stack fields of different shape")
        return cls(f0.nvars, f0.degree, np.vstack([f.coeffs for f in fields]))

    @classmethod
    def fit(cls, func, nvars, degree, n_out, seed=0):
        """Recover coefficients of a known polynomial map from samples."""
        rng = np.random.default_rng(seed)
        e = _exponents(nvars, degree)
        x = rng.standard_normal((4 * len(e), nvars))
        a = np.prod(x[:, None, :] ** e[None], axis=-1)
        y = np.asarray(func(x), dtype=float).reshape(len(x), n_out)
        c, *_ = np.linalg.lstsq(a, y, rcond=None)
        return cls(nvars, degree, c.T)

    @property
    def n_out(self) -> int:
        return self.coeffs.shape[0]

    @property
    def exponents(self) -> np.ndarray:
        return _exponents(self.nvars, self.degree)

    # -- evaluation
    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mono = np.prod(x[..., None, :] ** self.exponents, axis=-1)
        return mono @ self.coeffs.T

    def derivative(self, k: int) -> "PolyVectorField":
        """Partial derivative with respect to variable ``k``."""
        if self.degree == 0:
            return PolyVectorField(self.nvars, 0, np.zeros((self.n_out, 1)))
        t = _diff_table(self.nvars, self.degree, k)
        return PolyVectorField(self.nvars, self.degree - 1, self.coeffs @ t)

    def jacobian(self, x) -> np.ndarray:
        """Jacobian matrix, shape ``(..., n_out, nvars)``."""
        cols = [self.derivative(k)(x) for k in range(self.nvars)]
        return np.stack(cols, axis=-1)

    # -- arithmetic
    def _check(self, other):
        if (self.nvars, self.degree, self.n_out) != (other.nvars, other.degree, other.n_out):
            raise ValueError("incompatible polynomial fields")

    def __add__(self, other):
        self._check(other)
        return PolyVectorField(self.nvars, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return PolyVectorField(self.nvars, self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return PolyVectorField(self.nvars, self.degree, -self.coeffs)

    def __mul__(self, s):
        if isinstance(s, PolyVectorField):
            return poly_mul(s, self)
        return PolyVectorField(self.nvars, self.degree, float(s) * self.coeffs)

    __rmul__ = __mul__

    def component(self, a: int) -> "PolyVectorField":
        return PolyVectorField(self.nvars, self.degree, self.coeffs[a:a + 1])

    def apply_matrix(self, m) -> "PolyVectorField":
        """Post-compose with a constant matrix: ``x -> M F(x)``."""
        m = np.asarray(m, dtype=float)
        return PolyVectorField(self.nvars, self.degree, m @ self.coeffs)

    def substitute(self, m) -> "PolyVectorField":
        """Pre-compose with a linear change of variables: ``x -> F(M x)``."""
        m = np.asarray(m, dtype=float)
        n = self.nvars
        rows = [PolyVectorField(n, 1, m[i]) for i in range(n)]
        images = []
        for e in monomials(n, self.degree):
            p = PolyVectorField(n, 0, [1.0])
            for i, k in enumerate(e):
                for _ in range(k):
                    p = poly_mul(p, rows[i])
            images.append(p.coeffs[0])
        s = np.array(images).reshape(len(images), -1)
        return PolyVectorField(n, self.degree, self.coeffs @ s)

    def max_abs_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs_coeff() <= tol

    def __repr__(self):
        return (f"PolyVectorField(nvars={self.nvars}, degree={self.degree}, "
                f"n_out={self.n_out})")


def linear_form(ell) -> PolyVectorField:
    """Scalar degree-1 polynomial with the given covector coefficients."""
    ell = np.asarray(ell, dtype=float)
    return PolyVectorField(ell.size, 1, ell[None, :])


def linear_field(m) -> PolyVectorField:
    """Degree-1 field ``x -> M x``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return PolyVectorField(m.shape[1], 1, m)


def constant_field(v, nvars: int) -> PolyVectorField:
    v = np.asarray(v, dtype=float).reshape(-1, 1)
    return PolyVectorField(nvars, 0, v)


def poly_mul(p: PolyVectorField, q: PolyVectorField) -> PolyVectorField:
    """Product of a scalar polynomial ``p`` (one output) with a field ``q``."""
    if p.nvars != q.nvars:
        raise ValueError("variable count mismatch")
    if p.n_out != 1 and q.n_out != 1:
        raise ValueError("one factor must be scalar")
    if p.n_out != 1:
        p, q = q, p
    t = _mult_table(p.nvars, p.degree, q.degree)
    outer = p.coeffs[0][None, :, None] * q.coeffs[:, None, :]
    c = outer.reshape(q.n_out, -1) @ t
    return PolyVectorField(p.nvars, p.degree + q.degree, c)


def poly_cross(p: PolyVectorField, q: PolyVectorField) -> PolyVectorField:
    """Pointwise cross product of two R^3-valued fields."""
    a = [p.component(i) for i in range(3)]
    b = [q.component(i) for i in range(3)]
    comps = [
        poly_mul(a[1], b[2]) - poly_mul(a[2], b[1]),
        poly_mul(a[2], b[0]) - poly_mul(a[0], b[2]),
        poly_mul(a[0], b[1]) - poly_mul(a[1], b[0]),
    ]
    return PolyVectorField.stack(comps)


def poly_dot(p: PolyVectorField, q: PolyVectorField) -> PolyVectorField:
    """Pointwise inner product of two fields with the same number of outputs."""
    out = None
    for i in range(p.n_out):
        term = poly_mul(p.component(i), q.component(i))
        out = term if out is None else out + term
    return out


def _adapted_basis(ell: np.ndarray) -> np.ndarray:
    """Matrix T with ``ell @ T = e_1``: first column ell/|ell|^2, rest span ker ell."""
    n2 = float(ell @ ell)
    _, _, vt = np.linalg.svd(ell[None, :])
    rest = vt[1:].T
    return np.column_stack([ell / n2, rest])


def divide_by_linear_form(field: PolyVectorField, ell, tol: float = 1e-10) -> PolyVectorField:
    """Exact division of a polynomial field by a linear form.

    The variables are changed so that ``ell`` becomes the first coordinate,
    the coefficients are shifted down one power of that coordinate, and the
    result is transformed back.

    Parameters
    ----------
    field : PolyVectorField
        Field of degree >= 1.
    ell : array_like
        Nonzero covector.
    tol : float
        Largest admissible remainder coefficient, relative to the largest
        coefficient of ``field`` (absolute when the field is small).

    Returns
    -------
    PolyVectorField
        Quotient of degree ``field.degree - 1``.

    Raises
    ------
    NotDivisible
        If a remainder coefficient exceeds the tolerance.
    """
    ell = np.asarray(ell, dtype=float)
    if field.degree < 1:
        raise ValueError("cannot divide a constant field")
    if not np.any(ell):
        raise ValueError("linear form must be nonzero")
    n = field.nvars
    t = _adapted_basis(ell)
    g = field.substitute(t)
    src = monomials(n, field.degree)
    idx = _index(n, field.degree - 1)
    quo = np.zeros((field.n_out, len(idx)))
    rem = 0.0
    for i, e in enumerate(src):
        if e[0] > 0:
            quo[:, idx[(e[0] - 1,) + e[1:]]] = g.coeffs[:, i]
        else:
            rem = max(rem, float(np.max(np.abs(g.coeffs[:, i]))))
    scale = max(1.0, field.max_abs_coeff())
    if rem > tol * scale:
        raise NotDivisible(f"remainder coefficient {rem:.3e} exceeds {tol * scale:.1e}")
    q = PolyVectorField(n, field.degree - 1, quo)
    return q.substitute(np.linalg.inv(t))
