"""Numeric Weyl fields: null decomposition, duals and the Bel-Robinson tensor."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .frame_core import EPS2, EPS4, EPSILON4, G, G_INV, Tensor4, contract

SYM_TOL = 1e-12
AUDIT_TOL = 1e-9

# Array axes: 0,1 horizontal, 2 = e3, 3 = e4.
E3, E4 = 2, 3
H = slice(0, 2)


class WeylError(ValueError):
    """Raised for invalid Weyl inputs or unsupported component requests."""


def _as_array(W) -> np.ndarray:
    arr = W.array if isinstance(W, Tensor4) else np.asarray(W)
    if arr.shape != (4, 4, 4, 4):
        raise WeylError(f"expected a rank-4 tensor, got shape {arr.shape}")
    return arr


def star2(v: np.ndarray) -> np.ndarray:
    """Horizontal dual of a 1-form, (*v)_a = eps_ab v_b."""
    return EPS2 @ np.asarray(v)


def left_dual(a: np.ndarray) -> np.ndarray:
    """Left dual of a 2-tensor, (*a)_ab = eps_ac a_cb."""
    return EPS2 @ np.asarray(a)


def right_dual(a: np.ndarray) -> np.ndarray:
    """Right dual of a 2-tensor, (a*)_ab = a_ac eps_cb."""
    return np.asarray(a) @ EPS2


def hat_product(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Symmetrized traceless product u_a v_b + u_b v_a - delta_ab (u.v)."""
    u, v = np.asarray(u), np.asarray(v)
    return np.outer(u, v) + np.outer(v, u) - np.eye(2) * (u @ v)


@dataclass(frozen=True)
class WeylComponents:
    alpha: np.ndarray
    beta: np.ndarray
    rho: float
    sigma: float
    betab: np.ndarray
    alphab: np.ndarray

    def __post_init__(self) -> None:
        for name in ("alpha", "alphab"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (2, 2):
                raise WeylError(f"{name} must be 2x2")
            if abs(m[0, 1] - m[1, 0]) > SYM_TOL or abs(np.trace(m)) > SYM_TOL:
                raise WeylError(f"{name} must be symmetric and traceless")
            object.__setattr__(self, name, m)
        for name in ("beta", "betab"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (2,):
                raise WeylError(f"{name} must be a 2-vector")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "sigma", float(self.sigma))

    def as_vector(self) -> np.ndarray:
        """Ten independent coordinates of the field."""
        a, ab = self.alpha, self.alphab
        return np.array([a[0, 0], a[0, 1], *self.beta, self.rho, self.sigma,
                         *self.betab, ab[0, 0], ab[0, 1]])

    @staticmethod
    def from_vector(x: Sequence[float]) -> "WeylComponents":
        x = np.asarray(x, dtype=float)
        return WeylComponents(
            alpha=np.array([[x[0], x[1]], [x[1], -x[0]]]),
            beta=x[2:4], rho=x[4], sigma=x[5], betab=x[6:8],
            alphab=np.array([[x[8], x[9]], [x[9], -x[8]]]),
        )

    @staticmethod
    def zero() -> "WeylComponents":
        return WeylComponents.from_vector(np.zeros(10))

    @staticmethod
    def random(rng: np.random.Generator) -> "WeylComponents":
        return WeylComponents.from_vector(rng.normal(size=10))

    def allclose(self, other: "WeylComponents", tol: float = 1e-10) -> bool:
        return float(np.abs(self.as_vector() - other.as_vector()).max()) < tol


def _perm_sign(p) -> float:
    return float(round(np.linalg.det(np.eye(len(p))[list(p)])))


_PERMS4 = [(p, _perm_sign(p)) for p in itertools.permutations(range(4))]


def weyl_project(T: np.ndarray) -> np.ndarray:
    """Project an arbitrary rank-4 array onto the Weyl tensors.

    Antisymmetrize both pairs, symmetrize under pair exchange, drop the totally
    antisymmetric part (first Bianchi) and subtract the metric traces exactly.
    """
    R = T - T.transpose(1, 0, 2, 3)
    R = R - R.transpose(0, 1, 3, 2)
    R = R + R.transpose(2, 3, 0, 1)
    A = sum(s * R.transpose(p) for p, s in _PERMS4)
    R = R - A / 24.0
    ric = np.einsum("ac,abcd->bd", G_INV, R)
    scal = np.einsum("bd,bd->", G_INV, ric)
    g_ric = (np.einsum("ac,bd->abcd", G, ric) - np.einsum("ad,bc->abcd", G, ric)
             - np.einsum("bc,ad->abcd", G, ric) + np.einsum("bd,ac->abcd", G, ric))
    gg = np.einsum("ac,bd->abcd", G, G) - np.einsum("ad,bc->abcd", G, G)
    return R - 0.5 * g_ric + scal / 6.0 * gg


def random_weyl(rng: np.random.Generator) -> np.ndarray:
    return weyl_project(rng.normal(size=(4, 4, 4, 4)))


def weyl_audit(W) -> dict[str, float]:
    """Residuals of the four Weyl symmetry families, relative to max |W|."""
    W = np.asarray(_as_array(W), dtype=float)
    scale = max(float(np.abs(W).max()), 1.0)
    res = {
        "pair_antisymmetry": max(np.abs(W + W.transpose(1, 0, 2, 3)).max(),
                                 np.abs(W + W.transpose(0, 1, 3, 2)).max()),
        "pair_exchange": np.abs(W - W.transpose(2, 3, 0, 1)).max(),
        "first_bianchi": np.abs(W + W.transpose(0, 2, 3, 1) + W.transpose(0, 3, 1, 2)).max(),
        "traceless": np.abs(np.einsum("ac,abcd->bd", G_INV, W)).max(),
    }
    return {k: float(v) / scale for k, v in res.items()}


def hodge_dual(W) -> Tensor4:
    """(*W)_abcd = 1/2 eps_ab^mn W_mncd."""
    if isinstance(W, Tensor4) and W.exact:
        if W.rank != 4:
            raise WeylError("hodge_dual needs rank 4")
        out = contract(EPSILON4, W, [(2, 0), (3, 1)])
        return Tensor4(out.array * Fraction(1, 2))
    arr = np.asarray(_as_array(W), dtype=float)
    return Tensor4(0.5 * np.einsum("abrs,rm,sn,mncd->abcd", EPS4, G_INV, G_INV, arr))


def decompose(W) -> WeylComponents:
    arr = np.asarray(_as_array(W), dtype=float)
    dual = hodge_dual(arr).array
    return WeylComponents(
        alpha=arr[H, E4, H, E4],
        beta=0.5 * arr[H, E4, E3, E4],
        rho=0.25 * arr[E4, E3, E4, E3],
        sigma=0.25 * dual[E4, E3, E4, E3],
        betab=0.5 * arr[H, E3, E3, E4],
        alphab=arr[H, E3, H, E3],
    )


@lru_cache(maxsize=1)
def _reconstruction_basis() -> np.ndarray:
    # Linear map coords -> tensor, fitted on random Weyl fields.
    rng = np.random.default_rng(0)
    samples = [random_weyl(rng) for _ in range(20)]
    coords = np.stack([decompose(w).as_vector() for w in samples], axis=1)
    tensors = np.stack([w.reshape(-1) for w in samples], axis=1)
    return tensors @ np.linalg.pinv(coords)


def reconstruct(c: WeylComponents) -> Tensor4:
    """Unique Weyl tensor with the given null decomposition."""
    if not isinstance(c, WeylComponents):
        raise WeylError("reconstruct takes WeylComponents")
    return Tensor4((_reconstruction_basis() @ c.as_vector()).reshape(4, 4, 4, 4))


@dataclass(frozen=True)
class BelRobinsonEval:
    components: Tensor4

    def symmetry_residual(self) -> float:
        q = self.components.array
        return float(max(np.abs(q.transpose(p) - q).max() for p, _ in _PERMS4))

    def trace_residual(self) -> float:
        q = self.components.array
        return float(np.abs(np.einsum("ab,abcd->cd", G_INV, q)).max())


def bel_robinson(W, tol: float = AUDIT_TOL) -> BelRobinsonEval:
    """Q_abcd = W_ambn W_c^m_d^n + *W_ambn *W_c^m_d^n by brute force."""
    arr = np.asarray(_as_array(W), dtype=float)
    audit = weyl_audit(arr)
    bad = {k: v for k, v in audit.items() if v > tol}
    if bad:
        raise WeylError(f"not a Weyl field: {bad}")
    dual = hodge_dual(arr).array
    q = (np.einsum("amcn,bpdq,mp,nq->abcd", arr, arr, G_INV, G_INV)
         + np.einsum("amcn,bpdq,mp,nq->abcd", dual, dual, G_INV, G_INV))
    return BelRobinsonEval(Tensor4(q))


# Which component blocks each closed form is built from, keyed by
# (#horizontal, #e4, #e3).  Scanned by the vanishing certificates.
CLOSED_FORM_SYMBOLS: dict[tuple[int, int, int], frozenset[str]] = {
    (0, 4, 0): frozenset({"alpha"}),
    (0, 0, 4): frozenset({"alphab"}),
    (0, 3, 1): frozenset({"beta"}),
    (0, 1, 3): frozenset({"betab"}),
    (0, 2, 2): frozenset({"rho", "sigma"}),
    (1, 3, 0): frozenset({"alpha", "beta"}),
    (1, 0, 3): frozenset({"alphab", "betab"}),
    (1, 2, 1): frozenset({"rho", "sigma", "beta"}),
    (1, 1, 2): frozenset({"rho", "sigma", "betab"}),
    (2, 2, 0): frozenset({"beta", "rho", "sigma", "alpha"}),
    (2, 0, 2): frozenset({"betab", "rho", "sigma", "alphab"}),
    (2, 1, 1): frozenset({"beta", "betab", "rho", "sigma"}),
}


def bel_robinson_closed_form(c: WeylComponents, idx: Sequence[int]) -> float:
    """Null components of Q from the component blocks (any index order)."""
    if len(idx) != 4 or any(i not in (1, 2, 3, 4) for i in idx):
        raise WeylError(f"need four frame indices, got {tuple(idx)}")
    counts = Counter(idx)
    hor = sorted(i - 1 for i in idx if i in (1, 2))
    key = (len(hor), counts[4], counts[3])
    if key not in CLOSED_FORM_SYMBOLS:
        raise WeylError(f"unsupported index pattern {tuple(idx)}: at most two horizontal slots")
    al, be, rho, sig, bb, ab = c.alpha, c.beta, c.rho, c.sigma, c.betab, c.alphab
    energy = rho**2 + sig**2
    if key[0] == 0:
        return float({
            (0, 4, 0): 2 * np.sum(al**2),
            (0, 0, 4): 2 * np.sum(ab**2),
            (0, 3, 1): 4 * be @ be,
            (0, 1, 3): 4 * bb @ bb,
            (0, 2, 2): 4 * energy,
        }[key])
    if key[0] == 1:
        a = hor[0]
        vec = {
            (1, 3, 0): 4 * al @ be,
            (1, 0, 3): -4 * ab @ bb,
            (1, 2, 1): 4 * rho * be - 4 * sig * star2(be),
            (1, 1, 2): -4 * rho * bb - 4 * sig * star2(bb),
        }[key]
        return float(vec[a])
    a, b = hor
    mat = {
        (2, 2, 0): 2 * (be @ be) * np.eye(2) + 2 * rho * al - 2 * sig * left_dual(al),
        (2, 0, 2): 2 * (bb @ bb) * np.eye(2) + 2 * rho * ab + 2 * sig * left_dual(ab),
        (2, 1, 1): -2 * hat_product(be, bb) + 2 * energy * np.eye(2),
    }[key]
    return float(mat[a, b])


def tabulated_indices() -> list[tuple[int, int, int, int]]:
    """All index 4-tuples covered by the closed forms."""
    out = []
    for idx in itertools.product((1, 2, 3, 4), repeat=4):
        if sum(i in (1, 2) for i in idx) <= 2:
            out.append(idx)
    return out


def _is_exact(x) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in np.asarray(x, dtype=object).ravel())


_EPS2_EXACT = np.array([[Fraction(0), Fraction(1)], [Fraction(-1), Fraction(0)]], dtype=object)


def j222_cancellation(alphab_d3, betastar_dc) -> tuple:
    """Return (T, T*) for the paired J222 contractions.

    T  = alphab(D3 R)_ab eps_ca *beta(Dc R)_b
    T* = same contraction built from the dual field, using
         alphab(*W) = -*alphab(W) and beta(*W) = *beta(W).
    Rational inputs give Fractions and T + T* == 0 exactly.
    """
    exact = _is_exact(alphab_d3) and _is_exact(betastar_dc)
    dtype = object if exact else float
    A = np.asarray(alphab_d3, dtype=dtype)
    B = np.asarray(betastar_dc, dtype=dtype)
    if A.shape != (2, 2) or B.shape != (2, 2):
        raise WeylError("inputs must be 2x2 arrays")
    if A[0, 1] != A[1, 0] or A[0, 0] + A[1, 1] != 0:
        if exact or abs(A[0, 1] - A[1, 0]) > SYM_TOL or abs(A[0, 0] + A[1, 1]) > SYM_TOL:
            raise WeylError("alphab_d3 must be symmetric and traceless")
    eps = _EPS2_EXACT if exact else EPS2

    def pairing(a, b):
        return sum(a[i, j] * eps[k, i] * b[k, j]
                   for i in range(2) for j in range(2) for k in range(2))

    A_dual = -(eps.dot(A))
    # beta(D_c *R) = *beta(D_c R), so its dual is eps applied to B_c.
    B_dual = np.array([eps.dot(B[k]) for k in range(2)], dtype=dtype)
    return pairing(A, B), pairing(A_dual, B_dual)


def q_cross_term(first: WeylComponents, second: WeylComponents) -> np.ndarray:
    """Bilinear part of Q between two fields, by polarization."""
    w1, w2 = reconstruct(first).array, reconstruct(second).array
    q = lambda w: bel_robinson(w).components.array  # noqa: E731
    return q(w1 + w2) - q(w1) - q(w2)
