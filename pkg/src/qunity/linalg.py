"""Small dense linear-algebra toolkit for operators and superoperators.

A superoperator from an ``n``-dimensional space to an ``m``-dimensional one
is stored as a rank-4 tensor ``S[a, b, c, d] = <a| E(|c><d|) |b>``.  The
row-major vectorization ``vec(rho)[c * n + d] = rho[c, d]`` turns it into the
``m^2 x n^2`` matrix returned by :meth:`Superoperator.matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

ATOL = 1e-9


class DimensionError(ValueError):
    pass


def tensor(*ms: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices (identity 1x1 when empty)."""
    return reduce(np.kron, ms, np.ones((1, 1), dtype=complex))


def direct_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Block-diagonal embedding ``a (+) b``."""
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=complex)
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a`` after ``b``."""
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot compose {a.shape} after {b.shape}")
    return a @ b


def partial_trace(m: np.ndarray, keep_dims, trace_dims) -> np.ndarray:
    """Trace out the second tensor factor of an operator on ``keep (x) trace``."""
    k = int(np.prod(keep_dims)) if len(keep_dims) else 1
    t = int(np.prod(trace_dims)) if len(trace_dims) else 1
    if m.shape != (k * t, k * t):
        raise DimensionError(f"matrix {m.shape} does not act on a {k}x{t} product space")
    return np.einsum("xzyz->xy", m.reshape(k, t, k, t))


def kraus_check(m: np.ndarray, tol: float = ATOL) -> bool:
    """True if ``m`` is norm non-increasing (all eigenvalues of m^dag m at most 1)."""
    if m.size == 0:
        return True
    evals = np.linalg.eigvalsh(adjoint(m) @ m)
    return bool(np.all(evals <= 1.0 + tol))


def is_isometry(m: np.ndarray, tol: float = ATOL) -> bool:
    return np.allclose(adjoint(m) @ m, np.eye(m.shape[1]), atol=tol)


def basis_vector(dim: int, k: int) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=complex)
    v[k, 0] = 1.0
    return v


@dataclass
class Superoperator:
    """Linear map on operators, stored as ``S[a, b, c, d]``."""

    tensor: np.ndarray

    @property
    def dim_out(self) -> int:
        return self.tensor.shape[0]

    @property
    def dim_in(self) -> int:
        return self.tensor.shape[2]

    @classmethod
    def from_kraus(cls, *ops: np.ndarray) -> "Superoperator":
        m, n = ops[0].shape
        t = np.zeros((m, m, n, n), dtype=complex)
        for k in ops:
            t += np.einsum("ac,bd->abcd", k, np.conj(k))
        return cls(t)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, dim_out: int, dim_in: int) -> "Superoperator":
        return cls(np.asarray(mat, dtype=complex).reshape(dim_out, dim_out, dim_in, dim_in))

    def matrix(self) -> np.ndarray:
        m, n = self.dim_out, self.dim_in
        return self.tensor.reshape(m * m, n * n)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim_in, self.dim_in):
            raise DimensionError(f"density {rho.shape} does not match input dimension {self.dim_in}")
        return np.einsum("abcd,cd->ab", self.tensor, rho)

    def compose(self, inner: "Superoperator") -> "Superoperator":
        """``self`` after ``inner``."""
        if inner.dim_out != self.dim_in:
            raise DimensionError("superoperator dimensions do not compose")
        return Superoperator(np.einsum("abxy,xycd->abcd", self.tensor, inner.tensor))

    def trace_map(self) -> np.ndarray:
        """The operator ``T`` with ``tr E(rho) = tr(T rho)`` written as ``T[c, d]``."""
        return np.einsum("aacd->cd", self.tensor)

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_cd |c><d| (x) E(|c><d|)`` (input factor first)."""
        m, n = self.dim_out, self.dim_in
        return np.transpose(self.tensor, (2, 0, 3, 1)).reshape(n * m, n * m)

    def is_cp(self, tol: float = ATOL) -> bool:
        if self.tensor.size == 0:
            return True
        c = self.choi()
        return bool(np.all(np.linalg.eigvalsh((c + adjoint(c)) / 2) >= -tol))

    def is_trace_nonincreasing(self, tol: float = ATOL) -> bool:
        """Check ``tr E(rho) <= tr(rho)`` on every density via the trace map."""
        if self.tensor.size == 0:
            return True
        t = self.trace_map()
        evals = np.linalg.eigvalsh((t + adjoint(t)) / 2)
        return bool(np.all(evals <= 1.0 + tol))

    def is_trace_preserving(self, tol: float = ATOL) -> bool:
        return np.allclose(self.trace_map(), np.eye(self.dim_in), atol=tol)


def superop_apply(s: Superoperator, rho: np.ndarray) -> np.ndarray:
    return s.apply(rho)


def density(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1, 1)
    return v @ adjoint(v)


def is_density(rho: np.ndarray, tol: float = ATOL) -> bool:
    if not np.allclose(rho, adjoint(rho), atol=tol):
        return False
    if np.real(np.trace(rho)) > 1 + tol:
        return False
    return bool(np.all(np.linalg.eigvalsh((rho + adjoint(rho)) / 2) >= -tol))


def dump_matrix(m: np.ndarray) -> str:
    """JSON text: dims plus row-major ``[re, im]`` pairs rounded to 1e-12."""
    import json

    def clean(x: float) -> float:
        r = round(float(x), 12)
        return 0.0 if r == 0 else r

    entries = [[clean(z.real), clean(z.imag)] for z in np.asarray(m, dtype=complex).reshape(-1)]
    return json.dumps({"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": entries})
