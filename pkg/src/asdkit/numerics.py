"""Dense float64 linear algebra and a deterministic, splittable RNG.

Everything downstream (encoders, learners, clusterers) builds on the two
types defined here: an immutable row-major :class:`Matrix` and a
counter-based :class:`SeededRng` whose streams are reproducible bit-for-bit
across platforms and can be split into independent child streams.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Matrix",
    "SeededRng",
    "mat_mul",
    "sym_eig",
    "cholesky",
    "rng_shuffle",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # golden-ratio increment of splitmix64


class Matrix:
    """Immutable dense float64 matrix, row-major storage.

    Thin wrapper over a read-only numpy array; `a` is the backing ndarray.
    All values must be finite (missing data is resolved before numeric code
    ever sees it).
    """

    __slots__ = ("a",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"matrix needs 2 dims, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "a", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Matrix is immutable")

    @property
    def rows(self) -> int:
        return self.a.shape[0]

    @property
    def cols(self) -> int:
        return self.a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(np.zeros((rows, cols)))

    def transpose(self) -> "Matrix":
        return Matrix(self.a.T)

    def row(self, i: int) -> np.ndarray:
        return self.a[i]

    def __eq__(self, other):
        return isinstance(other, Matrix) and np.array_equal(self.a, other.a)

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols})"


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product; dims rows(a) x cols(b)."""
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return Matrix(a.a @ b.a)


def _jacobi_eig(a: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations on a symmetric matrix.

    Robust and simple; O(n^3) per sweep, intended for the moderate sizes the
    pipeline produces.  Returns (eigenvalues ascending, eigenvectors as
    columns).
    """
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    # convergence scale: the off-diagonal norm floor grows with n at the
    # unit roundoff, so the stop threshold must too
    scale = max(1.0, float(np.abs(A).max()))
    stop = 1e-13 * n * scale
    skip = 1e-16 * scale
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= stop:
            break
        for p in range(n - 1):
            row_p = A[p]
            for q in range(p + 1, n):
                apq = row_p[q]
                if abs(apq) <= skip:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p and q
                Ap = A[p].copy()
                Aq = A[q].copy()
                A[p] = c * Ap - s * Aq
                A[q] = s * Ap + c * Aq
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        raise RuntimeError("jacobi eigensolver did not converge")
    evals = A.diagonal().copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], V[:, order]


# Above this size the pure rotation loop is impractically slow; LAPACK's
# symmetric solver honours the same contract (see README on numerics).
_JACOBI_LIMIT = 96


def sym_eig(a: Matrix, sym_tol: float = 1e-9, method: str = "auto") -> tuple[np.ndarray, Matrix]:
    """Eigendecomposition of a symmetric matrix.

    Returns eigenvalues in ascending order and the matching orthonormal
    eigenvectors as matrix columns.  `method` is one of "auto", "jacobi",
    "lapack".
    """
    if a.rows != a.cols:
        raise ValueError("sym_eig needs a square matrix")
    arr = a.a
    asym = float(np.abs(arr - arr.T).max()) if a.rows else 0.0
    scale = max(1.0, float(np.abs(arr).max())) if a.rows else 1.0
    if asym > sym_tol * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:g})")
    sym = 0.5 * (arr + arr.T)
    if method == "auto":
        method = "jacobi" if a.rows <= _JACOBI_LIMIT else "lapack"
    if method == "jacobi":
        evals, evecs = _jacobi_eig(sym)
    elif method == "lapack":
        evals, evecs = np.linalg.eigh(sym)
    else:
        raise ValueError(f"unknown method {method!r}")
    return evals, Matrix(evecs)


def cholesky(a: Matrix) -> Matrix:
    """Lower-triangular L with L L^T = A for symmetric positive definite A."""
    if a.rows != a.cols:
        raise ValueError("cholesky needs a square matrix")
    n = a.rows
    A = a.a
    asym = float(np.abs(A - A.T).max()) if n else 0.0
    if asym > 1e-9 * max(1.0, float(np.abs(A).max()) if n else 1.0):
        raise ValueError("cholesky needs a symmetric matrix")
    L = np.zeros((n, n))
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0:
            raise ValueError("matrix is not positive definite")
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return Matrix(L)


def _mix64(z: int) -> int:
    """splitmix64 finalizer: bijective 64-bit mixing."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


class SeededRng:
    """Counter-based splitmix64 generator.

    Draw i of stream with seed s is ``mix64(s + (i+1)*GAMMA)``; the whole
    stream is a pure function of (seed, counter), so identical seeds give
    identical draws on every platform, and child streams obtained via
    :meth:`split` are independent of the parent's position.
    """

    __slots__ = ("seed", "_counter", "_spare_normal")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._counter = 0
        self._spare_normal = None

    def next_u64(self) -> int:
        self._counter += 1
        return _mix64((self.seed + self._counter * _GAMMA) & _MASK64)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform_array(self, n: int) -> np.ndarray:
        """Vectorised uniforms; consumes the same draws as n uniform() calls."""
        base = np.uint64((self.seed + self._counter * _GAMMA) & _MASK64)
        idx = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = base + idx * np.uint64(_GAMMA)
            z ^= z >> np.uint64(30)
            z *= np.uint64(0xBF58476D1CE4E5B9)
            z ^= z >> np.uint64(27)
            z *= np.uint64(0x94D049BB133111EB)
            z ^= z >> np.uint64(31)
        self._counter += n
        return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def randint(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def normal(self) -> float:
        """Standard normal via Box-Muller (caches the spare draw)."""
        if self._spare_normal is not None:
            v = self._spare_normal
            self._spare_normal = None
            return v
        u1 = max(self.uniform(), 2.0 ** -53)
        u2 = self.uniform()
        r = np.sqrt(-2.0 * np.log(u1))
        self._spare_normal = float(r * np.sin(2.0 * np.pi * u2))
        return float(r * np.cos(2.0 * np.pi * u2))

    def normal_array(self, n: int) -> np.ndarray:
        u1 = np.maximum(self.uniform_array(n), 2.0 ** -53)
        u2 = self.uniform_array(n)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def shuffle(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of 0..n-1."""
        if n < 1:
            raise ValueError("shuffle needs n >= 1")
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from 0..n-1 (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        pool = np.arange(n)
        for i in range(k):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()

    def split(self, index: int) -> "SeededRng":
        """Independent child stream; a pure function of (seed, index)."""
        child_seed = _mix64(self.seed ^ _mix64((index + 1) * _GAMMA))
        return SeededRng(child_seed)


def rng_shuffle(rng: SeededRng, n: int) -> np.ndarray:
    """Permutation of 0..n-1, deterministic given the generator state."""
    return rng.shuffle(n)
