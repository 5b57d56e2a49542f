"""Dense linear-algebra helpers and seeded random streams."""

import zlib

import numpy as np

from .errors import DimensionError, InvalidMatrix, NotPositiveDefinite

SYM_TOL = 1e-12
EIG_CLAMP = 1e-10


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float array."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return arr


def check_spd(M, name="matrix"):
    """Validate a symmetric PSD matrix and return it as a float array."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    scale = max(np.linalg.norm(M, 2), 1e-300)
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_TOL * scale:
        raise InvalidMatrix(f"{name} is not symmetric")
    return 0.5 * (M + M.T)


def _eig(M, name):
    M = check_spd(M, name)
    w, V = np.linalg.eigh(M)
    top = max(np.max(np.abs(w), initial=0.0), 1e-300)
    if w.size and w[0] < -EIG_CLAMP * top:
        raise InvalidMatrix(f"{name} has a negative eigenvalue {w[0]:.3g}")
    return np.clip(w, 0.0, None), V


def psd_sqrt(M):
    """Symmetric square root of a PSD matrix via its eigendecomposition.

    Eigenvalues within round-off of zero are clamped before rooting.
    """
    w, V = _eig(M, "M")
    S = (V * np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T)


def cholesky(M):
    """Lower Cholesky factor of a strictly positive definite matrix."""
    M = check_spd(M, "M")
    w = np.linalg.eigvalsh(M)
    if w.size == 0 or w[0] <= 1e-12 * max(abs(w[-1]), 1e-300):
        raise NotPositiveDefinite("matrix is not positive definite")
    return np.linalg.cholesky(M)


def mahalanobis_matrix_norm(A, Sigma):
    """sqrt(trace(A Sigma A^T)), the Frobenius norm of A Sigma^{1/2}."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape[0] != Sigma.shape[1] or A.shape[1] != Sigma.shape[0]:
        raise DimensionError(
            f"cannot evaluate norm of {A.shape} under {Sigma.shape}")
    val = np.einsum("ij,jk,ik->", A, Sigma, A)
    return float(np.sqrt(max(val, 0.0)))


def toeplitz_cov(p, base=2.0):
    """Covariance with entries base**(-|i - j|)."""
    idx = np.arange(p)
    return float(base) ** (-np.abs(idx[:, None] - idx[None, :]).astype(float))


def stable_key(value):
    """Map ints and strings to a reproducible 32-bit integer."""
    if isinstance(value, (int, np.integer)):
        return int(value) & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(value).encode("utf-8"))


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Wraps a PCG64 generator seeded from ``SeedSequence(seed, spawn_key)``.
    Generator methods (``normal``, ``uniform``, ...) are available directly.
    Streams are single-owner; use :meth:`derive` to hand out independent ones.
    """

    def __init__(self, seed=0, stream_id=0, _key=None):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._key = tuple(_key) if _key is not None else (self.stream_id,)
        ss = np.random.SeedSequence(self.seed, spawn_key=self._key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def derive(self, *keys):
        """Child stream determined by this stream's key and ``keys``."""
        key = self._key + tuple(stable_key(k) for k in keys)
        return RngStream(self.seed, self.stream_id, _key=key)

    def __getattr__(self, name):
        return getattr(self.generator, name)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self._key})"


def as_rng(rng):
    """Accept an RngStream, a numpy Generator, an int seed or None."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))
