"""Matrix representations of ND maps in the boundary Fourier basis.

Indices run over ``n in {-N, ..., -1, 1, ..., N}`` in that order, so a
``2N x 2N`` array has the negative-frequency block in its upper-left corner.
Matrices coming from real conductivities are centrohermitian,
``A[n, m] = conj(A[-n, -m])``, which in array form is
``A == conj(A[::-1, ::-1])``. Ball inclusions additionally give block-diagonal
matrices, so only the positive block (a :class:`HalfBlock`) is ever assembled.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import gmpy2
import numpy as np

from . import cache
from .mobius import Ball, MobiusParams, ball_to_concentric

__all__ = [
    "SpectralMatrix",
    "HalfBlock",
    "TruncationPlan",
    "TruncationWarning",
    "fourier_indices",
    "concentric_eigenvalues",
    "background_nd",
    "HCoefficients",
    "h_polynomial_coefficients",
    "assemble_h_plus",
    "assemble_h_quadrature",
    "involution_residual",
    "nd_ball",
    "frechet_ball",
    "frechet_plus",
    "nd_plus_from_strip",
    "expand_half",
    "centro_reflect",
    "write_matrix",
    "write_matrix_csv",
    "read_matrix",
]

logger = logging.getLogger(__name__)

# guard bits kept below the largest polynomial term when summing in extended precision
GUARD_BITS = 64
INVOLUTION_TOL = 1e-8


class TruncationWarning(UserWarning):
    """The assembly order is too small for the requested accuracy."""


def fourier_indices(order: int) -> np.ndarray:
    """Index vector ``[-N, ..., -1, 1, ..., N]``."""
    return np.concatenate([np.arange(-order, 0), np.arange(1, order + 1)])


def centro_reflect(M: np.ndarray) -> np.ndarray:
    """``J conj(M) J``; the exchange matrix is applied by reversing both axes."""
    return np.conj(np.asarray(M)[..., ::-1, ::-1])


@dataclass
class SpectralMatrix:
    """Complex ``2N x 2N`` matrix in the Fourier basis."""

    entries: np.ndarray
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = self.entries.shape
        if len(n) != 2 or n[0] != n[1] or n[0] % 2:
            raise ValueError(f"expected an even square matrix, got shape {n}")

    @property
    def order(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def indices(self) -> np.ndarray:
        return fourier_indices(self.order)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __getitem__(self, nm):
        n, m = nm
        return self.entries[self._pos(n), self._pos(m)]

    def _pos(self, n: int) -> int:
        N = self.order
        if n == 0 or abs(n) > N:
            raise IndexError(f"Fourier index {n} outside +-1..{N}")
        return n + N if n < 0 else n + N - 1

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def centrohermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - centro_reflect(self.entries)), initial=0.0))

    def off_block_max(self) -> float:
        N = self.order
        E = self.entries
        return float(max(np.abs(E[:N, N:]).max(), np.abs(E[N:, :N]).max()))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermitian_defect() <= tol

    def is_centrohermitian(self, tol: float = 1e-12) -> bool:
        return self.centrohermitian_defect() <= tol

    def is_block_diagonal(self, tol: float = 1e-12) -> bool:
        return self.off_block_max() <= tol

    def positive_block(self) -> np.ndarray:
        N = self.order
        return self.entries[N:, N:]


@dataclass
class HalfBlock:
    """Positive-frequency block (rows and columns ``1..``) of a structured matrix.

    The block may be rectangular when only a strip of rows or columns is
    needed. ``order`` is the number of rows.
    """

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @property
    def shape(self):
        return self.entries.shape

    def expand(self) -> SpectralMatrix:
        return SpectralMatrix(expand_half(self.entries))


def expand_half(plus: np.ndarray) -> np.ndarray:
    """Full ``[[J conj(P) J, 0], [0, P]]`` from square positive blocks ``P`` (batched)."""
    plus = np.asarray(plus)
    n = plus.shape[-1]
    if plus.ndim < 2 or plus.shape[-2] != n:
        raise ValueError("only square half blocks can be expanded")
    out = np.zeros(plus.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    out[..., n:, n:] = plus
    out[..., :n, :n] = centro_reflect(plus)
    return out


@dataclass(frozen=True)
class TruncationPlan:
    """Data order ``N`` and the larger assembly order used for the H matrices."""

    order: int = 16
    assembly_order: int = 200

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.assembly_order < self.order:
            raise ValueError("assembly order must be >= data order")


def concentric_eigenvalues(beta: float, r: float, order: int) -> np.ndarray:
    """Eigenvalues ``lambda_n`` of the ND map for ``1 + beta chi_{B(0, r)}``, n = 1..order.

    The values are even in ``n``; only the positive half is returned.
    """
    if not beta > -1:
        raise ValueError(f"contrast must satisfy beta > -1, got {beta}")
    if not 0 < r < 1:
        raise ValueError(f"radius must lie in (0, 1), got {r}")
    n = np.arange(1, order + 1, dtype=float)
    q = r ** (2 * n)
    return (2.0 + beta * (1.0 - q)) / (2.0 + beta * (1.0 + q)) / n


def _eigenvalue_shift(beta: float, r: float, order: int) -> np.ndarray:
    # lambda_n - 1/n written without the cancellation of the difference
    n = np.arange(1, order + 1, dtype=float)
    q = r ** (2 * n)
    return -2.0 * beta * q / (2.0 + beta * (1.0 + q)) / n


def background_nd(order: int) -> SpectralMatrix:
    """ND matrix of the unit conductivity, ``diag(1/|n|)``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return SpectralMatrix(np.diag(1.0 / np.abs(fourier_indices(order))).astype(complex))


class HCoefficients:
    """Exact integer coefficients of the polynomials ``(H_rho)[n, m]``, n, m >= 1.

    ``terms(n, m)`` returns ``(p0, coeffs)`` with
    ``(H_rho)[n, m] = sum_j coeffs[j] * rho**(p0 + 2 j)``.
    Binomials come from gmpy2 so the coefficients are exact big integers.
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self._table: dict[tuple[int, int], tuple[int, tuple]] = {}
        self._bits: dict[tuple[int, int], int] = {}

    def terms(self, n: int, m: int):
        key = (n, m)
        hit = self._table.get(key)
        if hit is not None:
            return hit
        if not (1 <= n <= self.order and 1 <= m <= self.order):
            raise IndexError(f"({n}, {m}) outside 1..{self.order}")
        comb = gmpy2.comb
        k0 = max(n - m, 0)
        coeffs = tuple(
            (-1 if (n - k) & 1 else 1) * comb(k + m - 1, k + m - n) * comb(n, k)
            for k in range(k0, n + 1)
        )
        hit = (2 * k0 + m - n, coeffs)
        self._table[key] = hit
        return hit

    def max_bits(self, rows: int, cols: int) -> int:
        """Bit length of the largest coefficient over the ``rows x cols`` corner."""
        key = (rows, cols)
        if key not in self._bits:
            self._bits[key] = max(
                max(abs(c).bit_length() for c in self.terms(n, m)[1])
                for n in range(1, rows + 1)
                for m in range(1, cols + 1)
            )
        return self._bits[key]


@lru_cache(maxsize=4)
def h_polynomial_coefficients(order: int) -> HCoefficients:
    """Shared coefficient table for assembly order ``order``."""
    return HCoefficients(order)


def _h_rho_polynomial(rho: float, order: int, rows: int, cols: int, precision_bits: int) -> np.ndarray:
    table = h_polynomial_coefficients(order)
    need = table.max_bits(rows, cols) + GUARD_BITS
    prec = max(int(precision_bits), need)
    if prec > precision_bits:
        logger.debug("raising working precision from %d to %d bits", precision_bits, prec)
    out = np.empty((rows, cols))
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        x = gmpy2.mpfr(rho)
        top = 2 * rows + cols
        powers = [gmpy2.mpfr(1)]
        for _ in range(top):
            powers.append(powers[-1] * x)
        fsum = gmpy2.fsum
        for n in range(1, rows + 1):
            row = out[n - 1]
            for m in range(1, cols + 1):
                p0, coeffs = table.terms(n, m)
                row[m - 1] = float(fsum(c * powers[p0 + 2 * j] for j, c in enumerate(coeffs)))
    return out


_H_CACHE: dict = {}


def _h_rho_cached(rho: float, order: int, rows: int, cols: int, precision_bits: int) -> np.ndarray:
    key = (float(rho), rows, cols, int(precision_bits))
    arr = _H_CACHE.get(key)
    if arr is not None:
        return arr
    arr = cache.load_h_rho(rho, rows, cols, precision_bits)
    if arr is None:
        arr = _h_rho_polynomial(rho, order, rows, cols, precision_bits)
        cache.store_h_rho(rho, rows, cols, precision_bits, arr)
    arr.setflags(write=False)
    _H_CACHE[key] = arr
    return arr


def _phase(zeta: float, rows: int, cols: int) -> np.ndarray:
    n = np.arange(1, rows + 1)[:, None]
    m = np.arange(1, cols + 1)[None, :]
    return np.exp(1j * (m - n) * zeta)


def _as_params(a) -> complex:
    a = a.a if isinstance(a, MobiusParams) else complex(a)
    if not abs(a) < 1:
        raise ValueError(f"|a| must be < 1, got {abs(a)}")
    return a


def assemble_h_plus(
    a,
    order: int,
    precision_bits: int = 256,
    *,
    rows: int | None = None,
    columns: int | None = None,
) -> HalfBlock:
    """Positive block of ``H_a`` from the exact polynomial formula.

    Each entry is ``exp(i (m - n) zeta) * (H_rho)[n, m]`` with the polynomial
    summed in gmpy2 floating point. ``precision_bits`` is a floor: the working
    precision is raised to the coefficient size plus guard bits when needed,
    since the alternating sums cancel by hundreds of bits at high order.
    ``rows``/``columns`` restrict the assembly to a strip.
    """
    a = _as_params(a)
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    rows = order if rows is None else rows
    columns = order if columns is None else columns
    rho, zeta = abs(a), (np.angle(a) if a != 0 else 0.0)
    if rows > order or columns > order:
        raise ValueError("strip exceeds the assembly order")
    H = _h_rho_cached(rho, order, rows, columns, precision_bits)
    return HalfBlock(_phase(zeta, rows, columns) * H)


def assemble_h_quadrature(a, order: int, Q: int | None = None) -> HalfBlock:
    """Positive block of ``H_a`` by Gauss-Legendre quadrature of the inner products.

    The integral over a period is taken on ``[zeta - pi, zeta + pi]`` split at
    ``theta = zeta``, where the angle map changes fastest; Gauss-Legendre nodes
    cluster at panel ends, which is what makes the rule converge for |a| near 1.
    ``Q`` is the total number of nodes (default ``8 * order``).
    """
    a = _as_params(a)
    rho, zeta = abs(a), (float(np.angle(a)) if a != 0 else 0.0)
    if rho > 0.95:
        warnings.warn(
            f"|a| = {rho:.3f} > 0.95: the quadrature integrand concentrates and accuracy degrades",
            TruncationWarning,
            stacklevel=2,
        )
    Q = 8 * order if Q is None else int(Q)
    half = max(Q // 2, 1)
    x, w = np.polynomial.legendre.leggauss(half)
    t = np.concatenate([0.5 * np.pi * (x - 1.0), 0.5 * np.pi * (x + 1.0)])
    w = np.concatenate([w, w]) * (0.5 * np.pi)
    k = (1.0 + rho) / (1.0 - rho)
    bend = 2.0 * np.arctan(k * np.tan(0.5 * t))
    n = np.arange(1, order + 1)[:, None]
    theta = t + zeta
    left = np.exp(-1j * n * bend) * w
    right = np.exp(1j * n * theta)
    prefactor = ((-1.0) ** n * np.exp(-1j * n * zeta)) / (2.0 * np.pi)
    return HalfBlock(prefactor * (left @ right.T))


def involution_residual(H, N: int) -> float:
    """Max deviation of the leading ``N x N`` block of ``H @ H`` from the identity."""
    E = H.entries if isinstance(H, HalfBlock) else np.asarray(H)
    if N > min(E.shape):
        raise ValueError(f"N = {N} exceeds the block order {min(E.shape)}")
    P = E[:N, :] @ E[:, :N]
    return float(np.max(np.abs(P - np.eye(N))))


def _tail_bound(rho: float, beta: float, r: float, order: int) -> float:
    # neglected terms k > order are bounded by ||H||^2 * max_k |lambda_k - 1/k|,
    # and ||H||^2 <= max boundary Jacobian = (1 + rho) / (1 - rho)
    k = order + 1
    q = r ** (2 * k)
    return (1.0 + rho) / (1.0 - rho) * abs(2.0 * beta * q / (2.0 + beta * (1.0 + q)) / k)


def nd_plus_from_strip(H: np.ndarray, beta: float, r: float) -> np.ndarray:
    """``diag(1/n) + H^* (D+ - diag(1/k)) H`` for a ``K x N`` column strip ``H``.

    Real strips (``H_rho``) give a real result; the phase is applied by the caller.
    """
    K, N = H.shape
    w = _eigenvalue_shift(beta, r, K)
    core = (H.conj().T * w) @ H
    core = 0.5 * (core + core.conj().T)
    return np.diag(1.0 / np.arange(1, N + 1)) + core


def nd_ball(
    ball: Ball,
    beta: float,
    plan: TruncationPlan = TruncationPlan(),
    *,
    precision_bits: int = 256,
    h_method: str = "polynomial",
    assembly: str = "perturbative",
    tol: float = INVOLUTION_TOL,
) -> SpectralMatrix:
    """ND matrix of ``1 + beta chi_ball`` truncated to ``|n|, |m| <= plan.order``.

    ``A+ = (H+)^* D+ H+`` is summed over ``k = 1..plan.assembly_order``. Only
    the first ``N`` columns of ``H+`` enter the central ``N x N`` block, so just
    that strip is assembled.

    With ``assembly="perturbative"`` (default) the sum is taken over
    ``D+ - diag(1/k)`` and ``diag(1/n)`` is added back, which uses the
    conformal invariance ``H^* diag(1/|k|) H = diag(1/|n|)``. The weights then
    decay like ``r^(2k)``, so the truncation error no longer depends on how
    close ``|a|`` is to 1. ``assembly="direct"`` sums ``D+`` itself.

    A :class:`TruncationWarning` is issued when the truncation indicator
    exceeds ``tol``. That indicator is the involution residual in direct mode
    and a tail bound in perturbative mode.
    """
    if not beta > -1:
        raise ValueError(f"contrast must satisfy beta > -1, got {beta}")
    params = ball_to_concentric(ball)
    N, K = plan.order, plan.assembly_order
    if h_method == "polynomial":
        H = assemble_h_plus(params, K, precision_bits, columns=N).entries
    elif h_method == "quadrature":
        H = assemble_h_quadrature(params, K).entries[:, :N]
    else:
        raise ValueError(f"unknown h_method {h_method!r}")

    if assembly == "perturbative":
        plus = nd_plus_from_strip(H, beta, params.r)
        indicator = _tail_bound(params.rho, beta, params.r, K)
    elif assembly == "direct":
        lam = concentric_eigenvalues(beta, params.r, K)
        plus = (H.conj().T * lam) @ H
        plus = 0.5 * (plus + plus.conj().T)
        rows = assemble_h_plus(params, K, precision_bits, rows=N).entries
        indicator = float(np.max(np.abs(rows @ H - np.eye(N))))
    else:
        raise ValueError(f"unknown assembly {assembly!r}")
    if indicator > tol:
        warnings.warn(
            f"assembly order {K} leaves truncation indicator {indicator:.2e} > {tol:g} "
            f"for |a| = {params.rho:.4f}",
            TruncationWarning,
            stacklevel=2,
        )
    return SpectralMatrix(
        expand_half(plus),
        meta={"a": params.a, "r": params.r, "truncation_indicator": indicator},
    )


def frechet_plus(c, zeta, R, N: int) -> np.ndarray:
    """Positive block of the Fréchet derivative matrix for balls ``B(c e^{i zeta}, R)``.

    ``c``, ``zeta`` and ``R`` broadcast against each other; the result has shape
    ``broadcast_shape + (N, N)``.
    """
    c, zeta, R = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (c, zeta, R)))
    c, zeta, R = (v[..., None, None] for v in (c, zeta, R))
    n = np.arange(1, N + 1)
    # binom(n - 1, k) for k = 0..N-1 (rows) and n = 1..N (columns); zero for k > n - 1
    binom = np.array([[math.comb(q - 1, k) for q in n] for k in range(N)], dtype=float)
    total = np.zeros(np.broadcast_shapes(c.shape, R.shape)[:-2] + (N, N))
    nn, mm = n[:, None], n[None, :]
    for k in range(N):
        live = np.minimum(nn, mm) > k
        expo = np.where(live, nn + mm - 2 * k - 2, 0)
        coef = np.outer(binom[k], binom[k]) / (k + 1)
        total = total + coef * c**expo * R ** (2 * k + 2)
    return -np.exp(1j * (mm - nn) * zeta) * total


def frechet_ball(ball: Ball, N: int) -> SpectralMatrix:
    """Matrix of the Fréchet derivative of the ND map at 1 in direction ``chi_ball``."""
    if not ball.strictly_inside:
        raise ValueError(f"ball B({ball.center}, {ball.radius}) must lie strictly inside the disk")
    plus = frechet_plus(ball.c, ball.zeta, ball.radius, N)
    return SpectralMatrix(expand_half(plus))


def write_matrix(path, M) -> None:
    """Row-major complex matrix as interleaved little-endian float64 (re, im)."""
    E = np.ascontiguousarray(np.asarray(M, dtype=np.complex128))
    E.astype("<c16").tofile(path)


def write_matrix_csv(path, M) -> None:
    """Row-major CSV; each row holds the interleaved (re, im) pairs of one matrix row."""
    E = np.asarray(M, dtype=np.complex128)
    flat = np.empty((E.shape[0], 2 * E.shape[1]))
    flat[:, 0::2], flat[:, 1::2] = E.real, E.imag
    np.savetxt(path, flat, delimiter=",", fmt="%.17g")


def read_matrix(path) -> SpectralMatrix:
    raw = np.fromfile(path, dtype="<c16")
    n = math.isqrt(raw.size)
    if n * n != raw.size:
        raise ValueError(f"{path}: {raw.size} entries do not form a square matrix")
    return SpectralMatrix(raw.reshape(n, n))
