"""Dense operators on qubit registers.

Operators are plain complex ``numpy`` arrays of shape ``(2**n, 2**n)``.
Qubit 0 is the most-significant bit of the computational-basis index, so
``embed(Z, (1,), 2)`` is ``diag(1, -1, 1, -1)``.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-9

# Above this dimension ``spectral_norm`` switches to power iteration.
DENSE_NORM_MAX_DIM = 256

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``pauli("XZ")``.

    The first character acts on the most-significant qubit.
    """
    if not label:
        raise ValueError("empty Pauli label")
    try:
        factors = [PAULI[c] for c in label.upper()]
    except KeyError as exc:
        raise ValueError(f"invalid Pauli label {label!r}") from exc
    return reduce(np.kron, factors)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def n_qubits_of(a: np.ndarray) -> int:
    """Number of qubits for a square operator; raises if dim is not 2**n."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be square, got shape {a.shape}")
    dim = a.shape[0]
    n = dim.bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"operator dimension {dim} is not a power of 2")
    return n


def is_hermitian(a: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol)


def is_unitary(a: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    dev = dagger(a) @ a - np.eye(a.shape[-1])
    return bool(np.max(np.abs(dev), initial=0.0) <= tol)


def embed(local: np.ndarray, support: Sequence[int], n_total: int) -> np.ndarray:
    """Lift a k-qubit operator acting on ``support`` to the full register.

    ``local`` may carry leading batch dimensions. ``support`` lists the
    target qubits in the order of ``local``'s tensor factors and must be
    strictly increasing.

    Raises
    ------
    ValueError
        If the dimensions disagree or a support index is out of range.
    """
    local = np.asarray(local, dtype=complex)
    support = tuple(int(q) for q in support)
    k = len(support)
    if local.shape[-2:] != (1 << k, 1 << k):
        raise ValueError(
            f"local operator shape {local.shape[-2:]} does not match support of size {k}"
        )
    if any(q < 0 or q >= n_total for q in support):
        raise ValueError(f"support {support} out of range for {n_total} qubits")
    if any(b <= a for a, b in zip(support, support[1:])):
        raise ValueError(f"support {support} must be strictly increasing")

    batch = local.shape[:-2]
    rest = n_total - k
    full = np.kron(local, np.eye(1 << rest)) if rest else local
    if support == tuple(range(k)):
        return full

    # full currently acts on qubits (support..., others...) in that order;
    # permute tensor axes so that qubit q lands at position q.
    others = [q for q in range(n_total) if q not in support]
    current = list(support) + others
    perm = [current.index(q) for q in range(n_total)]
    nb = len(batch)
    t = full.reshape(batch + (2,) * (2 * n_total))
    axes = list(range(nb))
    axes += [nb + p for p in perm]
    axes += [nb + n_total + p for p in perm]
    dim = 1 << n_total
    return np.ascontiguousarray(t.transpose(axes)).reshape(batch + (dim, dim))


def expm(h: np.ndarray, scale: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return ``exp(-1j * scale * h)`` for Hermitian ``h``.

    Uses the Hermitian eigen-decomposition, so the result is unitary up to
    eigen-solver round-off.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol):
        raise ValueError("expm requires a Hermitian generator")
    if scale == 0:
        return np.eye(h.shape[0], dtype=complex)
    return expm_hermitian_batch(h[None], np.array([scale], dtype=float))[0]


def expm_hermitian_batch(hs: np.ndarray, scales) -> np.ndarray:
    """Vectorised ``exp(-1j * scales[i] * hs[i])`` for a stack of Hermitian matrices.

    No Hermiticity check is made; callers build ``hs`` from Hermitian pieces.
    """
    hs = np.asarray(hs, dtype=complex)
    scales = np.broadcast_to(np.asarray(scales, dtype=float), hs.shape[:1])
    if hs.shape[-1] == 2:
        return _expm_su2_batch(hs, scales)
    # symmetrise so eigh sees an exactly Hermitian input
    hs = 0.5 * (hs + dagger(hs))
    w, v = np.linalg.eigh(hs)
    phases = np.exp(-1j * scales[:, None] * w)
    return (v * phases[:, None, :]) @ dagger(v)


def _expm_su2_batch(hs: np.ndarray, scales: np.ndarray) -> np.ndarray:
    # H = a0 I + a.sigma  =>  exp(-i s H) = e^{-i s a0} (cos(s|a|) I - i sin(s|a|) a.sigma/|a|)
    a0 = 0.5 * (hs[:, 0, 0] + hs[:, 1, 1]).real
    az = 0.5 * (hs[:, 0, 0] - hs[:, 1, 1]).real
    off = 0.5 * (hs[:, 0, 1] + np.conj(hs[:, 1, 0]))
    ax, ay = off.real, -off.imag
    r = np.sqrt(ax * ax + ay * ay + az * az)
    theta = scales * r
    c = np.cos(theta)
    # sin(theta)/r with the r -> 0 limit equal to scale
    sinc = scales * np.sinc(theta / np.pi)
    g = np.exp(-1j * scales * a0)
    out = np.empty(hs.shape, dtype=complex)
    out[:, 0, 0] = g * (c - 1j * sinc * az)
    out[:, 1, 1] = g * (c + 1j * sinc * az)
    out[:, 0, 1] = g * (-1j * sinc * (ax - 1j * ay))
    out[:, 1, 0] = g * (-1j * sinc * (ax + 1j * ay))
    return out


def spectral_norm(a: np.ndarray, *, rtol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest singular value of ``a``.

    Dimensions up to 256 use the full eigen-decomposition of ``a^H a``;
    larger operators fall back to power iteration on ``a^H a``.
    """
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    gram = dagger(a) @ a
    if a.shape[-1] <= DENSE_NORM_MAX_DIM:
        top = np.linalg.eigvalsh(0.5 * (gram + dagger(gram)))[-1]
        return float(np.sqrt(max(top, 0.0)))
    return float(np.sqrt(_power_iteration(gram, rtol, max_iter)))


def _power_iteration(gram: np.ndarray, rtol: float, max_iter: int) -> float:
    rng = np.random.default_rng(0)
    x = rng.standard_normal(gram.shape[0]) + 1j * rng.standard_normal(gram.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = gram @ x
        new = float(np.vdot(x, y).real)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


def spectral_norm_batch(stack: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of matrices (last two axes)."""
    stack = np.asarray(stack, dtype=complex)
    gram = dagger(stack) @ stack
    top = np.linalg.eigvalsh(0.5 * (gram + dagger(gram)))[..., -1]
    return np.sqrt(np.maximum(top, 0.0))


def ordered_product(stack: np.ndarray) -> np.ndarray:
    """Product ``stack[n-1] @ ... @ stack[1] @ stack[0]``.

    ``stack`` is in application order (first factor applied first). Uses
    pairwise reduction with batched matmul.
    """
    stack = np.asarray(stack, dtype=complex)
    if stack.shape[0] == 0:
        return np.eye(stack.shape[-1], dtype=complex)
    while stack.shape[0] > 1:
        n = stack.shape[0]
        half = n // 2
        paired = stack[1 : 2 * half : 2] @ stack[0 : 2 * half : 2]
        if n % 2:
            paired = np.concatenate([paired, stack[-1:]], axis=0)
        stack = paired
    return stack[0]
