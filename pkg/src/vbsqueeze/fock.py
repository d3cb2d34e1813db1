"""Truncated bosonic Fock spaces and the elementary operators living on them.

Two-mode operators use the mode-1-major layout: the basis state |j, k> sits at
row ``j * per_mode_dim + k``.  Every operator identity is only trusted on the
lowest levels, see :func:`subspace_residual`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FockError(ValueError):
    """Invalid configuration or incompatible operators."""


@dataclass(frozen=True)
class FockConfig:
    """Truncation and physical parameters of the simulated Hilbert space.

    Parameters
    ----------
    per_mode_dim : int
        Number of retained levels per mode (levels ``0 .. per_mode_dim - 1``).
    mode_count : int
        1 or 2.
    omega0 : float
        Oscillator frequency entering the position/momentum quadratures.
    subspace_dim : int
        Size of the low-lying projector used for comparisons.  Must not
        exceed ``per_mode_dim / 2``.
    """

    per_mode_dim: int
    mode_count: int = 1
    omega0: float = 1.0
    subspace_dim: int = 8

    def __post_init__(self):
        if self.mode_count not in (1, 2):
            raise FockError(f"mode_count must be 1 or 2, got {self.mode_count}")
        if self.per_mode_dim < 4:
            raise FockError(f"per_mode_dim must be >= 4, got {self.per_mode_dim}")
        if not self.omega0 > 0:
            raise FockError(f"omega0 must be positive, got {self.omega0}")
        if self.subspace_dim < 1 or 2 * self.subspace_dim > self.per_mode_dim:
            raise FockError(
                f"subspace_dim={self.subspace_dim} must lie in "
                f"[1, per_mode_dim/2 = {self.per_mode_dim / 2:g}]"
            )

    @property
    def dim(self) -> int:
        return self.per_mode_dim**self.mode_count

    @property
    def structure(self) -> str:
        return "single_mode" if self.mode_count == 1 else "two_mode"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense complex operator on a truncated Fock space.

    ``structure`` is ``"single_mode"`` or ``"two_mode"``; for the latter
    ``entries`` has shape ``(per_mode_dim**2, per_mode_dim**2)``.
    """

    entries: np.ndarray
    structure: str
    per_mode_dim: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise FockError(f"operator must be square, got shape {m.shape}")
        expected = self.per_mode_dim ** (2 if self.structure == "two_mode" else 1)
        if self.structure not in ("single_mode", "two_mode"):
            raise FockError(f"unknown structure {self.structure!r}")
        if m.shape[0] != expected:
            raise FockError(
                f"{self.structure} operator with per_mode_dim={self.per_mode_dim} "
                f"needs dim {expected}, got {m.shape[0]}"
            )
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def like(self, entries: np.ndarray, name: str = "") -> "OperatorMatrix":
        """New operator with this operator's mode structure."""
        return OperatorMatrix(entries, self.structure, self.per_mode_dim, name)

    def _check(self, other: "OperatorMatrix"):
        if (self.structure, self.per_mode_dim) != (other.structure, other.per_mode_dim):
            raise FockError(
                f"incompatible operators: {self.structure}/{self.per_mode_dim} "
                f"vs {other.structure}/{other.per_mode_dim}"
            )

    def __add__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return self.like(self.entries + other.entries)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return self.like(self.entries - other.entries)
        return NotImplemented

    def __neg__(self):
        return self.like(-self.entries)

    def __mul__(self, scalar):
        if isinstance(scalar, OperatorMatrix):
            return NotImplemented
        return self.like(self.entries * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.like(self.entries / complex(scalar))

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return self.like(self.entries @ other.entries)
        return NotImplemented

    @property
    def dag(self) -> "OperatorMatrix":
        return self.like(self.entries.conj().T)

    def power(self, exponent: int) -> "OperatorMatrix":
        if exponent < 0:
            raise FockError("only nonnegative integer powers are supported")
        return self.like(np.linalg.matrix_power(self.entries, exponent))

    def identity(self) -> "OperatorMatrix":
        return self.like(np.eye(self.dim, dtype=complex), "I")

    def hermiticity_error(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max(initial=0.0))


def _ladder(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)


def _embed(cfg: FockConfig, single: np.ndarray, mode: int) -> np.ndarray:
    if cfg.mode_count == 1:
        return single
    eye = np.eye(cfg.per_mode_dim, dtype=complex)
    return np.kron(single, eye) if mode == 0 else np.kron(eye, single)


def _check_mode(cfg: FockConfig, mode: int):
    if not 0 <= mode < cfg.mode_count:
        raise FockError(f"mode index {mode} invalid for mode_count={cfg.mode_count}")


def _wrap(cfg: FockConfig, m: np.ndarray, name: str) -> OperatorMatrix:
    return OperatorMatrix(m, cfg.structure, cfg.per_mode_dim, name)


def identity(cfg: FockConfig) -> OperatorMatrix:
    return _wrap(cfg, np.eye(cfg.dim, dtype=complex), "I")


def build_annihilation(cfg: FockConfig, mode: int = 0) -> OperatorMatrix:
    """Annihilation operator of ``mode`` (0-based), ``a[k, k+1] = sqrt(k+1)``."""
    _check_mode(cfg, mode)
    return _wrap(cfg, _embed(cfg, _ladder(cfg.per_mode_dim), mode), f"a{mode + 1}")


def build_creation(cfg: FockConfig, mode: int = 0) -> OperatorMatrix:
    return build_annihilation(cfg, mode).dag


def build_number(cfg: FockConfig, mode: int = 0) -> OperatorMatrix:
    _check_mode(cfg, mode)
    n = np.diag(np.arange(cfg.per_mode_dim, dtype=float)).astype(complex)
    return _wrap(cfg, _embed(cfg, n, mode), f"N{mode + 1}")


def build_position(cfg: FockConfig, mode: int = 0) -> OperatorMatrix:
    """x = (a + a^dag) / sqrt(2 omega0)."""
    _check_mode(cfg, mode)
    a = _ladder(cfg.per_mode_dim)
    x = (a + a.conj().T) / np.sqrt(2.0 * cfg.omega0)
    return _wrap(cfg, _embed(cfg, x, mode), f"x{mode + 1}")


def build_momentum(cfg: FockConfig, mode: int = 0) -> OperatorMatrix:
    """p = i sqrt(omega0/2) (a^dag - a), so that [x, p] = i on low levels."""
    _check_mode(cfg, mode)
    a = _ladder(cfg.per_mode_dim)
    p = 1j * np.sqrt(cfg.omega0 / 2.0) * (a.conj().T - a)
    return _wrap(cfg, _embed(cfg, p, mode), f"p{mode + 1}")


def build_com_rel(cfg: FockConfig):
    """Centre-of-mass and relative coordinates ``(X, P, dx, dp)``.

    X = (x1 + x2)/2, P = (p1 + p2)/2, dx = x1 - x2, dp = p1 - p2.
    """
    if cfg.mode_count != 2:
        raise FockError("centre-of-mass/relative coordinates need mode_count=2")
    x1, x2 = build_position(cfg, 0), build_position(cfg, 1)
    p1, p2 = build_momentum(cfg, 0), build_momentum(cfg, 1)
    X = (x1 + x2) / 2
    P = (p1 + p2) / 2
    dx = x1 - x2
    dp = p1 - p2
    return (
        X.like(X.entries, "X"),
        P.like(P.entries, "P"),
        dx.like(dx.entries, "dx"),
        dp.like(dp.entries, "dp"),
    )


def commutator(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    return A @ B - B @ A


def low_indices(structure: str, per_mode_dim: int, k: int) -> np.ndarray:
    """Basis indices of the lowest ``k`` levels (per mode for two modes)."""
    if structure == "single_mode":
        return np.arange(k)
    j, l = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    return (j * per_mode_dim + l).ravel()


def project(A: OperatorMatrix, k: int) -> np.ndarray:
    """The block ``P_k A P_k`` as a small dense array."""
    if k < 1 or k > A.per_mode_dim:
        raise FockError(f"projector size {k} out of range for per_mode_dim={A.per_mode_dim}")
    idx = low_indices(A.structure, A.per_mode_dim, k)
    return A.entries[np.ix_(idx, idx)]


def subspace_residual(A: OperatorMatrix, k: int) -> float:
    """Spectral norm of ``A`` restricted to the lowest ``k`` levels per mode.

    ``k`` may not exceed ``per_mode_dim - 1``: the top level is always
    corrupted by the cutoff, so projecting onto it measures nothing.
    """
    if k >= A.per_mode_dim:
        raise FockError(
            f"k={k} too large: must be below per_mode_dim={A.per_mode_dim}"
        )
    block = project(A, k)
    if not block.any():
        return 0.0
    return float(np.linalg.norm(block, 2))
