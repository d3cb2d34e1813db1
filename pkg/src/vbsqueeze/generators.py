"""Witt-algebra squeezing generators and their classical flows.

Conventions (fixed once, used everywhere):

* single mode: ``L_n = -(i/2)(x^{n+1} p + p x^{n+1})``; ``L_0 = (a^dag^2 - a^2)/2``.
* two modes: ``L_n = i(X^{n+1} P + P X^{n+1}) - (i/4)(dx^{n+1} dp + dp dx^{n+1})``,
  which equals ``a1 a2 - a1^dag a2^dag`` at ``n = 0``.

All generators are anti-Hermitian, so ``exp(theta L)`` is unitary.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import (
    FockConfig,
    FockError,
    OperatorMatrix,
    build_annihilation,
    build_momentum,
    build_position,
    low_indices,
)

VARIANTS = ("single_mode", "bogoliubov", "virasoro_bogoliubov")


class SingularFlowError(ArithmeticError):
    """The classical flow runs into a pole before reaching ``theta``."""


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    theta: float
    variant: str = "single_mode"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown generator variant {self.variant!r}")
        if self.n < -1:
            raise FockError(f"n={self.n} < -1 is not supported")


@dataclass
class ClosureReport:
    """Residuals of ``[L_n, L_m] - (n - m) L_{n+m}`` on the low subspace."""

    pairs: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    subspace_dim: int = 0

    def add(self, pair, residual, label):
        self.pairs.append(pair)
        self.residuals.append(float(residual))
        self.labels.append(label)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    def named(self, label: str) -> float:
        return self.residuals[self.labels.index(label)]


def classical_flow(n: int, theta: float, z: complex) -> complex:
    """Flow of ``dz/dtheta = z^{n+1}`` started at ``z``.

    ``n = 0`` is a dilation, ``n = -1`` a translation and ``n = 1`` a special
    conformal map.  The principal branch is the continuous one: the segment
    ``1 - n s z^n`` (``0 <= s <= theta``) only meets the branch cut by passing
    through the pole.
    """
    z = complex(z)
    if theta == 0:
        return z
    if n == 0:
        return cmath.exp(theta) * z
    if n == -1:
        return z + theta
    if z == 0:
        if n > 0:
            return 0j
        raise SingularFlowError(f"z = 0 is singular for n = {n}")
    c = n * theta * z**n
    if abs(c.imag) <= 1e-15 * max(1.0, abs(c)) and c.real >= 1.0:
        raise SingularFlowError(
            f"flow n={n} from z={z} hits a pole before theta={theta}"
        )
    return z * (1.0 - c) ** (-1.0 / n)


def _sym(A: np.ndarray) -> np.ndarray:
    # A + A^dag is Hermitian to the last bit
    return A + A.conj().T


def _check_n(n: int):
    if n < -1:
        raise FockError(f"n={n} < -1 needs inverse powers of x; not supported")


def build_L_single(cfg: FockConfig, n: int) -> OperatorMatrix:
    """``L_n = -(i/2)(x^{n+1} p + p x^{n+1})`` on a single mode."""
    _check_n(n)
    if cfg.mode_count != 1:
        raise FockError("build_L_single needs mode_count=1")
    x = build_position(cfg).entries
    p = build_momentum(cfg).entries
    A = np.linalg.matrix_power(x, n + 1) @ p
    return OperatorMatrix(-0.5j * _sym(A), "single_mode", cfg.per_mode_dim, f"L{n}")


def build_squeeze_generator(cfg: FockConfig) -> OperatorMatrix:
    """Quadratic squeezing generator ``G = (a^2 - a^dag^2)/2``.

    ``exp(theta G) a exp(-theta G) = a cosh(theta) + a^dag sinh(theta)``.
    Note ``G = -L_0``.
    """
    if cfg.mode_count != 1:
        raise FockError("build_squeeze_generator needs mode_count=1")
    a = build_annihilation(cfg).entries
    a2 = a @ a
    return OperatorMatrix(0.5 * (a2 - a2.conj().T), "single_mode", cfg.per_mode_dim, "G")


def build_bogoliubov_generator(cfg: FockConfig, check_k: int | None = None) -> OperatorMatrix:
    """Two-mode Bogoliubov generator ``G = a1 a2 - a1^dag a2^dag``.

    Built directly from Kronecker products; the equivalent quadrature form
    ``i(x1 p2 + x2 p1)`` is cross-checked on the lowest ``check_k`` levels
    (default ``cfg.subspace_dim``) and a mismatch above 1e-10 raises.
    """
    if cfg.mode_count != 2:
        raise FockError("build_bogoliubov_generator needs mode_count=2")
    d = cfg.per_mode_dim
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
    aa = np.kron(a, a)
    G = aa - aa.conj().T

    k = cfg.subspace_dim if check_k is None else check_k
    single = FockConfig(d, 1, cfg.omega0, max(1, min(cfg.subspace_dim, d // 2)))
    x = build_position(single).entries[:k, :k]
    p = build_momentum(single).entries[:k, :k]
    # low block of kron(A, B) is kron of the factors' low blocks
    quad = 1j * (np.kron(x, p) + np.kron(p, x))
    idx = low_indices("two_mode", d, k)
    diff = quad - G[np.ix_(idx, idx)]
    err = float(np.linalg.norm(diff, 2))
    if err > 1e-10:
        raise AssertionError(f"quadrature form of G disagrees: residual {err:.3e}")
    return OperatorMatrix(G, "two_mode", d, "G")


def _sparse_com_rel(cfg: FockConfig):
    d = cfg.per_mode_dim
    single = FockConfig(d, 1, cfg.omega0, max(1, min(cfg.subspace_dim, d // 2)))
    x = sp.csr_matrix(build_position(single).entries)
    p = sp.csr_matrix(build_momentum(single).entries)
    eye = sp.identity(d, dtype=complex, format="csr")
    x1, x2 = sp.kron(x, eye, format="csr"), sp.kron(eye, x, format="csr")
    p1, p2 = sp.kron(p, eye, format="csr"), sp.kron(eye, p, format="csr")
    return (x1 + x2) * 0.5, (p1 + p2) * 0.5, x1 - x2, p1 - p2


def _sparse_power_times(q, m, power):
    out = m
    for _ in range(power):
        out = q @ out
    return out


def build_L_two_mode_parts(cfg: FockConfig, n: int):
    """Centre-of-mass and relative pieces of the two-mode generator.

    Returns ``(com, rel)`` with ``com = i(X^{n+1} P + P X^{n+1})`` and
    ``rel = -(i/4)(dx^{n+1} dp + dp dx^{n+1})``.
    """
    _check_n(n)
    if cfg.mode_count != 2:
        raise FockError("two-mode generator needs mode_count=2")
    X, P, dx, dp = _sparse_com_rel(cfg)
    A = _sparse_power_times(X, P, n + 1).toarray()
    B = _sparse_power_times(dx, dp, n + 1).toarray()
    d = cfg.per_mode_dim
    com = OperatorMatrix(1j * _sym(A), "two_mode", d, f"Lcom{n}")
    rel = OperatorMatrix(-0.25j * _sym(B), "two_mode", d, f"Lrel{n}")
    return com, rel


def build_L_two_mode(cfg: FockConfig, n: int) -> OperatorMatrix:
    com, rel = build_L_two_mode_parts(cfg, n)
    out = com + rel
    return out.like(out.entries, f"LVB{n}")


def build_generator(cfg: FockConfig, spec: GeneratorSpec) -> OperatorMatrix:
    if spec.variant == "single_mode":
        return build_L_single(cfg, spec.n)
    if spec.variant == "bogoliubov":
        return build_bogoliubov_generator(cfg)
    return build_L_two_mode(cfg, spec.n)


def anti_hermiticity_error(L: OperatorMatrix) -> float:
    return float(np.abs(L.entries + L.entries.conj().T).max(initial=0.0))


def projected_commutator(A: OperatorMatrix, B: OperatorMatrix, k: int) -> np.ndarray:
    """``P_k [A, B] P_k`` without forming the full product."""
    idx = low_indices(A.structure, A.per_mode_dim, k)
    a, b = A.entries, B.entries
    return a[idx, :] @ b[:, idx] - b[idx, :] @ a[:, idx]


def _closure_residual(Ln, Lm, Lnm, n, m, k):
    block = projected_commutator(Ln, Lm, k)
    if Lnm is not None:
        idx = low_indices(Ln.structure, Ln.per_mode_dim, k)
        block = block - (n - m) * Lnm.entries[np.ix_(idx, idx)]
    return float(np.linalg.norm(block, 2)) if block.any() else 0.0


SL2_TRIPLE = {(1, 0): "[L1,L0]=L1", (-1, 0): "[L-1,L0]=-L-1", (1, -1): "[L1,L-1]=2L0"}


def witt_closure_check(cfg: FockConfig, n_range=(-1, 2), k: int | None = None) -> ClosureReport:
    """Check ``[L_n, L_m] = (n - m) L_{n+m}`` for ``n, m`` in ``n_range``.

    ``n_range`` is an inclusive ``(lo, hi)`` pair; pairs with ``n + m < -1``
    are skipped.  For two modes the centre-of-mass family ``L_n(X, 2P)``
    (which is minus the COM part of the generator) and the relative family
    ``L_n(dx, dp/2)`` are checked separately, together with their mutual
    commutators.
    """
    lo, hi = n_range
    if lo < -1 or hi < lo:
        raise FockError(f"invalid n_range {n_range}")
    k = cfg.subspace_dim if k is None else k
    report = ClosureReport(subspace_dim=k)
    ns = range(lo, hi + 1)

    if cfg.mode_count == 1:
        families = {"": {}}
        build = {"": lambda j: build_L_single(cfg, j)}
    else:
        cache = {}

        def parts(j):
            if j not in cache:
                cache[j] = build_L_two_mode_parts(cfg, j)
            return cache[j]

        families = {"com:": {}, "rel:": {}}
        build = {"com:": lambda j: -parts(j)[0], "rel:": lambda j: parts(j)[1]}

    for prefix, ops in families.items():
        def get(j, prefix=prefix, ops=ops):
            if j not in ops:
                ops[j] = build[prefix](j)
            return ops[j]

        for n in ns:
            for m in ns:
                if n + m < -1:
                    continue
                Lnm = get(n + m) if n != m else None
                r = _closure_residual(get(n), get(m), Lnm, n, m, k)
                label = prefix + SL2_TRIPLE.get((n, m), f"[L{n},L{m}]")
                report.add((n, m), r, label)

    if cfg.mode_count == 2:
        com, rel = families["com:"], families["rel:"]
        for n in ns:
            for m in ns:
                block = projected_commutator(com[n], rel[m], k)
                r = float(np.linalg.norm(block, 2)) if block.any() else 0.0
                report.add((n, m), r, f"mixed:[Lcom{n},Lrel{m}]")
    return report
