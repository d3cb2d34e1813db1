"""Squeezed states, particle numbers, reduced density matrices and beta fits.

The "+" / "-" factors are the canonically normalised normal modes
``b_pm = (a1 +- a2) / sqrt(2)``.  Basis change to them conserves
``n1 + n2``, so it is exact on every total-number sector that fits inside the
truncation (``n1 + n2 <= per_mode_dim - 1``); weight outside those sectors is
reported, never silently renormalised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .evolve import (
    COM_SIGN,
    REL_SIGN,
    SINGLE_SIGN,
    DomainError,
    _require_domain,
    exponentiate,
    fn_of_hermitian,
    scalar_k_omega,
    spectrum,
)
from .fock import FockConfig, FockError, build_annihilation, build_com_rel, build_position
from .generators import GeneratorSpec, build_generator

log = logging.getLogger(__name__)

FIT_FLOOR = 1e-13


class NonNormalizableError(ValueError):
    pass


class GeometricFitError(ValueError):
    pass


class DegenerateFitError(GeometricFitError):
    """The reduced state is (numerically) the vacuum: no temperature to fit."""


@dataclass
class StateVector:
    amplitudes: np.ndarray
    structure: str
    per_mode_dim: int
    norm_tolerance: float = 1e-10

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm
        if nrm == 0:
            raise NonNormalizableError("zero vector cannot be normalised")
        return StateVector(self.amplitudes / nrm, self.structure, self.per_mode_dim,
                           self.norm_tolerance)

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass
class DensityMatrix:
    entries: np.ndarray
    structure: str
    per_mode_dim: int
    discarded_weight: float = 0.0

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    @property
    def purity(self) -> float:
        m = self.entries
        return float(np.real(np.vdot(m.conj().T, m)))

    def hermiticity_error(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max(initial=0.0))

    def eigenvalues(self) -> np.ndarray:
        m = self.entries
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()


@dataclass
class MeanFieldParams:
    K: float
    Omega: float
    branch: str
    moment: float


@dataclass
class GeometricFit:
    ratio: float
    beta: float
    residual: float
    levels_used: int
    predicted_ratio: float | None = None

    @property
    def predicted_beta(self) -> float | None:
        if self.predicted_ratio is None or not self.predicted_ratio > 0:
            return None
        return float(-np.log(self.predicted_ratio))


# -- states -----------------------------------------------------------------

def vacuum(cfg: FockConfig) -> StateVector:
    v = np.zeros(cfg.dim, dtype=complex)
    v[0] = 1.0
    return StateVector(v, cfg.structure, cfg.per_mode_dim)


def _default_variant(cfg: FockConfig, spec: GeneratorSpec) -> GeneratorSpec:
    if cfg.mode_count == 2 and spec.variant == "single_mode":
        return GeneratorSpec(spec.n, spec.theta, "virasoro_bogoliubov")
    return spec


def evolve_vacuum(cfg: FockConfig, spec: GeneratorSpec):
    """``(|theta>_n, U)`` with ``U = exp(theta L_n)``."""
    spec = _default_variant(cfg, spec)
    U = exponentiate(build_generator(cfg, spec), spec.theta)
    state = StateVector(U.entries[:, 0].copy(), cfg.structure, cfg.per_mode_dim)
    drift = abs(state.norm - 1.0)
    if drift > 1e-10:
        raise ArithmeticError(f"evolved vacuum lost normalisation by {drift:.3e}")
    return state.normalized(), U


def squeezed_state(cfg: FockConfig, spec: GeneratorSpec) -> StateVector:
    """``exp(theta L_n)|0>`` for the generator family selected by ``spec``."""
    return evolve_vacuum(cfg, spec)[0]


def _level_numbers(cfg: FockConfig, mode):
    levels = np.arange(cfg.per_mode_dim, dtype=float)
    if cfg.mode_count == 1:
        return levels
    n1, n2 = np.meshgrid(levels, levels, indexing="ij")
    if mode == "total":
        return (n1 + n2).ravel()
    if mode not in (0, 1):
        raise FockError(f"invalid mode {mode!r}")
    return (n1 if mode == 0 else n2).ravel()


def number_expectation(state: StateVector, cfg: FockConfig, mode=0) -> float:
    """``<N>`` of ``mode`` (0, 1 or ``"total"``) in ``state``."""
    if state.dim != cfg.dim:
        raise FockError("state does not match configuration")
    prob = np.abs(state.amplitudes) ** 2
    return float(prob @ _level_numbers(cfg, mode))


def _rhs_exponent(n, theta, lam):
    # (-1/n - 1/2) log(1 + n theta lam^n); n -> 0 gives -theta
    if n == 0:
        return np.full(lam.shape, -theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (-1.0 / n - 0.5) * np.log(1.0 + n * theta * np.power(lam, n))


def number_formula_rhs(cfg: FockConfig, n: int, theta: float) -> float:
    """Vacuum expectation ``<0| sinh(log (1 + n theta x^n)^(-1/n - 1/2))^2 a a^dag |0>``.

    Evaluated literally with functional calculus on the single-mode ``x``.
    Whether this equals ``<N>`` for ``n != 0`` is not claimed; see
    :func:`number_formula_report`.
    """
    single = FockConfig(cfg.per_mode_dim, 1, cfg.omega0, cfg.subspace_dim)
    x = build_position(single)
    spec = None
    if n != 0:
        spec = spectrum(x)
        _require_domain(x, n, theta, SINGLE_SIGN, 0.0, spec)
    F = fn_of_hermitian(x, lambda t: np.sinh(_rhs_exponent(n, theta, t)) ** 2, spec)
    a = build_annihilation(single).entries
    v = a @ (a.conj().T[:, 0])
    return float(np.real(np.vdot(np.eye(single.dim)[:, 0], F.entries @ v)))


def number_formula_report(cfg: FockConfig, n: int, theta: float) -> dict:
    """Diagnostic comparison of :func:`number_formula_rhs` with the exact ``<N>``."""
    single = FockConfig(cfg.per_mode_dim, 1, cfg.omega0, cfg.subspace_dim)
    rhs = number_formula_rhs(single, n, theta)
    exact = number_expectation(squeezed_state(single, GeneratorSpec(n, theta)), single)
    record = {"n": n, "theta": theta, "rhs": rhs, "expectation": exact,
              "discrepancy": abs(rhs - exact)}
    log.info("number formula n=%d theta=%g: rhs=%.9g <N>=%.9g", n, theta, rhs, exact)
    return record


# -- mean field -------------------------------------------------------------

_BRANCH_SIGN = {"single": SINGLE_SIGN, "com": COM_SIGN, "relative": REL_SIGN}


def vacuum_moment(cfg: FockConfig, n: int, branch: str) -> float:
    """``<0|q^n|0>`` for ``q`` = x (single), X (com) or dx (relative)."""
    if n < 0:
        raise DomainError(f"negative moment <q^{n}> is undefined in the vacuum")
    if branch == "single":
        q = build_position(FockConfig(cfg.per_mode_dim, 1, cfg.omega0, cfg.subspace_dim))
    else:
        two = FockConfig(cfg.per_mode_dim, 2, cfg.omega0, cfg.subspace_dim)
        X, _, dx, _ = build_com_rel(two)
        q = X if branch == "com" else dx
    v = np.zeros(q.dim, dtype=complex)
    v[0] = 1.0
    w = v
    for _ in range(n):
        w = q.entries @ w
    return float(np.real(np.vdot(v, w)))


def mean_field_params(cfg: FockConfig, n: int, theta: float, branch: str = "com") -> MeanFieldParams:
    """Scalar ``K``, ``Omega`` with ``q^n`` replaced by its vacuum moment."""
    if branch not in _BRANCH_SIGN:
        raise ValueError(f"unknown branch {branch!r}")
    moment = 1.0 if n == 0 else vacuum_moment(cfg, n, branch)
    K, Om = scalar_k_omega(n, theta, moment, _BRANCH_SIGN[branch])
    return MeanFieldParams(K, Om, branch, moment)


def predicted_ratio(cfg: FockConfig, n: int, theta: float) -> float:
    """Mean-field canonical ratio ``exp(-beta) = K^2 tanh^2 Omega`` (COM branch)."""
    mf = mean_field_params(cfg, n, theta, "com")
    return mf.K**2 * np.tanh(mf.Omega) ** 2


def _sparse_ladders(d):
    a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, format="csr")
    eye = sp.identity(d, format="csr")
    return sp.kron(a, eye, format="csr"), sp.kron(eye, a, format="csr")


def _gaussian_pm_state(d: int, c_plus: complex, c_minus: complex) -> np.ndarray:
    """Unnormalised ``exp(c_+ b_+^dag^2 + c_- b_-^dag^2)|0,0>``.

    The exponent only raises occupation numbers, so the Taylor series
    terminates on the truncated space and equals the exact projection.
    """
    for c in (c_plus, c_minus):
        if abs(c) >= 0.5:
            raise NonNormalizableError(
                f"|coefficient| = {abs(c):.6g} >= 1/2: Gaussian ansatz is not normalisable"
            )
    a1, a2 = _sparse_ladders(d)
    bp = (a1 + a2).T / np.sqrt(2.0)
    bm = (a1 - a2).T / np.sqrt(2.0)
    A = (c_plus * (bp @ bp) + c_minus * (bm @ bm)).tocsr()
    term = np.zeros(d * d, dtype=complex)
    term[0] = 1.0
    out = term.copy()
    for k in range(1, d * d):
        term = A @ term / k
        if not term.any():
            break
        out += term
    return out


def mean_field_coefficients(cfg: FockConfig, n: int, theta: float, variant: str = "canonical"):
    """Coefficients ``(c_+, c_-)`` of ``b_pm^dag^2`` in the Gaussian ansatz.

    ``canonical``: the state annihilated by the mean-field transformed modes,
    ``c = -tanh(Omega)/2`` per branch; reproduces the exact state at n = 0.
    ``half_relative`` / ``negative_relative``: two alternative coefficient sets
    written for the unnormalised ``a_pm = a1 +- a2``, namely
    ``(-K tanh Om, +K_d tanh Om_d / 2)`` and ``(-K tanh Om, -K_d tanh Om_d)``,
    rescaled to ``b_pm``.  Kept as diagnostics only.
    """
    com = mean_field_params(cfg, n, theta, "com")
    rel = mean_field_params(cfg, n, theta, "relative")
    tc, tr = np.tanh(com.Omega), np.tanh(rel.Omega)
    if variant == "canonical":
        return -tc / 2.0, -tr / 2.0
    # a_pm^dag^2 = 2 b_pm^dag^2
    if variant == "half_relative":
        return 2.0 * (-com.K * tc), 2.0 * (0.5 * rel.K * tr)
    if variant == "negative_relative":
        return 2.0 * (-com.K * tc), 2.0 * (-rel.K * tr)
    raise ValueError(f"unknown ansatz variant {variant!r}")


def mean_field_vacuum(cfg: FockConfig, n: int, theta: float, variant: str = "canonical") -> StateVector:
    """Normalised Gaussian ansatz for the transformed two-mode vacuum."""
    if cfg.mode_count != 2:
        raise FockError("mean_field_vacuum needs mode_count=2")
    cp, cm = mean_field_coefficients(cfg, n, theta, variant)
    amp = _gaussian_pm_state(cfg.per_mode_dim, cp, cm)
    return StateVector(amp, "two_mode", cfg.per_mode_dim).normalized()


def mean_field_report(cfg: FockConfig, n: int, theta: float, exact: StateVector | None = None) -> dict:
    """Fidelities of every ansatz variant against the exact transformed vacuum."""
    if exact is None:
        exact = squeezed_state(cfg, GeneratorSpec(n, theta, "virasoro_bogoliubov"))
    out = {"n": n, "theta": theta}
    for variant in ("canonical", "half_relative", "negative_relative"):
        try:
            psi = mean_field_vacuum(cfg, n, theta, variant)
            out[variant] = abs(psi.overlap(exact))
        except (NonNormalizableError, DomainError) as exc:
            out[variant] = float("nan")
            log.info("ansatz %s unavailable: %s", variant, exc)
    return out


# -- density matrices and partial traces ------------------------------------

def density_matrix(state: StateVector) -> DensityMatrix:
    psi = state.amplitudes
    if abs(state.norm - 1.0) > state.norm_tolerance:
        raise ValueError(f"state is not normalised (norm {state.norm:.12g})")
    return DensityMatrix(np.outer(psi, psi.conj()), state.structure, state.per_mode_dim)


def pm_basis(d: int) -> sp.csc_matrix:
    """Isometry whose column ``p*d + q`` is ``|p, q>_pm`` written in ``|n1, n2>``.

    ``|p, q>_pm = b_+^dag^p b_-^dag^q |0,0> / sqrt(p! q!)``; only sectors with
    ``p + q <= d - 1`` fit in the truncation, the other columns are zero.
    """
    a1, a2 = _sparse_ladders(d)
    bp = ((a1 + a2).T / np.sqrt(2.0)).tocsr()
    bm = ((a1 - a2).T / np.sqrt(2.0)).tocsr()
    cols = {}
    rows, colidx, vals = [], [], []
    vac = np.zeros(d * d)
    vac[0] = 1.0
    for q in range(d):
        v = vac if q == 0 else bm @ cols[(0, q - 1)] / np.sqrt(q)
        cols[(0, q)] = v
        for p in range(d - q):
            if p > 0:
                v = bp @ cols[(p - 1, q)] / np.sqrt(p)
                cols[(p, q)] = v
            nz = np.flatnonzero(v)
            rows.append(nz)
            colidx.append(np.full(nz.size, p * d + q))
            vals.append(v[nz])
        # rows p > 0 of the previous q are no longer needed
        for p in range(1, d - q + 1):
            cols.pop((p, q - 1), None)
    return sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(colidx))),
        shape=(d * d, d * d),
    )


def _require_two_mode(rho: DensityMatrix, cfg: FockConfig):
    if rho.structure != "two_mode" or cfg.mode_count != 2 or rho.per_mode_dim != cfg.per_mode_dim:
        raise FockError("partial trace needs a two-mode density matrix matching cfg")


def _trace_out(m: np.ndarray, d: int, keep: int) -> np.ndarray:
    r = m.reshape(d, d, d, d)
    return np.einsum("ikjk->ij", r) if keep == 0 else np.einsum("kikj->ij", r)


def _reduce(rho: DensityMatrix, cfg: FockConfig, keep: int, rotate: bool) -> DensityMatrix:
    _require_two_mode(rho, cfg)
    d = cfg.per_mode_dim
    m = rho.entries
    if rotate:
        R = pm_basis(d)
        left = R.conj().T @ m
        m = np.asarray((R.T @ left.T).T)
    reduced = _trace_out(m, d, keep)
    lost = rho.trace - float(np.real(np.trace(reduced)))
    return DensityMatrix(reduced, "single_mode", d, discarded_weight=max(0.0, lost))


def partial_trace_minus(rho: DensityMatrix, cfg: FockConfig) -> DensityMatrix:
    """Reduced state of the "+" normal mode: rotate to ``b_pm`` and trace "-"."""
    return _reduce(rho, cfg, keep=0, rotate=True)


def partial_trace_plus(rho: DensityMatrix, cfg: FockConfig) -> DensityMatrix:
    """Reduced state of the "-" normal mode."""
    return _reduce(rho, cfg, keep=1, rotate=True)


def partial_trace_mode(rho: DensityMatrix, cfg: FockConfig, keep: int = 0) -> DensityMatrix:
    """Reduced state of original mode ``keep`` (the partner mode is traced)."""
    if keep not in (0, 1):
        raise FockError(f"invalid mode {keep}")
    return _reduce(rho, cfg, keep=keep, rotate=False)


# -- canonical fit ----------------------------------------------------------

def fit_geometric(rho: DensityMatrix, levels: int = 8, predicted: float | None = None) -> GeometricFit:
    """Least-squares fit of ``log p_k = b - beta k`` over the lowest ``levels``.

    ``residual`` is the largest relative deviation of ``p_k`` from the fitted
    geometric law.
    """
    if levels < 3:
        raise GeometricFitError("need at least 3 levels for a geometric fit")
    p = rho.diagonal
    if levels > p.size:
        raise GeometricFitError(f"only {p.size} levels available, asked for {levels}")
    p = p[:levels]
    if p[0] > 0 and np.all(np.abs(p[1:]) <= 1e-15 * p[0]):
        raise DegenerateFitError("degenerate: zero-temperature (reduced state is the vacuum)")
    # populations at round-off level carry no slope information
    bad = np.flatnonzero(p <= FIT_FLOOR * p.max())
    if bad.size:
        raise GeometricFitError(
            f"population {p[bad[0]]:.3e} at level {bad[0]} is at the numerical floor: "
            "not a canonical distribution"
        )
    k = np.arange(levels, dtype=float)
    slope, intercept = np.polyfit(k, np.log(p), 1)
    ratio = float(np.exp(slope))
    if not ratio < 1.0:
        raise GeometricFitError(f"fitted ratio {ratio:.6g} >= 1: populations do not decay")
    model = np.exp(intercept + slope * k)
    residual = float(np.max(np.abs(p - model) / model))
    return GeometricFit(ratio, float(-np.log(ratio)), residual, levels, predicted)
