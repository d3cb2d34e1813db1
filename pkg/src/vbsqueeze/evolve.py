"""Unitary evolution, functional calculus and closed-form transformation laws.

Sign ledger for the closed forms (``flow_sign`` argument):

==============  =========  ======================================  ==============
coordinate      flow_sign  position law                            n = 0 limit
==============  =========  ======================================  ==============
single-mode x   +1         (1 + n theta x^n)^(-1/n) x              e^-theta x
relative dx     +1         (1 + n theta dx^n)^(-1/n) dx            e^-theta dx
COM X           -1         (1 - n theta X^n)^(-1/n) X              e^+theta X
==============  =========  ======================================  ==============

Momenta transform as ``(1/2){(1 + s n theta q^n)^(1/n + 1), p}`` where ``q`` is
always the *position-type* partner, and ``s`` is the flow sign above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .fock import (
    FockConfig,
    FockError,
    OperatorMatrix,
    build_annihilation,
    build_com_rel,
    build_momentum,
    build_position,
    low_indices,
)
from .generators import GeneratorSpec, anti_hermiticity_error, build_generator

COM_SIGN = -1
REL_SIGN = +1
SINGLE_SIGN = +1


class DomainError(ValueError):
    """A fractional operator power is undefined on part of the spectrum."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NotAntiHermitianError(ValueError):
    pass


@dataclass
class TransformReport:
    spec: GeneratorSpec
    target: str
    residual: float
    subspace_dim: int
    domain_ok: bool

    @property
    def comparable(self) -> bool:
        return self.domain_ok and np.isfinite(self.residual)


@dataclass
class KOmegaPair:
    K_op: OperatorMatrix
    Omega_op: OperatorMatrix
    branch: str


# -- matrix exponential -----------------------------------------------------

def coupled_blocks(M: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected components of ``M``'s sparsity graph.

    Generators that conserve a quantity (parity, ``n1 - n2`` ...) split into
    independent blocks; exponentiating block by block is exact and far cheaper.
    """
    ncomp, labels = connected_components(csr_matrix(M != 0), directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(ncomp)]


def exponentiate(L: OperatorMatrix, theta: float) -> OperatorMatrix:
    """``exp(theta L)`` for anti-Hermitian ``L``.

    Uses the eigendecomposition of the Hermitian ``iL`` on each decoupled
    block, so the result is unitary to working precision.
    """
    m = L.entries
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    err = anti_hermiticity_error(L)
    if err > 1e-10 * scale:
        raise NotAntiHermitianError(
            f"generator is not anti-Hermitian (|L + L^dag| = {err:.3e})"
        )
    U = np.zeros_like(m)
    if theta == 0:
        np.fill_diagonal(U, 1.0)
        return L.like(U, "U")
    for idx in coupled_blocks(m):
        blk = np.ix_(idx, idx)
        h = 1j * m[blk]
        lam, V = np.linalg.eigh(0.5 * (h + h.conj().T))
        U[blk] = (V * np.exp(-1j * theta * lam)) @ V.conj().T
    return L.like(U, "U")


def unitarity_error(U: OperatorMatrix) -> float:
    """Spectral norm of ``U^dag U - I``, evaluated block by block."""
    worst = 0.0
    for idx in coupled_blocks(U.entries):
        u = U.entries[np.ix_(idx, idx)]
        d = u.conj().T @ u - np.eye(len(idx))
        worst = max(worst, float(np.linalg.norm(d, 2)))
    return worst


def conjugate(U: OperatorMatrix, A: OperatorMatrix) -> OperatorMatrix:
    """``U A U^dag``."""
    if U.dim != A.dim:
        raise FockError(f"dimension mismatch: {U.dim} vs {A.dim}")
    u = U.entries
    return A.like(u @ A.entries @ u.conj().T, A.name)


def conjugate_low(U: OperatorMatrix, A: OperatorMatrix, k: int) -> np.ndarray:
    """``P_k U A U^dag P_k`` computed from the ``k``-level rows of ``U`` only."""
    if U.dim != A.dim:
        raise FockError(f"dimension mismatch: {U.dim} vs {A.dim}")
    rows = U.entries[low_indices(U.structure, U.per_mode_dim, k), :]
    return rows @ A.entries @ rows.conj().T


# -- functional calculus ----------------------------------------------------

def spectrum(A: OperatorMatrix):
    """Eigenvalues and eigenvectors of a Hermitian operator."""
    m = A.entries
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if A.hermiticity_error() > 1e-10 * scale:
        raise FockError(f"{A.name or 'operator'} is not Hermitian")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def fn_of_hermitian(A: OperatorMatrix, f, spec=None) -> OperatorMatrix:
    """``f(A)`` through the eigendecomposition of Hermitian ``A``.

    ``f`` is applied to the eigenvalue array; non-finite values raise
    :class:`DomainError` naming the offending eigenvalue.  A precomputed
    ``spec = (eigenvalues, eigenvectors)`` may be passed to skip ``eigh``.
    """
    lam, V = spectrum(A) if spec is None else spec
    with np.errstate(all="ignore"):
        vals = np.asarray(f(lam), dtype=complex)
    if vals.shape == ():
        vals = np.full(lam.shape, vals)
    bad = ~np.isfinite(vals)
    if bad.any():
        ev = float(lam[np.argmax(bad)])
        raise DomainError(f"function undefined at eigenvalue {ev:.9g}", ev)
    return A.like((V * vals) @ V.conj().T)


def _real_power_base(lam, n, theta, sign):
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 + sign * n * theta * np.power(lam.astype(float), n)


def domain_minimum(A: OperatorMatrix, n: int, theta: float, sign: int, spec=None):
    """Smallest value of ``1 + sign n theta lambda^n`` and where it occurs."""
    lam = (spectrum(A) if spec is None else spec)[0]
    base = _real_power_base(lam, n, theta, sign)
    base = np.where(np.isfinite(base), base, -np.inf)
    i = int(np.argmin(base))
    return float(base[i]), float(lam[i])


def domain_guard(A: OperatorMatrix, n: int, theta: float, sign: int = 1,
                 margin: float = 0.0, spec=None) -> bool:
    """True iff ``1 + sign n theta lambda^n > margin`` on the whole spectrum.

    With ``margin = 0.5`` this rejects any ``theta`` within 50% of the
    nearest singular value (the base is linear in ``theta``).
    """
    if theta == 0 or n == 0:
        return True
    lo, _ = domain_minimum(A, n, theta, sign, spec)
    return lo > margin


def _require_domain(q, n, theta, sign, margin, spec):
    lo, ev = domain_minimum(q, n, theta, sign, spec)
    if not lo > margin:
        raise DomainError(
            f"1 + ({sign})*{n}*{theta:g}*lambda^{n} = {lo:.6g} <= {margin:g} "
            f"at eigenvalue lambda = {ev:.9g} of {q.name or 'operator'}",
            ev,
        )


def closed_form_position(pair, n: int, theta: float, flow_sign: int = 1,
                         margin: float = 0.0, spec=None) -> OperatorMatrix:
    """Predicted ``S q S^dag`` for ``S = exp(theta L_n)``.

    ``(1 + s n theta q^n)^(-1/n) q``; ``exp(-s theta) q`` at ``n = 0`` and the
    translation ``q - s theta`` at ``n = -1`` (both entire, no guard needed).
    """
    q = pair[0]
    if n == 0:
        return q * np.exp(-flow_sign * theta)
    if n == -1:
        return q - q.identity() * (flow_sign * theta)
    _require_domain(q, n, theta, flow_sign, margin, spec)

    def f(t):
        return t * _real_power_base(t, n, theta, flow_sign) ** (-1.0 / n)

    return fn_of_hermitian(q, f, spec)


def closed_form_momentum(pair, n: int, theta: float, flow_sign: int = 1,
                         margin: float = 0.0, spec=None) -> OperatorMatrix:
    """Predicted ``S p S^dag``: ``(1/2){(1 + s n theta q^n)^(1/n + 1), p}``."""
    q, p = pair
    if n == 0:
        return p * np.exp(flow_sign * theta)
    if n == -1:
        return p.like(p.entries.copy(), p.name)
    _require_domain(q, n, theta, flow_sign, margin, spec)

    def g(t):
        return _real_power_base(t, n, theta, flow_sign) ** (1.0 / n + 1.0)

    gq = fn_of_hermitian(q, g, spec)
    return (gq @ p + p @ gq) * 0.5


def k_omega(q: OperatorMatrix, n: int, theta: float, flow_sign: int = 1,
            branch: str = "single", spec=None) -> KOmegaPair:
    """``K = (1 + s n theta q^n)^(1/2)`` and ``Omega = (-2/n - 1) log K``.

    At ``n = 0``, ``K = I`` and ``Omega = -s theta I`` (the analytic limit).
    """
    if n == 0:
        eye = q.identity()
        return KOmegaPair(eye, eye * (-flow_sign * theta), branch)
    _require_domain(q, n, theta, flow_sign, 0.0, spec)
    if spec is None:
        spec = spectrum(q)
    K = fn_of_hermitian(q, lambda t: np.sqrt(_real_power_base(t, n, theta, flow_sign)), spec)
    Om = fn_of_hermitian(
        q, lambda t: (-2.0 / n - 1.0) * 0.5 * np.log(_real_power_base(t, n, theta, flow_sign)), spec
    )
    return KOmegaPair(K.like(K.entries, "K"), Om.like(Om.entries, "Omega"), branch)


def scalar_k_omega(n: float, theta: float, moment: float, flow_sign: int = 1):
    """Scalar ``(K, Omega)`` for a c-number ``q^n -> moment``."""
    if n == 0:
        return 1.0, -flow_sign * theta
    base = 1.0 + flow_sign * n * theta * moment
    if not base > 0:
        raise DomainError(f"1 + ({flow_sign})*{n}*{theta:g}*<q^n> = {base:.6g} <= 0")
    return float(np.sqrt(base)), float((-2.0 / n - 1.0) * 0.5 * np.log(base))


# -- two-mode reconstructions ----------------------------------------------

def _two_mode_laws(cfg: FockConfig, n: int, theta: float, margin: float):
    X, P, dx, dp = build_com_rel(cfg)
    sX = spectrum(X) if n not in (0, -1) else None
    sD = spectrum(dx) if n not in (0, -1) else None
    Xt = closed_form_position((X, P), n, theta, COM_SIGN, margin, sX)
    Pt = closed_form_momentum((X, P), n, theta, COM_SIGN, margin, sX)
    Dxt = closed_form_position((dx, dp), n, theta, REL_SIGN, margin, sD)
    Dpt = closed_form_momentum((dx, dp), n, theta, REL_SIGN, margin, sD)
    return {"X": Xt, "P": Pt, "dx": Dxt, "dp": Dpt}, (X, P, dx, dp), (sX, sD)


def mode_reconstruction(cfg: FockConfig, n: int, theta: float, margin: float = 0.0):
    """Transformed ``(a1(theta), a2(theta))`` assembled from the coordinate laws.

    ``x1 = X + dx/2``, ``x2 = X - dx/2`` (same for momenta) and
    ``a = sqrt(omega0/2) (x + i p / omega0)``.
    """
    laws, _, _ = _two_mode_laws(cfg, n, theta, margin)
    w = cfg.omega0
    c = np.sqrt(w / 2.0)
    x1 = laws["X"] + laws["dx"] * 0.5
    x2 = laws["X"] - laws["dx"] * 0.5
    p1 = laws["P"] + laws["dp"] * 0.5
    p2 = laws["P"] - laws["dp"] * 0.5
    a1 = (x1 + p1 * (1j / w)) * c
    a2 = (x2 + p2 * (1j / w)) * c
    return a1.like(a1.entries, "a1(theta)"), a2.like(a2.entries, "a2(theta)")


def _half_anticommutator_form(K, Om, a):
    """``(1/2) K (cosh(Om) a + sinh(Om) a^dag) + (1/2)(a cosh(Om) + a^dag sinh(Om)) K``."""
    ch = fn_of_hermitian(Om, np.cosh)
    sh = fn_of_hermitian(Om, np.sinh)
    ad = a.dag
    return (K @ (ch @ a + sh @ ad) + (a @ ch + ad @ sh) @ K) * 0.5


def mode_reconstruction_komega(cfg: FockConfig, n: int, theta: float):
    """Transformed modes written through the K / Omega operators.

    With ``a_pm = a1 +- a2`` each branch obeys
    ``a(theta) = (1/2) K (cosh Omega a + sinh Omega a^dag) + (1/2)(...) K``
    and ``a1 = (a_+ + a_-)/2``, ``a2 = (a_+ - a_-)/2``.
    """
    X, P, dx, dp = build_com_rel(cfg)
    kc = k_omega(X, n, theta, COM_SIGN, "com")
    kr = k_omega(dx, n, theta, REL_SIGN, "relative")
    a1, a2 = build_annihilation(cfg, 0), build_annihilation(cfg, 1)
    ap = _half_anticommutator_form(kc.K_op, kc.Omega_op, a1 + a2)
    am = _half_anticommutator_form(kr.K_op, kr.Omega_op, a1 - a2)
    return (ap + am) * 0.5, (ap - am) * 0.5


# -- comparison harness -----------------------------------------------------

def _residual(block: np.ndarray) -> float:
    return float(np.linalg.norm(block, 2)) if block.any() else 0.0


def transform_reports(cfg: FockConfig, spec: GeneratorSpec, k: int | None = None,
                      margin: float = 0.0, U: OperatorMatrix | None = None):
    """Compare conjugation with every closed-form law for one generator.

    Single mode checks ``x`` and ``p``; two modes check ``X, P, dx, dp`` and
    the reconstructed ``a1, a2``.  Out-of-domain laws are reported with
    ``domain_ok=False`` and a NaN residual.
    """
    k = cfg.subspace_dim if k is None else k
    if U is None:
        U = exponentiate(build_generator(cfg, spec), spec.theta)
    idx = low_indices(cfg.structure, cfg.per_mode_dim, k)

    def low(A):
        return A.entries[np.ix_(idx, idx)]

    reports = []
    if cfg.mode_count == 1:
        x, p = build_position(cfg), build_momentum(cfg)
        targets = {
            "x": (x, lambda: closed_form_position((x, p), spec.n, spec.theta, SINGLE_SIGN, margin)),
            "p": (p, lambda: closed_form_momentum((x, p), spec.n, spec.theta, SINGLE_SIGN, margin)),
        }
        for name, (op, law) in targets.items():
            try:
                pred = law()
            except DomainError:
                reports.append(TransformReport(spec, name, float("nan"), k, False))
                continue
            r = _residual(conjugate_low(U, op, k) - low(pred))
            reports.append(TransformReport(spec, name, r, k, True))
        return reports

    try:
        laws, (X, P, dx, dp), _ = _two_mode_laws(cfg, spec.n, spec.theta, margin)
    except DomainError:
        return [TransformReport(spec, t, float("nan"), k, False)
                for t in ("X", "P", "dx", "dp", "a1", "a2")]
    for name, op in (("X", X), ("P", P), ("dx", dx), ("dp", dp)):
        r = _residual(conjugate_low(U, op, k) - low(laws[name]))
        reports.append(TransformReport(spec, name, r, k, True))
    w = cfg.omega0
    c = np.sqrt(w / 2.0)
    for name, mode, sgn in (("a1", 0, 1), ("a2", 1, -1)):
        xq = laws["X"] + laws["dx"] * (0.5 * sgn)
        pq = laws["P"] + laws["dp"] * (0.5 * sgn)
        pred = (xq + pq * (1j / w)) * c
        r = _residual(conjugate_low(U, build_annihilation(cfg, mode), k) - low(pred))
        reports.append(TransformReport(spec, name, r, k, True))
    return reports


def bogoliubov_reports(cfg: FockConfig, theta: float, k: int | None = None,
                       U: OperatorMatrix | None = None):
    """Check the two-mode squeezing laws of ``G = a1 a2 - a1^dag a2^dag``.

    ``a1 -> a1 cosh + a2^dag sinh`` (and 1 <-> 2); ``X, dx, P, dp`` scale by
    ``e^theta, e^-theta, e^-theta, e^theta``.  Returns ``{name: residual}``.
    """
    if cfg.mode_count != 2:
        raise FockError("bogoliubov_reports needs mode_count=2")
    k = cfg.subspace_dim if k is None else k
    if U is None:
        U = exponentiate(build_generator(cfg, GeneratorSpec(0, theta, "bogoliubov")), theta)
    idx = low_indices(cfg.structure, cfg.per_mode_dim, k)
    ch, sh = np.cosh(theta), np.sinh(theta)
    a1, a2 = build_annihilation(cfg, 0), build_annihilation(cfg, 1)
    X, P, dx, dp = build_com_rel(cfg)
    preds = {
        "a1": (a1, a1 * ch + a2.dag * sh),
        "a2": (a2, a2 * ch + a1.dag * sh),
        "X": (X, X * np.exp(theta)),
        "dx": (dx, dx * np.exp(-theta)),
        "P": (P, P * np.exp(-theta)),
        "dp": (dp, dp * np.exp(theta)),
    }
    return {
        name: _residual(conjugate_low(U, op, k) - pred.entries[np.ix_(idx, idx)])
        for name, (op, pred) in preds.items()
    }
