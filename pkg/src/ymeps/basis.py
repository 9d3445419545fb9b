"""Inner products and Gram-Schmidt bases of the parameter-derivative fields.

Two inner products appear:

  ball:     (a, b) = int_{B^4} <grad_A^eps a, grad_A^eps b> + <a, b>
  weighted: (a, b) = int_{R^4} <grad_A^eps a, grad_A^eps b> + w <a, b>,
            w = 1 on the closed unit ball, (1+|x|^2)^{-2} outside

with the pointwise pairing the coefficient dot over the e_i basis.  All
integrals are taken over one shared quadrature rule per parameter point, so
orthonormality of a constructed basis is exact in the discrete product up to
round-off, independent of quadrature error.

Fields enter either as FormField, as two-chart ChartedField (split at
|x-p| = lam/4 by the rule's inner mask), or pre-evaluated as NodeField arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .forms import (
    FormField,
    NumericalError,
    QuadratureRule,
    ball_rule,
    domain_ball_rule,
    tail_report,
    weight_fn,
    weighted_r4_rule,
)
from .instanton import (
    DIRECTIONS,
    BackgroundConnection,
    ChartedField,
    ParamQ,
    combo_field,
    d2A_dp1p1,
    dA_dparam,
    datilde_dparam,
    extended_connection,
    glued_connection,
)
from .liealg import AlgElement, exp_map

__all__ = [
    "NodeField",
    "InnerContext",
    "TailWarning",
    "GramBasis",
    "inner_ball",
    "inner_weighted",
    "mgs_coefficients",
    "gram_schmidt_ball",
    "gram_schmidt_weighted",
    "project_perp",
    "basis_directional_derivative",
]


class TailWarning(UserWarning):
    """Exterior quadrature shells show no decay: the integral may diverge."""


@dataclass
class NodeField:
    """A field sampled on a quadrature rule: values and spatial jacobian."""

    rule: QuadratureRule
    val: np.ndarray            # (N,3,4)
    jac: Optional[np.ndarray]  # (N,3,4,4) or None when not needed
    _grad: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    _grad_key: Optional[int] = field(default=None, repr=False, compare=False)

    def __add__(self, other):
        j = None if self.jac is None or other.jac is None else self.jac + other.jac
        return NodeField(self.rule, self.val + other.val, j)

    def __sub__(self, other):
        j = None if self.jac is None or other.jac is None else self.jac - other.jac
        return NodeField(self.rule, self.val - other.val, j)

    def __mul__(self, c):
        return NodeField(self.rule, self.val * c,
                         None if self.jac is None else self.jac * c)

    __rmul__ = __mul__


_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k, _s in ((0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
                       (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0)):
    _EPS3[_i, _j, _k] = _s


def _cov_grad(Aval, val, jac, eps):
    """grad_A^eps a: out[n,a,mu,nu] = d_nu a_mu + eps [A_nu, a_mu] (cross bracket)."""
    br = np.einsum("abc,nbv,ncu->nauv", _EPS3, Aval, val, optimize=True)
    return jac + eps * br


@dataclass
class InnerContext:
    """Shared quadrature rule, connection samples, and chart mask for one q."""

    rule: QuadratureRule
    eps: float
    Aval: np.ndarray                 # (N,3,4) connection in the H^1 term
    weighted: bool = False
    wvals: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mask is None:
            self.mask = self.rule.mask_inner
        if self.weighted and self.wvals is None:
            self.wvals = weight_fn(self.rule.nodes)

    # -- evaluation -----------------------------------------------------
    def arrays(self, f, need_jac=True) -> NodeField:
        if isinstance(f, NodeField):
            if f.rule is not self.rule:
                raise ValueError("NodeField sampled on a different rule")
            return f
        X = self.rule.nodes
        if isinstance(f, ChartedField):
            val = f.value_split(X, self.mask)
            jac = f.jac_split(X, self.mask) if need_jac else None
        else:
            val = f.value(X)
            jac = f.jac(X) if need_jac else None
        return NodeField(self.rule, val, jac)

    def grad_of(self, nf: NodeField) -> np.ndarray:
        """Covariant gradient of a node field, cached per context."""
        if nf._grad_key == id(self) and nf._grad is not None:
            return nf._grad
        g = _cov_grad(self.Aval, nf.val, nf.jac, self.eps)
        nf._grad = g
        nf._grad_key = id(self)
        return g

    # -- pairing --------------------------------------------------------
    def density(self, fa: NodeField, fb: NodeField) -> np.ndarray:
        ga = self.grad_of(fa)
        gb = self.grad_of(fb)
        d = np.einsum("namu,namu->n", ga, gb, optimize=False)
        l2 = np.einsum("nam,nam->n", fa.val, fb.val, optimize=False)
        if self.weighted:
            return d + self.wvals * l2
        return d + l2

    def inner_nf(self, fa: NodeField, fb: NodeField, warn: bool = True) -> float:
        dens = self.density(fa, fb)
        value = float(np.sum(self.rule.weights * dens))
        if not np.isfinite(value):
            raise NumericalError("non-finite inner product")
        if self.weighted and warn:
            rep = tail_report(self.rule, dens)
            if not rep["tail_converged"]:
                warnings.warn(
                    f"exterior shells do not decay (ratio {rep['shell_ratio']:.3g});"
                    " reported value is the truncated integral", TailWarning)
        return value

    def inner(self, a, b, warn: bool = True) -> float:
        return self.inner_nf(self.arrays(a), self.arrays(b), warn=warn)

    def norm(self, a) -> float:
        return float(np.sqrt(max(self.inner(self.arrays(a), self.arrays(a)), 0.0)))


def _connection_samples(A, rule, mask) -> np.ndarray:
    if A is None:
        return np.zeros((rule.nodes.shape[0], 3, 4))
    if isinstance(A, ChartedField):
        return A.value_split(rule.nodes, mask)
    return A.value(rule.nodes)


def ball_context(A, eps, rule=None, tol=1e-4) -> InnerContext:
    """Context for the B^4 product; A charted (preferred), FormField, or None."""
    if rule is None:
        if isinstance(A, ChartedField):
            rule = domain_ball_rule(A.p, A.lam, tol=tol)
        else:
            rule = ball_rule(np.zeros(4), 0.25, R=1.0, tol=tol)
    mask = rule.mask_inner
    return InnerContext(rule, eps, _connection_samples(A, rule, mask), mask=mask)


def weighted_context(A, eps, rule=None, tol=1e-4) -> InnerContext:
    if rule is None:
        if isinstance(A, ChartedField):
            rule = weighted_r4_rule(A.p, A.lam, tol=tol)
        else:
            rule = weighted_r4_rule(np.zeros(4), 0.25, tol=tol)
    mask = rule.mask_inner
    return InnerContext(rule, eps, _connection_samples(A, rule, mask),
                        weighted=True, mask=mask)


def inner_ball(alpha, beta, A, eps, rule=None, tol=1e-4) -> float:
    """(alpha, beta) over B^4: covariant H^1 pairing with connection A."""
    return ball_context(A, eps, rule=rule, tol=tol).inner(alpha, beta)


def inner_weighted(alpha, beta, Atilde, eps, rule=None, tol=1e-4) -> float:
    """(alpha, beta) over R^4 with the weighted L^2 term.

    The derivative term is unweighted; the L^2 term carries w.  When the
    exterior shells of the integrand fail to decay, the truncated value is
    still returned and a TailWarning is issued.
    """
    return weighted_context(Atilde, eps, rule=rule, tol=tol).inner(alpha, beta)


# ---------------------------------------------------------------------------
# Gram-Schmidt


def mgs_coefficients(G: np.ndarray, reorth: int = 1) -> np.ndarray:
    """Lower-triangular C with C G C^T = Id, via modified Gram-Schmidt.

    Row i of C expresses the i-th orthonormal element in the raw fields.  One
    reorthogonalization pass (reorth=1) guards against the large norm spread
    of the raw fields.  Raises NumericalError with the condition number when
    the Gram matrix is numerically singular.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError("Gram matrix must be square")
    rows = []
    for i in range(n):
        u = np.zeros(n)
        u[i] = 1.0
        for _ in range(1 + reorth):
            for c in rows:
                u = u - (u @ G @ c) * c
        nrm2 = float(u @ G @ u)
        if not np.isfinite(nrm2) or nrm2 <= 1e-24 * max(G[i, i], 1.0):
            cond = float(np.linalg.cond(G))
            raise NumericalError(
                f"raw fields numerically dependent at step {i}"
                f" (Gram condition number {cond:.3e})")
        rows.append(u / np.sqrt(nrm2))
    C = np.stack(rows)
    return np.tril(C)  # entries above the diagonal are exactly 0 by construction


@dataclass
class GramBasis:
    """An orthonormal basis a_i = sum_j c_ij f_j of the eight raw fields.

    Rows of ``coeff`` are the expansion coefficients in the raw-field order
    (p1..p4, xi1..xi3, lam); the same rows are the induced parameter-space
    vector fields q_i.  ``ctx`` holds the shared rule and connection samples
    defining the inner product ("ball" or "weighted").
    """

    kind: str
    coeff: np.ndarray            # (8,8) lower triangular, positive diagonal
    raw_fields: list             # the f_j as ChartedField
    ctx: InnerContext
    raw_gram: np.ndarray
    raw_nodefields: list = field(default_factory=list, repr=False)

    @property
    def q_vectors(self) -> np.ndarray:
        return self.coeff

    def field(self, i: int) -> ChartedField:
        """The i-th orthonormal field (1-based) as a charted field."""
        return combo_field(self.raw_fields, self.coeff[i - 1], name=f"a{i}")

    def node_field(self, i: int) -> NodeField:
        c = self.coeff[i - 1]
        out = None
        for cj, nf in zip(c, self.raw_nodefields):
            if cj == 0.0:
                continue
            out = nf * cj if out is None else out + nf * cj
        return out

    def gram_residual(self) -> float:
        got = self.coeff @ self.raw_gram @ self.coeff.T
        return float(np.max(np.abs(got - np.eye(len(self.coeff)))))


def _raw_gram(ctx: InnerContext, nodefields) -> np.ndarray:
    """All pairwise inner products at once via one weighted matrix product."""
    N = ctx.rule.nodes.shape[0]
    sw = np.sqrt(ctx.rule.weights)
    sl = sw * np.sqrt(ctx.wvals) if ctx.weighted else sw
    rows = []
    for nf in nodefields:
        g = (ctx.grad_of(nf).reshape(N, -1) * sw[:, None]).ravel()
        v = (nf.val.reshape(N, -1) * sl[:, None]).ravel()
        rows.append(np.concatenate([g, v]))
    M = np.stack(rows)
    G = M @ M.T
    if not np.all(np.isfinite(G)):
        raise NumericalError("non-finite Gram matrix")
    return G


def _basis_from_fields(kind, ctx, fields) -> GramBasis:
    nfs = [ctx.arrays(f) for f in fields]
    G = _raw_gram(ctx, nfs)
    C = mgs_coefficients(G)
    return GramBasis(kind, C, list(fields), ctx, G, nfs)


def gram_schmidt_ball(q: ParamQ, bg: BackgroundConnection = None,
                      pi2: str = "model", tol: float = 1e-4,
                      rule: QuadratureRule = None) -> GramBasis:
    """Orthonormalize the eight parameter derivatives of the glued family."""
    bg = BackgroundConnection() if bg is None else bg
    A = glued_connection(q, bg, pi2)
    ctx = ball_context(A, q.eps, rule=rule, tol=tol)
    raw = [dA_dparam(q, d, bg, pi2) for d in DIRECTIONS]
    return _basis_from_fields("ball", ctx, raw)


def gram_schmidt_weighted(q: ParamQ, ball_basis: GramBasis = None,
                          bg: BackgroundConnection = None, pi2: str = "model",
                          tol: float = 1e-4,
                          rule: QuadratureRule = None) -> GramBasis:
    """Orthonormalize the extension's derivatives along the ball-basis q_i.

    Inputs are the fields obtained by applying the ball basis' parameter
    vector fields to the extension; the product is the weighted one with the
    extension itself in the derivative term.
    """
    if ball_basis is None:
        ball_basis = gram_schmidt_ball(q, bg, pi2, tol=tol)
    At = extended_connection(q)
    ctx = weighted_context(At, q.eps, rule=rule, tol=tol)
    raw_dirs = [datilde_dparam(q, d) for d in DIRECTIONS]
    tilde = [combo_field(raw_dirs, ball_basis.coeff[i], name=f"at{i+1}")
             for i in range(len(DIRECTIONS))]
    return _basis_from_fields("weighted", ctx, tilde)


def project_perp(v, basis: GramBasis, A=None, eps=None,
                 rule: QuadratureRule = None) -> NodeField:
    """v minus its orthogonal projection onto span{a_i}, on the shared rule.

    A/eps/rule arguments are accepted for signature completeness; the pairing
    is the one the basis was built with (they must agree when given).
    """
    ctx = basis.ctx
    if eps is not None and eps != ctx.eps:
        raise ValueError("eps disagrees with the basis inner product")
    if rule is not None and rule is not ctx.rule:
        raise ValueError("projection must use the basis' shared rule")
    nv = ctx.arrays(v)
    out = nv
    for i in range(1, len(basis.coeff) + 1):
        ai = basis.node_field(i)
        out = out - ctx.inner_nf(nv, ai, warn=False) * ai
    return out


# ---------------------------------------------------------------------------
# directional derivatives of the basis fields


def _shift_along(q: ParamQ, vec: np.ndarray, t: float) -> ParamQ:
    """Flow the parameter point by t along a coefficient vector (p, xi, lam)."""
    dp = t * vec[0:4]
    xi = t * vec[4:7]
    g = q.g * exp_map(AlgElement(*xi))
    return ParamQ(p=q.p + dp, g=g, lam=q.lam + t * vec[7], eps=q.eps,
                  d0=q.d0, lam0=q.lam0, D1=q.D1, D2=q.D2)


def _basis_field_at(q: ParamQ, i: int, ctx: InnerContext,
                    bg: BackgroundConnection, pi2: str) -> NodeField:
    """a_i at a (possibly shifted) q, sampled on the base rule and base mask."""
    A = glued_connection(q, bg, pi2)
    shifted_ctx = InnerContext(ctx.rule, q.eps,
                               _connection_samples(A, ctx.rule, ctx.mask),
                               mask=ctx.mask)
    raw = [dA_dparam(q, d, bg, pi2) for d in DIRECTIONS]
    nfs = [shifted_ctx.arrays(f) for f in raw]
    C = mgs_coefficients(_raw_gram(shifted_ctx, nfs))
    out = None
    for cj, nf in zip(C[i - 1], nfs):
        if cj == 0.0:
            continue
        out = nf * cj if out is None else out + nf * cj
    return out


def basis_directional_derivative(q: ParamQ, i: int, j: int,
                                 bg: BackgroundConnection = None,
                                 pi2: str = "model",
                                 basis: GramBasis = None,
                                 h_rel: float = 1e-3,
                                 diagnostics: dict = None) -> NodeField:
    """Central-difference derivative of a_i along the vector field q_j.

    The whole basis is rebuilt at the flowed parameter points; every field is
    sampled on the base rule with the base chart mask, so differences are
    taken in a fixed chart and gauge.  Richardson extrapolation over steps
    (h, h/2); ``diagnostics`` (optional dict) receives the step-halving
    relative change and the step used.
    """
    bg = BackgroundConnection() if bg is None else bg
    if basis is None:
        basis = gram_schmidt_ball(q, bg, pi2)
    ctx = basis.ctx
    vec = basis.coeff[j - 1]
    vnorm = float(np.linalg.norm(vec))
    if vnorm == 0.0:
        raise NumericalError("q_j vector vanishes; no flow direction")
    t = h_rel * q.lam / vnorm

    def fd(step: float) -> NodeField:
        plus = _basis_field_at(_shift_along(q, vec, step), i, ctx, bg, pi2)
        minus = _basis_field_at(_shift_along(q, vec, -step), i, ctx, bg, pi2)
        return (plus - minus) * (1.0 / (2.0 * step))

    d1 = fd(t)
    d2 = fd(t / 2.0)
    rich = d2 * (4.0 / 3.0) - d1 * (1.0 / 3.0)
    if diagnostics is not None:
        num = np.sqrt(max(ctx.inner_nf(rich - d2, rich - d2, warn=False), 0.0))
        den = np.sqrt(max(ctx.inner_nf(rich, rich, warn=False), 1e-300))
        diagnostics["step"] = t
        diagnostics["halving_rel_change"] = float(num / den)
    return rich
