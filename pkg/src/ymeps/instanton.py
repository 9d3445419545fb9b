"""The glued connection family A(q), its extension, and parameter derivatives.

Everything evaluable here is a list of Terms of the shape

    coef * [cutoff factor] * [3x3 algebra matrix] @ atom(y or x; lam)

where the atoms are closed-form radial profiles times linear maps:

    I1 : 2 (eta ybar-map y) / (lam^2 + s)            s = |x-p|^2, y = x-p
    I2 : 2 (etabar y) (1/s - 1/(lam^2+s))
    H  : 2 (etabar y) lam^2 rho(s)                   model correction profile
    bg : Cmat * chi(|x|^2)                           background 1-form

Parameter derivatives (d/dp_i, d/dlam, rotation directions xi_i) act on term
lists symbolically, so the derivative fields of the family — including the
differences between the glued and extended families — are exact closed forms,
never numerical differences.  The su(2) coefficients are on e_i = u_i/2; the
eta/etabar tables and all radial laws were frozen from a symbolic quaternion
expansion (see the coefficient-table tests).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .forms import FormField
from .liealg import GroupElement, adjoint_matrix, so3_generator

__all__ = [
    "ETA",
    "ETABAR",
    "ParamQ",
    "ParamError",
    "CutoffSpec",
    "BackgroundConnection",
    "ChartedField",
    "ChartedConnection",
    "Term",
    "DIRECTIONS",
    "i1_form",
    "i2_form",
    "cutoff",
    "beta_profile",
    "glued_connection",
    "extended_connection",
    "difference_b",
    "dA_dparam",
    "datilde_dparam",
    "ddiff_dparam",
    "d2A_dp1p1",
    "d2Atilde_dp1p1",
    "transition_quaternion",
]


# ---------------------------------------------------------------------------
# 't Hooft tensors (self-dual eta, anti-self-dual etabar), frozen from the
# symbolic expansion of Im[(x-p) dxbar] and Im[lam^2 (xbar-pbar) dx / s].

def _build_eta(bar: bool) -> np.ndarray:
    eps3 = {(0, 1, 2): 1.0, (1, 2, 0): 1.0, (2, 0, 1): 1.0,
            (0, 2, 1): -1.0, (2, 1, 0): -1.0, (1, 0, 2): -1.0}
    T = np.zeros((3, 4, 4))
    for a in range(3):
        T[a, 0, a + 1] = -1.0 if bar else 1.0
        T[a, a + 1, 0] = 1.0 if bar else -1.0
        for (i, b, c), v in eps3.items():
            if i == a:
                T[a, b + 1, c + 1] = v
    return T

ETA = _build_eta(False)
ETABAR = _build_eta(True)


# ---------------------------------------------------------------------------
# radial profiles f(s, lam) with s- and lam-derivative channels


def rad_i1(s, lam, ds=0, dlam=0):
    """f = 1/(lam^2+s); returns d^ds/ds^ds d^dlam/dlam^dlam f."""
    q = lam * lam + s
    k = ds
    if dlam == 0:
        return (-1.0) ** k * math.factorial(k) * q ** (-(k + 1))
    # d/dlam (-1)^k k! q^{-(k+1)} = (-1)^{k+1} (k+1)! 2 lam q^{-(k+2)}
    return (-1.0) ** (k + 1) * math.factorial(k + 1) * 2 * lam * q ** (-(k + 2))


def rad_i2(s, lam, ds=0, dlam=0):
    """f = lam^2/(s(lam^2+s)) = 1/s - 1/(lam^2+s) (partial fractions)."""
    q = lam * lam + s
    k = ds
    if dlam == 0:
        return (-1.0) ** k * math.factorial(k) * (s ** (-(k + 1)) - q ** (-(k + 1)))
    # f_lam = 2 lam / q^2; d^k/ds^k = (-1)^k (k+1)! 2 lam q^{-(k+2)}
    return (-1.0) ** k * math.factorial(k + 1) * 2 * lam * q ** (-(k + 2))


def _rho(s, k):
    """rho = (1-4s)^3 on s < 1/4, else 0; k-th s-derivative (C^2 at the edge)."""
    u = 1.0 - 4.0 * s
    pos = u > 0
    if k == 0:
        return np.where(pos, u ** 3, 0.0)
    if k == 1:
        return np.where(pos, -12.0 * u ** 2, 0.0)
    if k == 2:
        return np.where(pos, 96.0 * u, 0.0)
    if k == 3:
        return np.where(pos, -384.0, 0.0)
    return np.zeros_like(s)


def rad_model_h(s, lam, ds=0, dlam=0):
    """f = lam^2 rho(s) for the model correction h."""
    if dlam == 0:
        return lam * lam * _rho(s, ds)
    return 2.0 * lam * _rho(s, ds)


# ---------------------------------------------------------------------------
# cutoff profile: C^3 smoothstep, 1 on [0,1], 0 on [2, inf)

_S_COEF = (35.0, -84.0, 70.0, -20.0)  # 35u^4 - 84u^5 + 70u^6 - 20u^7


def beta_profile(t, order=0):
    """k-th t-derivative of the transition profile beta(t)."""
    t = np.asarray(t, dtype=float)
    u = np.clip(t - 1.0, 0.0, 1.0)
    if order == 0:
        S = ((( _S_COEF[3] * u + _S_COEF[2]) * u + _S_COEF[1]) * u + _S_COEF[0]) * u ** 4
        return np.where(t <= 1.0, 1.0, np.where(t >= 2.0, 0.0, 1.0 - S))
    mid = (t > 1.0) & (t < 2.0)
    if order == 1:
        d = 140 * u ** 3 - 420 * u ** 4 + 420 * u ** 5 - 140 * u ** 6
    elif order == 2:
        d = 420 * u ** 2 - 1680 * u ** 3 + 2100 * u ** 4 - 840 * u ** 5
    elif order == 3:
        d = 840 * u - 5040 * u ** 2 + 8400 * u ** 3 - 4200 * u ** 4
    elif order == 4:
        d = 840 - 10080 * u + 25200 * u ** 2 - 16800 * u ** 3
    else:
        raise ValueError("profile derivatives available to order 4")
    return np.where(mid, -d, 0.0)


def _profile_w(w, order=0):
    """Derivatives of P(w) := beta(sqrt(w)) with respect to w."""
    w = np.asarray(w, dtype=float)
    t = np.sqrt(np.maximum(w, 0.0))
    if order == 0:
        return beta_profile(t, 0)
    # all higher derivatives are supported on the transition band 1 < t < 2;
    # divide only there so tiny t never produces 0/0
    mid = (t > 1.0) & (t < 2.0)
    ts = np.where(mid, t, 1.5)
    b1 = beta_profile(ts, 1)
    if order == 1:
        out = b1 / (2 * ts)
    elif order == 2:
        b2 = beta_profile(ts, 2)
        out = b2 / (4 * ts ** 2) - b1 / (4 * ts ** 3)
    elif order == 3:
        b2 = beta_profile(ts, 2)
        b3 = beta_profile(ts, 3)
        out = b3 / (8 * ts ** 3) - 3 * b2 / (8 * ts ** 4) + 3 * b1 / (8 * ts ** 5)
    elif order == 4:
        b2 = beta_profile(ts, 2)
        b3 = beta_profile(ts, 3)
        b4 = beta_profile(ts, 4)
        out = (b4 / (16 * ts ** 4) - 6 * b3 / (16 * ts ** 5)
               + 15 * b2 / (16 * ts ** 6) - 15 * b1 / (16 * ts ** 7))
    else:
        raise ValueError("order must be 0..4")
    return np.where(mid, out, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """The transition profile: C^3, monotone, 1 on [0,1], 0 on [2,inf)."""

    degree: int = 7

    def value(self, t):
        return beta_profile(t, 0)

    def derivative(self, t, order):
        return beta_profile(t, order)


def cutoff(lam: float, p, scale: float, x, order: int = 0):
    """beta(|x-p|/scale) (scale is lam or lam/4); radial t-derivative of given order.

    order=k returns d^k/dt^k beta evaluated at t = |x-p|/scale; spatial and
    parameter derivatives used in the fields go through the atom channels.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    t = np.linalg.norm(X - np.asarray(p, dtype=float), axis=1) / scale
    out = beta_profile(t, order)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# atoms


def _scalar_radial_derivs(Y, f, ydirs):
    """d^{|ydirs|}/dy... of f(s), s = |Y|^2, given f = [f0, f1, f2, f3(, f4)]."""
    k = len(ydirs)
    if k == 0:
        return f[0]
    if k == 1:
        (e,) = ydirs
        return 2.0 * Y[:, e] * f[1]
    if k == 2:
        e1, e2 = ydirs
        d = 2.0 * f[1] if e1 == e2 else 0.0
        return d + 4.0 * Y[:, e1] * Y[:, e2] * f[2]
    if k == 3:
        a, b, c = ydirs
        out = 4.0 * f[2] * ((b == c) * Y[:, a] + (a == c) * Y[:, b] + (a == b) * Y[:, c])
        return out + 8.0 * f[3] * Y[:, a] * Y[:, b] * Y[:, c]
    raise ValueError("scalar radial derivatives implemented to order 3")


class LinRadAtom:
    """(M y) * f(s, lam): linear map times radial profile, bound to (p, lam).

    M: (3,4,4) including any constant coefficient factors.  eval returns
    (N,3,4) arrays of the mixed partial d_y^{ydirs} d_lam^{dlam}.
    """

    def __init__(self, M, radial, p, lam):
        self.M = np.asarray(M, dtype=float)
        self.radial = radial
        self.p = np.asarray(p, dtype=float)
        self.lam = float(lam)

    def eval(self, X, ydirs=(), dlam=0):
        Y = X - self.p
        s = np.sum(Y * Y, axis=1)
        f = [self.radial(s, self.lam, ds=j, dlam=dlam) for j in range(4)]
        M, k = self.M, len(ydirs)
        My = np.einsum("auv,nv->nau", M, Y)
        if k == 0:
            return My * f[0][:, None, None]
        if k == 1:
            (e,) = ydirs
            return (M[None, :, :, e] * f[0][:, None, None]
                    + My * (2.0 * Y[:, e] * f[1])[:, None, None])
        if k == 2:
            e1, e2 = ydirs
            out = (M[None, :, :, e1] * (2.0 * Y[:, e2] * f[1])[:, None, None]
                   + M[None, :, :, e2] * (2.0 * Y[:, e1] * f[1])[:, None, None])
            rad = (2.0 * f[1] if e1 == e2 else 0.0) + 4.0 * Y[:, e1] * Y[:, e2] * f[2]
            return out + My * rad[:, None, None]
        if k == 3:
            a, b, c = ydirs
            out = (M[None, :, :, a] * _scalar_radial_derivs(Y, f, (b, c))[:, None, None]
                   + M[None, :, :, b] * _scalar_radial_derivs(Y, f, (a, c))[:, None, None]
                   + M[None, :, :, c] * _scalar_radial_derivs(Y, f, (a, b))[:, None, None])
            return out + My * _scalar_radial_derivs(Y, f, (a, b, c))[:, None, None]
        raise ValueError("atom derivatives implemented to order 3")


class BetaAtom:
    """Cutoff factor beta(c |x-p| / lam) = P(w), w = c^2 s / lam^2."""

    def __init__(self, c, p, lam):
        self.c = float(c)
        self.p = np.asarray(p, dtype=float)
        self.lam = float(lam)

    def eval(self, X, ydirs=(), dlam=0):
        Y = X - self.p
        s = np.sum(Y * Y, axis=1)
        a = self.c ** 2 / self.lam ** 2
        w = a * s
        k_needed = len(ydirs) + 1
        P = [_profile_w(w, j) for j in range(k_needed + 1)]
        if dlam == 0:
            f = [a ** j * P[j] for j in range(k_needed)]
        else:
            # d/dlam [a^j P^(j)(w)] = -(2/lam) a^j (j P^(j) + w P^(j+1))
            f = [-(2.0 / self.lam) * a ** j * (j * P[j] + w * P[j + 1])
                 for j in range(k_needed)]
        f = f + [np.zeros_like(s)] * (4 - len(f))
        return _scalar_radial_derivs(Y, f, ydirs)


class BgAtom:
    """Background 1-form Cmat * chi(|x|^2), chi = (1-sigma)^3 on the unit ball."""

    def __init__(self, Cmat, amplitude=1.0):
        self.C = np.asarray(Cmat, dtype=float) * amplitude

    @staticmethod
    def _chi(sig, k):
        u = 1.0 - sig
        pos = u > 0
        if k == 0:
            return np.where(pos, u ** 3, 0.0)
        if k == 1:
            return np.where(pos, -3.0 * u ** 2, 0.0)
        if k == 2:
            return np.where(pos, 6.0 * u, 0.0)
        if k == 3:
            return np.where(pos, -6.0, 0.0)
        return np.zeros_like(sig)

    def eval(self, X, ydirs=(), dlam=0):
        if dlam > 0:
            return np.zeros((X.shape[0], 3, 4))
        sig = np.sum(X * X, axis=1)
        f = [self._chi(sig, j) for j in range(4)]
        scal = _scalar_radial_derivs(X, f, ydirs)
        return self.C[None, :, :] * scal[:, None, None]


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Term:
    """coef * beta-factor * (mat @ atom), with symbolic derivative bookkeeping."""

    coef: float
    lie: object
    lie_ydirs: tuple = ()
    lie_dlam: int = 0
    beta: Optional[object] = None
    beta_ydirs: tuple = ()
    beta_dlam: int = 0
    mat: Optional[np.ndarray] = None
    conjugated: bool = False
    x_based: bool = False


def _atom_eval(memo, atom, X, ydirs, dlam):
    key = (id(atom), tuple(sorted(ydirs)), dlam)
    if key not in memo:
        memo[key] = atom.eval(X, tuple(sorted(ydirs)), dlam)
    return memo[key]


def _term_value(memo, t: Term, X, extra_ydirs=()):
    """Value of a term with extra spatial derivatives, Leibniz-expanded."""
    n_extra = len(extra_ydirs)
    out = None
    # distribute extra derivatives between the beta factor and the atom
    idx = range(n_extra)
    for r in range(n_extra + 1):
        for sel in combinations(idx, r):
            beta_dirs = tuple(extra_ydirs[i] for i in sel)
            lie_dirs = tuple(extra_ydirs[i] for i in idx if i not in sel)
            if t.beta is None and beta_dirs:
                continue
            v = _atom_eval(memo, t.lie, X, t.lie_ydirs + lie_dirs, t.lie_dlam)
            if t.mat is not None:
                v = np.einsum("ab,nbu->nau", t.mat, v)
            if t.beta is not None:
                b = _atom_eval(memo, t.beta, X, t.beta_ydirs + beta_dirs, t.beta_dlam)
                v = v * b[:, None, None]
            v = t.coef * v
            out = v if out is None else out + v
    return out


def terms_value(terms, X):
    X = np.asarray(X, dtype=float)
    out = np.zeros((X.shape[0], 3, 4))
    memo = {}
    for t in terms:
        out += _term_value(memo, t, X)
    return out


def terms_jac(terms, X):
    X = np.asarray(X, dtype=float)
    out = np.zeros((X.shape[0], 3, 4, 4))
    memo = {}
    for t in terms:
        for nu in range(4):
            out[..., nu] += _term_value(memo, t, X, (nu,))
    return out


def terms_hess(terms, X):
    X = np.asarray(X, dtype=float)
    out = np.zeros((X.shape[0], 3, 4, 4, 4))
    memo = {}
    for t in terms:
        for nu in range(4):
            for rho in range(nu, 4):
                v = _term_value(memo, t, X, (nu, rho))
                out[..., nu, rho] += v
                if rho != nu:
                    out[..., rho, nu] += v
    return out


def scale_terms(terms, c):
    return [dataclasses.replace(t, coef=t.coef * c) for t in terms]


def d_dp(terms, i):
    """d/dp_i of a term list (0-based coordinate index i)."""
    out = []
    for t in terms:
        if not t.x_based:
            out.append(dataclasses.replace(
                t, coef=-t.coef, lie_ydirs=t.lie_ydirs + (i,)))
        if t.beta is not None:
            out.append(dataclasses.replace(
                t, coef=-t.coef, beta_ydirs=t.beta_ydirs + (i,)))
    return out


def d_dlam(terms):
    out = []
    for t in terms:
        if not t.x_based:
            out.append(dataclasses.replace(t, lie_dlam=t.lie_dlam + 1))
        if t.beta is not None:
            out.append(dataclasses.replace(t, beta_dlam=t.beta_dlam + 1))
    return out


def d_dxi(terms, i):
    """Rotation direction at g via the flow t -> g exp(t e_i).

    d/dt Ad(g exp(t e_i)) = Ad(g) ad(e_i), so the conjugation matrix picks up
    a generator on the right; unconjugated factors do not move.
    """
    L = so3_generator(i)
    out = []
    for t in terms:
        if not t.conjugated:
            continue
        mat = L if t.mat is None else t.mat @ L
        out.append(dataclasses.replace(t, mat=mat))
    return out


# ---------------------------------------------------------------------------
# parameters, charted fields


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class ParamQ:
    """Gluing parameter q = (p, [g], lam) with its eps and admissibility bounds."""

    p: np.ndarray
    g: GroupElement
    lam: float
    eps: float
    d0: float = 0.6
    lam0: float = 0.26
    D1: float = 0.5
    D2: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.p.shape != (4,):
            raise ParamError("p must be a point of R^4")
        if not (0 < 2 * self.lam0 < self.d0):
            raise ParamError("need 0 < 2*lam0 < d0")
        if np.linalg.norm(self.p) >= 1.0 - self.d0:
            raise ParamError(f"|p| = {np.linalg.norm(self.p):.4f} not < 1 - d0 = {1-self.d0}")
        if not (0 < self.lam < self.lam0):
            raise ParamError(f"lam = {self.lam} not in (0, lam0 = {self.lam0})")
        if not (self.eps > 0):
            raise ParamError("eps must be positive")
        if not (self.D1 * self.eps < self.lam ** 2 < self.D2 * self.eps):
            raise ParamError(
                f"lam^2 = {self.lam**2:.5g} not in (D1*eps, D2*eps) = "
                f"({self.D1*self.eps:.5g}, {self.D2*self.eps:.5g})")

    @staticmethod
    def default(eps: float, D: float = 1.0, p=None, g=None) -> "ParamQ":
        p = np.zeros(4) if p is None else np.asarray(p, dtype=float)
        g = GroupElement.identity() if g is None else g
        return ParamQ(p=p, g=g, lam=float(np.sqrt(D * eps)), eps=float(eps))

    def shifted(self, dp=None, dlam=0.0) -> "ParamQ":
        p = self.p + (0 if dp is None else np.asarray(dp))
        return ParamQ(p=p, g=self.g, lam=self.lam + dlam, eps=self.eps,
                      d0=self.d0, lam0=self.lam0, D1=self.D1, D2=self.D2)


# default background coefficient pattern: fixed, asymmetric, order-one C^1 norm
DEFAULT_BG_CMAT = np.array([
    [0.6, 0.0, 0.3, 0.0],
    [0.0, 0.5, 0.0, 0.2],
    [0.1, 0.0, 0.4, 0.0],
])


@dataclass(frozen=True)
class BackgroundConnection:
    """Smooth compactly supported stand-in background: Cmat * (1-|x|^2)^3."""

    Cmat: np.ndarray = None
    amplitude: float = 0.5

    def __post_init__(self):
        C = DEFAULT_BG_CMAT if self.Cmat is None else np.asarray(self.Cmat, float)
        object.__setattr__(self, "Cmat", C)

    @staticmethod
    def zero() -> "BackgroundConnection":
        return BackgroundConnection(Cmat=np.zeros((3, 4)), amplitude=0.0)

    def atom(self) -> BgAtom:
        return BgAtom(self.Cmat, self.amplitude)

    def form_field(self) -> FormField:
        a = self.atom()
        terms = [Term(1.0, lie=a, x_based=True)]
        return terms_form_field(terms, domain="ball", name="bg")


def terms_form_field(terms, domain="r4", name="") -> FormField:
    return FormField(1, lambda X: terms_value(terms, X),
                     lambda X: terms_jac(terms, X),
                     lambda X: terms_hess(terms, X), domain=domain, name=name)


@dataclass
class ChartedField:
    """A 1-form field in the two-chart representation split at |x-p| = lam/4."""

    p: np.ndarray
    lam: float
    inner_terms: list
    outer_terms: list
    name: str = ""

    def chart_radius(self) -> float:
        return self.lam / 4.0

    def inner_field(self) -> FormField:
        return terms_form_field(self.inner_terms, domain="ball", name=self.name + ":in")

    def outer_field(self) -> FormField:
        return terms_form_field(self.outer_terms, domain="r4", name=self.name + ":out")

    def value_split(self, X, mask_inner):
        """Chart-consistent value on a batch with a given inner-chart mask."""
        X = np.asarray(X, dtype=float)
        out = np.zeros((X.shape[0], 3, 4))
        if np.any(mask_inner):
            out[mask_inner] = terms_value(self.inner_terms, X[mask_inner])
        if np.any(~mask_inner):
            out[~mask_inner] = terms_value(self.outer_terms, X[~mask_inner])
        return out

    def jac_split(self, X, mask_inner):
        X = np.asarray(X, dtype=float)
        out = np.zeros((X.shape[0], 3, 4, 4))
        if np.any(mask_inner):
            out[mask_inner] = terms_jac(self.inner_terms, X[mask_inner])
        if np.any(~mask_inner):
            out[~mask_inner] = terms_jac(self.outer_terms, X[~mask_inner])
        return out


def combo_field(fields, coeffs, name="") -> ChartedField:
    """Linear combination of charted fields sharing (p, lam)."""
    inner, outer = [], []
    for f, c in zip(fields, coeffs):
        if c == 0.0:
            continue
        inner.extend(scale_terms(f.inner_terms, c))
        outer.extend(scale_terms(f.outer_terms, c))
    f0 = fields[0]
    return ChartedField(f0.p, f0.lam, inner, outer, name=name)


@dataclass
class ChartedConnection(ChartedField):
    """A two-chart connection with its parameter and transition data."""

    q: ParamQ = None
    bg: BackgroundConnection = None
    pi2: str = "model"

    def transition(self, X) -> np.ndarray:
        """g * g12(x) * g^{-1} as unit quaternions, g12 = (x-p)/|x-p|."""
        return transition_quaternion(self.q.p, self.q.g, X)


def transition_quaternion(p, g, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = X - np.asarray(p, dtype=float)
    r = np.linalg.norm(Y, axis=1, keepdims=True)
    g12 = Y / r
    # quaternion product g * g12 * g^{-1}, vectorized
    def qmul(a, b):
        a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
        b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
        return np.stack([
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ], axis=-1)
    gq = g.quaternion()[None, :]
    ginv = g.inverse().quaternion()[None, :]
    return qmul(qmul(np.broadcast_to(gq, g12.shape), g12),
                np.broadcast_to(ginv, g12.shape))


# ---------------------------------------------------------------------------
# the family


PI2_STRATEGIES = ("zero", "model", "full")


def _strategy_h_atoms(q: ParamQ, pi2: str):
    """Term templates (no beta, unconjugated) for h := I2 - PI2 per strategy."""
    if pi2 not in PI2_STRATEGIES:
        raise ValueError(f"unknown pi2 strategy {pi2!r}; use one of {PI2_STRATEGIES}")
    if pi2 == "zero":      # PI2 = 0, h = I2
        return [(1.0, LinRadAtom(2 * ETABAR, rad_i2, q.p, q.lam))]
    if pi2 == "model":     # PI2 = I2 - lam^2 Theta, h = lam^2 Theta
        return [(1.0, LinRadAtom(2 * ETABAR, rad_model_h, q.p, q.lam))]
    return []              # "full": PI2 = I2, h = 0


def _i1_atom(q: ParamQ):
    return LinRadAtom(2 * ETA, rad_i1, q.p, q.lam)


def _i2_atom(q: ParamQ):
    return LinRadAtom(2 * ETABAR, rad_i2, q.p, q.lam)


def i1_form(lam: float, p) -> FormField:
    """Inner-chart instanton 1-form: coefficients 2(eta y)/(lam^2+|y|^2)."""
    atom = LinRadAtom(2 * ETA, rad_i1, np.asarray(p, float), lam)
    return terms_form_field([Term(1.0, lie=atom)], domain="ball", name="I1")


def i2_form(lam: float, p) -> FormField:
    """Outer-chart instanton 1-form: coefficients 2(etabar y)(1/s - 1/(lam^2+s))."""
    atom = LinRadAtom(2 * ETABAR, rad_i2, np.asarray(p, float), lam)
    return terms_form_field([Term(1.0, lie=atom)], domain="punctured", name="I2")


def _inner_terms(q: ParamQ) -> list:
    R = adjoint_matrix(q.g)
    return [Term(1.0 / q.eps, lie=_i1_atom(q), mat=R, conjugated=True)]


def _outer_terms_glued(q: ParamQ, bg: BackgroundConnection, pi2: str) -> list:
    R = adjoint_matrix(q.g)
    beta_lam = BetaAtom(1.0, q.p, q.lam)
    beta_q = BetaAtom(4.0, q.p, q.lam)
    bga = bg.atom()
    terms = [
        Term(1.0, lie=bga, x_based=True),
        Term(-1.0, lie=bga, x_based=True, beta=beta_lam),
    ]
    if pi2 == "zero":
        terms.append(Term(1.0 / q.eps, lie=_i2_atom(q), mat=R, conjugated=True,
                          beta=beta_q))
    else:
        terms.append(Term(1.0 / q.eps, lie=_i2_atom(q), mat=R, conjugated=True))
        for c, atom in _strategy_h_atoms(q, pi2):
            terms.append(Term(-c / q.eps, lie=atom, mat=R, conjugated=True))
            terms.append(Term(c / q.eps, lie=atom, mat=R, conjugated=True,
                              beta=beta_q))
    return terms


def glued_connection(q: ParamQ, bg: BackgroundConnection = None,
                     pi2: str = "model") -> ChartedConnection:
    """The glued family member A(q): background + cutoff instanton of scale lam.

    Outer chart: (1-beta_lam) bg + (1/eps) beta_{lam/4} g I2 g^{-1}
                 + (1/eps)(1 - beta_{lam/4}) g PI2 g^{-1}   (expanded per strategy);
    inner chart: (1/eps) g I1 g^{-1}.
    """
    bg = BackgroundConnection() if bg is None else bg
    return ChartedConnection(q.p, q.lam, _inner_terms(q),
                             _outer_terms_glued(q, bg, pi2),
                             name="A", q=q, bg=bg, pi2=pi2)


def extended_connection(q: ParamQ) -> ChartedConnection:
    """The extension: pure (1/eps)-scaled instanton in both charts, on all of R^4."""
    R = adjoint_matrix(q.g)
    outer = [Term(1.0 / q.eps, lie=_i2_atom(q), mat=R, conjugated=True)]
    return ChartedConnection(q.p, q.lam, _inner_terms(q), outer,
                             name="Atilde", q=q, bg=BackgroundConnection.zero(),
                             pi2="full")


def difference_b(q: ParamQ, bg: BackgroundConnection = None,
                 pi2: str = "model") -> ChartedField:
    """b(q) = extension minus glued family member (identically 0 on the inner chart).

    Derived directly from the definitions:
        b = (beta_lam - 1) bg + (1/eps)(1 - beta_{lam/4}) g h g^{-1},  h = I2 - PI2.
    """
    bg = BackgroundConnection() if bg is None else bg
    R = adjoint_matrix(q.g)
    beta_lam = BetaAtom(1.0, q.p, q.lam)
    beta_q = BetaAtom(4.0, q.p, q.lam)
    bga = bg.atom()
    outer = [
        Term(-1.0, lie=bga, x_based=True),
        Term(1.0, lie=bga, x_based=True, beta=beta_lam),
    ]
    for c, atom in _strategy_h_atoms(q, pi2):
        outer.append(Term(c / q.eps, lie=atom, mat=R, conjugated=True))
        outer.append(Term(-c / q.eps, lie=atom, mat=R, conjugated=True, beta=beta_q))
    return ChartedField(q.p, q.lam, [], outer, name="b")


DIRECTIONS = ("p1", "p2", "p3", "p4", "xi1", "xi2", "xi3", "lam")


def _apply_direction(terms, direction: str):
    if direction in ("p1", "p2", "p3", "p4"):
        return d_dp(terms, int(direction[1]) - 1)
    if direction in ("xi1", "xi2", "xi3"):
        return d_dxi(terms, int(direction[2]))
    if direction in ("lam", "lambda"):
        return d_dlam(terms)
    raise ValueError(f"unknown direction {direction!r}; use one of {DIRECTIONS}")


def dA_dparam(q: ParamQ, direction: str, bg: BackgroundConnection = None,
              pi2: str = "model") -> ChartedField:
    """Analytic parameter derivative of the glued family, chart-wise."""
    bg = BackgroundConnection() if bg is None else bg
    A = glued_connection(q, bg, pi2)
    return ChartedField(q.p, q.lam,
                        _apply_direction(A.inner_terms, direction),
                        _apply_direction(A.outer_terms, direction),
                        name=f"dA/d{direction}")


def datilde_dparam(q: ParamQ, direction: str) -> ChartedField:
    """Analytic parameter derivative of the extension."""
    At = extended_connection(q)
    return ChartedField(q.p, q.lam,
                        _apply_direction(At.inner_terms, direction),
                        _apply_direction(At.outer_terms, direction),
                        name=f"dAt/d{direction}")


def ddiff_dparam(q: ParamQ, direction: str, bg: BackgroundConnection = None,
                 pi2: str = "model") -> ChartedField:
    """Analytic parameter derivative of b = extension - glued (exact difference)."""
    b = difference_b(q, bg, pi2)
    return ChartedField(q.p, q.lam, [],
                        _apply_direction(b.outer_terms, direction),
                        name=f"db/d{direction}")


def d2A_dp1p1(q: ParamQ, bg: BackgroundConnection = None,
              pi2: str = "model") -> ChartedField:
    """Second p1-derivative of the glued family (exact term-level differentiation)."""
    bg = BackgroundConnection() if bg is None else bg
    A = glued_connection(q, bg, pi2)
    return ChartedField(q.p, q.lam,
                        d_dp(d_dp(A.inner_terms, 0), 0),
                        d_dp(d_dp(A.outer_terms, 0), 0),
                        name="d2A/dp1^2")


def d2Atilde_dp1p1(q: ParamQ) -> ChartedField:
    At = extended_connection(q)
    return ChartedField(q.p, q.lam,
                        d_dp(d_dp(At.inner_terms, 0), 0),
                        d_dp(d_dp(At.outer_terms, 0), 0),
                        name="d2At/dp1^2")
