"""Circle-map family with infinitely many critical points.

The core interval map is a |z|^alpha * sin(beta*log(1/|z|)) with odd symmetry,
glued through a monotone quintic to a linear expanding circle map outside a
small neighbourhood of 0, and shifted by +-mu on the two sides of 0.  All
evaluation is exact piecewise arithmetic; the heavy lifting lives in
numba kernels (see _kernels).
"""

import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from . import _kernels as K


class SingularInputError(ValueError):
    """Raised when a map operation is evaluated at the singular point 0."""


class IndexOutOfRangeError(ValueError):
    """Raised for critical-lattice indices outside [k0, k_max]."""


class ParameterError(ValueError):
    """Raised when a MapParams invariant fails at construction."""


def reduce_circle(v):
    """Reduce a real number (or array) mod 2 into [-1, 1)."""
    r = (np.asarray(v) + 1.0) % 2.0 - 1.0
    return float(r) if np.isscalar(v) or np.ndim(v) == 0 else r


def circle_distance(u, v):
    d = abs(u - v) % 2.0
    return 2.0 - d if d > 1.0 else d


class CriticalPoint(NamedTuple):
    k: int
    position: float
    kind: str  # "minimum" or "maximum"


def _quintic_hermite(p0, m0, c0, p1, m1, c1, h):
    """Power-basis coefficients in t of the C^2 Hermite quintic on [0, 1]."""
    a0, a1, a2 = p0, m0 * h, 0.5 * c0 * h * h
    r0 = p1 - a0 - a1 - a2
    r1 = m1 * h - a1 - 2.0 * a2
    r2 = c1 * h * h - 2.0 * a2
    a3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2
    a4 = -15.0 * r0 + 7.0 * r1 - r2
    a5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2
    return a0, a1, a2, a3, a4, a5


@dataclass(frozen=True)
class MapParams:
    """All constants defining f_mu and the analysis thresholds.

    eps, xhat and zhat are derived from (a, alpha, beta, k0); they are stored
    so that serialized configs are self-describing, and re-validated against
    the closed formulas at construction.
    """

    a: float
    alpha: float
    beta: float
    k0: int
    eps: float
    xhat: float
    zhat: float
    yhat: float
    ytilde: float
    sigma_tilde: float
    degree: int
    mu: float
    sigma: float
    rho: float
    tau: float
    flat: float
    delta: float
    k_max: int
    blend_width: float
    _pack: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a, al, be = self.a, self.alpha, self.beta
        if not (a > 0 and 0 < al < 1 and be > 0):
            raise ParameterError("need a > 0, alpha in (0,1), beta > 0")
        if self.k0 < 1 or self.k0 % 2 == 0:
            raise ParameterError("k0 must be a positive odd integer (x_k0 a local minimum)")
        xhat = math.exp(-math.atan2(be, al) / be)
        zhat = math.exp(math.atan2(be * (2 * al - 1), be * be - al * al + al) / be)
        q = math.exp(-math.pi / be)
        xk0 = xhat * math.exp(-self.k0 * math.pi / be)
        eps = 2.0 * xk0 / (1.0 + q)
        for name, got, want in (("xhat", self.xhat, xhat), ("zhat", self.zhat, zhat),
                                ("eps", self.eps, eps)):
            if not math.isclose(got, want, rel_tol=1e-12):
                raise ParameterError(f"{name}={got!r} disagrees with its formula value {want!r}")
        if not eps < 0.5:
            raise ParameterError("eps must be smaller than 1/2; increase k0")
        if not (0 < self.rho < self.tau):
            raise ParameterError("need 0 < rho < tau")
        if not self.rho < math.log(2.0):
            raise ParameterError("need rho < log 2")
        if not self.sigma_tilde > 4.0:
            raise ParameterError("need sigma_tilde > 4")
        if not (1.0 < self.sigma < math.sqrt(self.sigma_tilde)):
            raise ParameterError("need sigma in (1, sqrt(sigma_tilde))")
        if self.degree < math.ceil(self.sigma_tilde) + 1:
            raise ParameterError("need degree >= ceil(sigma_tilde) + 1")
        window_hi = 2.0 * (1.0 - eps ** self.tau) / (1.0 + q) * xk0
        if not (xk0 < self.yhat < window_hi):
            raise ParameterError(
                f"yhat={self.yhat!r} outside the admissible window ({xk0!r}, {window_hi!r})")
        if not (self.yhat < self.ytilde < eps):
            raise ParameterError("need yhat < ytilde < eps")
        mu = self.mu
        if mu != 0.0 and not (eps * eps <= abs(mu) <= eps):
            raise ParameterError("mu must lie in [-eps,-eps^2] U [eps^2,eps] U {0}")
        if not (self.flat > 0 and self.delta > 0 and self.blend_width > 0):
            raise ParameterError("flat, delta and blend_width must be positive")
        if self.k_max <= self.k0:
            raise ParameterError("k_max must exceed k0")
        if self.degree - 2.0 * abs(mu) / self.blend_width < 2.0:
            raise ParameterError("mu ramp too steep: degree - 2|mu|/blend_width < 2")
        object.__setattr__(self, "_pack", self._build_pack())
        self._assert_blend_monotone()

    def _build_pack(self):
        p = np.zeros(K.PACK_LEN)
        p[K.P_A] = self.a
        p[K.P_ALPHA] = self.alpha
        p[K.P_BETA] = self.beta
        p[K.P_MU] = self.mu
        p[K.P_EPS] = self.eps
        p[K.P_YHAT] = self.yhat
        p[K.P_YTILDE] = self.ytilde
        p[K.P_DEGREE] = float(self.degree)
        p[K.P_BWIDTH] = self.blend_width
        p[K.P_XHAT] = self.xhat
        p[K.P_K0] = float(self.k0)
        p[K.P_KMAX] = float(self.k_max)
        p[K.P_FLAT] = self.flat
        p[K.P_TAU] = self.tau
        p[K.P_RHO] = self.rho
        p[K.P_SIGMA] = self.sigma
        p[K.P_DELTA] = self.delta
        p[K.P_STAU] = s_threshold_value(self.beta, self.tau)
        p[K.P_D2A] = self.alpha * (self.alpha - 1.0) - self.beta ** 2
        p[K.P_D2B] = self.beta * (2.0 * self.alpha - 1.0)
        p[K.P_PIB] = math.pi / self.beta
        p[K.P_XK0] = self.xhat * math.exp(-self.k0 * math.pi / self.beta)
        q = math.exp(-math.pi / self.beta)
        p[K.P_YBASE] = 2.0 * self.xhat / (1.0 + q)
        p[K.P_QLAT] = q
        e = math.exp(math.pi / self.beta)
        p[K.P_A1] = self.xhat * (e - 1.0) ** 2 / (e + 1.0)
        p[K.P_A2] = self.xhat * (e - 1.0) / (e + 1.0)
        p[K.P_ZHAT] = self.zhat
        p[K.P_SQAB] = math.hypot(self.alpha, self.beta)
        p[K.P_SQD2] = math.hypot(p[K.P_D2A], p[K.P_D2B])
        # audit the parity sign of the inflection-relative phase form against
        # the raw trig expression at one well-conditioned point
        p[K.P_SB] = 1.0
        u0 = 0.9 * self.xhat
        lg = math.log(u0)
        raw = -self.a * u0 ** (self.alpha - 2.0) * (
            p[K.P_D2A] * math.sin(self.beta * lg) + p[K.P_D2B] * math.cos(self.beta * lg))
        if raw * K._fhat_d2(p, u0) < 0:
            p[K.P_SB] = -1.0
        # C^2 quintic between fhat at yhat and the linear outer map at ytilde
        h = self.ytilde - self.yhat
        pk = p  # fhat kernels need the partially built pack
        c = _quintic_hermite(
            K._fhat(pk, self.yhat), K._fhat_d1(pk, self.yhat), K._fhat_d2(pk, self.yhat),
            self.degree * self.ytilde, float(self.degree), 0.0, h)
        for i, ci in enumerate(c):
            p[K.P_BC0 + i] = ci
        return p

    def _assert_blend_monotone(self):
        t = np.linspace(self.yhat, self.ytilde, 4097)
        d = np.array([K._blend_d1(self._pack, u) for u in t])
        if not np.all(d > 0):
            raise ParameterError("blend between yhat and ytilde is not monotone; "
                                 "adjust yhat/ytilde or degree")

    @property
    def pack(self):
        return self._pack

    @property
    def x_k0(self):
        return float(self._pack[K.P_XK0])

    @property
    def s_tau(self):
        return float(self._pack[K.P_STAU])

    @property
    def lattice_q(self):
        return float(self._pack[K.P_QLAT])

    @property
    def a1(self):
        return float(self._pack[K.P_A1])

    @property
    def a2(self):
        return float(self._pack[K.P_A2])

    def with_mu(self, mu):
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "_pack"}
        kw["mu"] = float(mu)
        return MapParams(**kw)


def s_threshold_value(beta, tau):
    q = math.exp(-math.pi / beta)
    return -(beta / math.pi) * math.log(tau * (1.0 + q) / (1.0 - q))


def make_params(a=1.0, alpha=0.5, beta=1.0, k0=3, tau=0.2, rho=0.01, sigma=2.0,
                sigma_tilde=4.2, degree=None, mu=0.0, flat=math.exp(-10.0),
                delta=0.1, k_max=None, yhat=None, ytilde=None, blend_width=None):
    """Build MapParams, deriving eps/xhat/zhat and defaulting the gluing points.

    yhat defaults to the point of largest |fhat'| inside the admissible window
    (grid search over a fixed 4097-point grid, deterministic), ytilde to the
    midpoint between yhat and eps, blend_width to eps.
    """
    xhat = math.exp(-math.atan2(beta, alpha) / beta)
    zhat = math.exp(math.atan2(beta * (2 * alpha - 1), beta * beta - alpha * alpha + alpha) / beta)
    q = math.exp(-math.pi / beta)
    xk0 = xhat * math.exp(-k0 * math.pi / beta)
    eps = 2.0 * xk0 / (1.0 + q)
    if degree is None:
        degree = int(math.ceil(sigma_tilde)) + 1
    if yhat is None:
        window_hi = 2.0 * (1.0 - eps ** tau) / (1.0 + q) * xk0
        if window_hi <= xk0:
            raise ParameterError("empty yhat window: eps^tau too large (raise k0 or tau)")
        grid = np.linspace(xk0, window_hi, 4099)[1:-1]
        lg = np.log(grid)
        d1 = -a * grid ** (alpha - 1.0) * (alpha * np.sin(beta * lg) + beta * np.cos(beta * lg))
        yhat = float(grid[int(np.argmax(np.abs(d1)))])
    if ytilde is None:
        ytilde = 0.5 * (yhat + eps)
    if blend_width is None:
        blend_width = eps
    if k_max is None:
        k_max = k0 + 60
    return MapParams(a=a, alpha=alpha, beta=beta, k0=k0, eps=eps, xhat=xhat, zhat=zhat,
                     yhat=yhat, ytilde=ytilde, sigma_tilde=sigma_tilde, degree=degree,
                     mu=mu, sigma=sigma, rho=rho, tau=tau, flat=flat, delta=delta,
                     k_max=k_max, blend_width=blend_width)


_REFERENCE_KW = {
    # beta=1 keeps the formulas hand-checkable; all |s| >= 1 blocks are
    # genuine returns (s(tau) < 1).
    "beta1": dict(a=1.0, alpha=0.5, beta=1.0, k0=3, tau=0.2, rho=0.01, sigma=2.0,
                  sigma_tilde=4.2),
    # beta=3 has s(tau) > 1, exercising the |s| <= s(tau) escape branch.
    "beta3": dict(a=1.0, alpha=0.5, beta=3.0, k0=7, tau=0.16, rho=0.01, sigma=2.0,
                  sigma_tilde=4.2),
}


def reference_params(suite="beta1", mu=0.0, **overrides):
    """The two reference parameter suites used throughout the test batteries."""
    if suite not in _REFERENCE_KW:
        raise ParameterError(f"unknown suite {suite!r}; choose from {sorted(_REFERENCE_KW)}")
    kw = dict(_REFERENCE_KW[suite])
    kw.update(overrides)
    return make_params(mu=mu, **kw)


# -- config round trip -------------------------------------------------------

_CONFIG_FIELDS = ("a", "alpha", "beta", "k0", "eps", "xhat", "zhat", "yhat", "ytilde",
                  "sigma_tilde", "degree", "mu", "sigma", "rho", "tau", "flat", "delta",
                  "k_max", "blend_width")
_INT_FIELDS = {"k0", "degree", "k_max"}


def save_config(params, path):
    """Write a flat key = value config; reals carry full round-trip precision."""
    lines = ["# sinlogmap parameter file"]
    for name in _CONFIG_FIELDS:
        lines.append(f"{name} = {getattr(params, name)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_config(path):
    raw = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            raw[key.strip()] = val.strip()
    missing = [n for n in _CONFIG_FIELDS if n not in raw]
    if missing:
        raise ParameterError(f"config missing keys: {missing}")
    kw = {}
    for name in _CONFIG_FIELDS:
        kw[name] = int(raw[name]) if name in _INT_FIELDS else float(raw[name])
    return MapParams(**kw)


# -- map evaluation ----------------------------------------------------------

def _check_nonsingular(z):
    if z == 0.0:
        raise SingularInputError("z = 0 is the singular point of the family")


def eval_map(params, z):
    """f_mu(z) reduced into [-1, 1).  Scalars or arrays."""
    if np.ndim(z) == 0:
        _check_nonsingular(float(z))
        return K.map_eval(params.pack, float(z))
    z = np.asarray(z, dtype=float)
    if np.any(z == 0.0):
        raise SingularInputError("z = 0 is the singular point of the family")
    return np.array([K.map_eval(params.pack, zi) for zi in z.ravel()]).reshape(z.shape)


def eval_derivative(params, z):
    if np.ndim(z) == 0:
        _check_nonsingular(float(z))
        return K.map_d1(params.pack, float(z))
    z = np.asarray(z, dtype=float)
    if np.any(z == 0.0):
        raise SingularInputError("z = 0 is the singular point of the family")
    return np.array([K.map_d1(params.pack, zi) for zi in z.ravel()]).reshape(z.shape)


def eval_second_derivative(params, z):
    if np.ndim(z) == 0:
        _check_nonsingular(float(z))
        return K.map_d2(params.pack, float(z))
    z = np.asarray(z, dtype=float)
    if np.any(z == 0.0):
        raise SingularInputError("z = 0 is the singular point of the family")
    return np.array([K.map_d2(params.pack, zi) for zi in z.ravel()]).reshape(z.shape)


def eval_fhat(params, z):
    """The closed-form branch a|z|^alpha sin(beta log(1/|z|)) with odd sign.

    Valid as the value of the glued map only for |z| <= yhat; exposed so that
    the lattice formulas can be checked against the family formula everywhere.
    """
    _check_nonsingular(float(z))
    s = 1.0 if z > 0 else -1.0
    return s * K._fhat(params.pack, abs(float(z)))


def iterate(params, z, n):
    """n-fold iterate of f_mu at z."""
    _check_nonsingular(float(z))
    return K.orbit_point(params.pack, float(z), int(n))


def critical_point(params, k):
    if abs(k) < params.k0 or abs(k) > params.k_max:
        raise IndexOutOfRangeError(f"|k| must lie in [{params.k0}, {params.k_max}]")
    pos = K.crit_position(params.pack, k)
    kind = "minimum" if K.map_d2(params.pack, pos) > 0 else "maximum"
    return CriticalPoint(k=k, position=pos, kind=kind)


def critical_value(params, k):
    """z_k = f_mu(x_k)."""
    return eval_map(params, critical_point(params, k).position)


def inflection_point(params, m):
    """m-th zero of f'' on the positive side: zhat * exp(-m pi / beta)."""
    return float(K.inflection_position(params.pack, int(m)))


def nearest_critical_point(params, z):
    """(k, distance) over the truncated critical set; k = 0 encodes the origin."""
    k, d = K.nearest_crit(params.pack, float(z))
    return int(k), float(d)


def truncated_distance(params, z):
    return float(K.trunc_dist(params.pack, float(z)))


# -- empirical constants for the derivative bounds ---------------------------

def _cell_points(params, l, n_samples):
    yl = params.pack[K.P_YBASE] * math.exp(-l * math.pi / params.beta)
    ylp = yl * params.lattice_q
    pad = (yl - ylp) * 1e-6
    return np.linspace(ylp + pad, yl - pad, n_samples), params.xhat * math.exp(-l * math.pi / params.beta)


def first_derivative_bracket(params, l, n_samples=400):
    """(lo, hi) of |f'(x)| / (|x_l|^(alpha-2) |x-x_l|) over the cell of x_l.

    Cells with l >= k0+1 lie inside [0, yhat) where the closed-form branch is
    active; the bracket is exactly scale invariant in l.
    """
    xs, xl = _cell_points(params, l, n_samples)
    scale = xl ** (params.alpha - 2.0)
    r = []
    for x in xs:
        if x == xl:
            continue
        r.append(abs(K.map_d1(params.pack, x)) / (scale * abs(x - xl)))
    r = np.array(r)
    return float(r.min()), float(r.max())


def derivative_ratio_constant(params, l, n_samples=60):
    """Empirical K1 for the one-cell derivative ratio bound."""
    xs, xl = _cell_points(params, l, n_samples)
    d = np.array([K.map_d1(params.pack, x) for x in xs])
    best = 0.0
    for i in range(len(xs)):
        for j in range(len(xs)):
            if i == j:
                continue
            s, t = xs[i], xs[j]
            val = abs((d[i] - d[j]) / d[j]) * abs(t - xl) / abs(s - t)
            if val > best:
                best = val
    return best


def second_derivative_ratio_bounds(params, k, n_samples=400):
    """(max ratio over the cell, min ratio over |t-x_k| < tau |x_k|)."""
    xs, xk = _cell_points(params, k, n_samples)
    ref = abs(K.map_d2(params.pack, xk))
    ratios = np.array([abs(K.map_d2(params.pack, x)) / ref for x in xs])
    near = np.abs(xs - xk) < params.tau * abs(xk)
    lo = float(ratios[near].min()) if near.any() else float("nan")
    return float(ratios.max()), lo
