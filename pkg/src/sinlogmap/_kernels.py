"""Scalar numerical kernels, numba-jitted when numba is importable.

Every kernel takes a flat float64 parameter pack (layout below) so the same
code runs inside jitted orbit loops and from thin Python wrappers.  Kernels
never raise; error conditions come back as sentinel codes that the public
wrappers in the package translate into exceptions.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# Parameter pack layout (indices into the float64 vector).
P_A = 0          # amplitude a
P_ALPHA = 1
P_BETA = 2
P_MU = 3
P_EPS = 4        # eps = y_{k0}
P_YHAT = 5
P_YTILDE = 6
P_DEGREE = 7     # outer linear slope (integer valued)
P_BWIDTH = 8     # mu-ramp width outside [-eps, eps]
P_XHAT = 9
P_K0 = 10        # integer valued
P_KMAX = 11      # integer valued
P_FLAT = 12      # truncation radius (flat)
P_TAU = 13
P_RHO = 14
P_SIGMA = 15
P_DELTA = 16
P_STAU = 17      # s(tau) threshold
P_D2A = 18       # A = alpha(alpha-1) - beta^2
P_D2B = 19       # B = beta(2 alpha - 1)
P_PIB = 20       # pi / beta
P_XK0 = 21       # x_{k0}
P_YBASE = 22     # y_k = YBASE * exp(-k pi / beta)
P_QLAT = 23      # exp(-pi / beta)
P_A1 = 24        # atom length constant a_1
P_A2 = 25        # atom distance constant a_2
P_BC0 = 26       # blend quintic coefficients c0..c5 (power basis in t)
P_BC5 = 31
P_ZHAT = 32      # inflection-lattice base
P_SQAB = 33      # sqrt(alpha^2 + beta^2)
P_SQD2 = 34      # sqrt(A^2 + B^2)
P_SB = 35        # +-1, parity sign of the inflection phase
PACK_LEN = 36

SING_FLOOR = 1e-300    # below this |z| the a|z|^alpha factor is treated as 0
SING_TOL = 1e-15       # proximity to the critical set treated as singular

# locate() status codes
LOC_OK = 0
LOC_OUTER = 1          # the (0,0,0) atom
LOC_BOUNDARY = 2
LOC_SINGULAR = 3
LOC_DEEP = 4           # cell index beyond k_max


@njit(cache=True)
def reduce_circle(v):
    """Reduce a real number mod 2 into [-1, 1)."""
    if -1.0 <= v < 1.0:  # already reduced; keep exact
        return v
    r = (v + 1.0) % 2.0 - 1.0
    if r >= 1.0:  # guard against float roundoff at the seam
        r = -1.0
    return r


@njit(cache=True)
def circle_dist(u, v):
    d = abs(u - v) % 2.0
    if d > 1.0:
        d = 2.0 - d
    return d


# The trig factors are evaluated with phases measured from the nearest lattice
# point (alpha sin(t) + beta cos(t) = sqrt(alpha^2+beta^2) sin(beta log(z/x_k))
# * (-1)^k and its analogues); this keeps absolute phase error ~1 ulp at any
# depth, so f'(x_k) is exactly zero in floats.  Below _DEEP_FLOOR the lattice
# reference underflows and the raw formula is used instead.
_DEEP_FLOOR = 1e-280


@njit(cache=True)
def _lattice_phase(p, u):
    """(k, beta*log(u/x_k)) for the nearest phase-reference index k."""
    k = int(round((math.log(p[P_XHAT]) - math.log(u)) / p[P_PIB]))
    xk = p[P_XHAT] * math.exp(-k * p[P_PIB])
    return k, p[P_BETA] * math.log(u / xk)


@njit(cache=True)
def _inflection_phase(p, u):
    m = int(round((math.log(p[P_ZHAT]) - math.log(u)) / p[P_PIB]))
    zm = p[P_ZHAT] * math.exp(-m * p[P_PIB])
    return m, p[P_BETA] * math.log(u / zm)


@njit(cache=True)
def _fhat(p, u):
    # u > 0; value of a u^alpha sin(beta log(1/u))
    if u < SING_FLOOR:
        return 0.0
    if u < _DEEP_FLOOR:
        return -p[P_A] * u ** p[P_ALPHA] * math.sin(p[P_BETA] * math.log(u))
    k, r = _lattice_phase(p, u)
    sgn = 1.0 if k % 2 == 0 else -1.0
    phi = math.atan2(p[P_BETA], p[P_ALPHA])
    return -p[P_A] * u ** p[P_ALPHA] * sgn * math.sin(r - phi)


@njit(cache=True)
def _fhat_d1(p, u):
    if u < _DEEP_FLOOR:
        lg = math.log(u)
        s = math.sin(p[P_BETA] * lg)
        c = math.cos(p[P_BETA] * lg)
        return -p[P_A] * u ** (p[P_ALPHA] - 1.0) * (p[P_ALPHA] * s + p[P_BETA] * c)
    k, r = _lattice_phase(p, u)
    sgn = 1.0 if k % 2 == 0 else -1.0
    return -p[P_A] * u ** (p[P_ALPHA] - 1.0) * p[P_SQAB] * sgn * math.sin(r)


@njit(cache=True)
def _fhat_d2(p, u):
    if u < _DEEP_FLOOR:
        lg = math.log(u)
        s = math.sin(p[P_BETA] * lg)
        c = math.cos(p[P_BETA] * lg)
        return -p[P_A] * u ** (p[P_ALPHA] - 2.0) * (p[P_D2A] * s + p[P_D2B] * c)
    m, r2 = _inflection_phase(p, u)
    sgn = p[P_SB] * (1.0 if m % 2 == 0 else -1.0)
    return -p[P_A] * u ** (p[P_ALPHA] - 2.0) * p[P_SQD2] * sgn * math.sin(r2)


@njit(cache=True)
def _blend(p, u):
    h = p[P_YTILDE] - p[P_YHAT]
    t = (u - p[P_YHAT]) / h
    return (
        p[P_BC0]
        + t * (p[P_BC0 + 1] + t * (p[P_BC0 + 2] + t * (p[P_BC0 + 3] + t * (p[P_BC0 + 4] + t * p[P_BC5]))))
    )


@njit(cache=True)
def _blend_d1(p, u):
    h = p[P_YTILDE] - p[P_YHAT]
    t = (u - p[P_YHAT]) / h
    d = (
        p[P_BC0 + 1]
        + t * (2.0 * p[P_BC0 + 2] + t * (3.0 * p[P_BC0 + 3] + t * (4.0 * p[P_BC0 + 4] + t * 5.0 * p[P_BC5])))
    )
    return d / h


@njit(cache=True)
def _blend_d2(p, u):
    h = p[P_YTILDE] - p[P_YHAT]
    t = (u - p[P_YHAT]) / h
    d = 2.0 * p[P_BC0 + 2] + t * (6.0 * p[P_BC0 + 3] + t * (12.0 * p[P_BC0 + 4] + t * 20.0 * p[P_BC5]))
    return d / (h * h)


@njit(cache=True)
def _core_raw(p, u):
    # unperturbed positive-branch value, not reduced mod 2
    if u < p[P_YHAT]:
        return _fhat(p, u)
    if u < p[P_YTILDE]:
        return _blend(p, u)
    return p[P_DEGREE] * u


@njit(cache=True)
def _core_d1(p, u):
    if u < p[P_YHAT]:
        return _fhat_d1(p, u)
    if u < p[P_YTILDE]:
        return _blend_d1(p, u)
    return p[P_DEGREE]


@njit(cache=True)
def _core_d2(p, u):
    if u < p[P_YHAT]:
        return _fhat_d2(p, u)
    if u < p[P_YTILDE]:
        return _blend_d2(p, u)
    return 0.0


@njit(cache=True)
def _ramp(p, u):
    # multiplies mu; 1 inside [0, eps], smoothstep down to 0 over blend_width
    if u <= p[P_EPS]:
        return 1.0
    t = (u - p[P_EPS]) / p[P_BWIDTH]
    if t >= 1.0:
        return 0.0
    return 1.0 - t * t * (3.0 - 2.0 * t)


@njit(cache=True)
def _ramp_d1(p, u):
    if u <= p[P_EPS]:
        return 0.0
    t = (u - p[P_EPS]) / p[P_BWIDTH]
    if t >= 1.0:
        return 0.0
    return -(6.0 * t - 6.0 * t * t) / p[P_BWIDTH]


@njit(cache=True)
def _ramp_d2(p, u):
    if u <= p[P_EPS]:
        return 0.0
    t = (u - p[P_EPS]) / p[P_BWIDTH]
    if t >= 1.0:
        return 0.0
    return -(6.0 - 12.0 * t) / (p[P_BWIDTH] * p[P_BWIDTH])


@njit(cache=True)
def map_raw(p, z):
    """f_mu(z) before mod-2 reduction.  z must be nonzero."""
    s = 1.0 if z > 0.0 else -1.0
    u = abs(z)
    return s * (_core_raw(p, u) + p[P_MU] * _ramp(p, u))


@njit(cache=True)
def map_eval(p, z):
    return reduce_circle(map_raw(p, z))


@njit(cache=True)
def map_d1(p, z):
    u = abs(z)
    return _core_d1(p, u) + p[P_MU] * _ramp_d1(p, u)


@njit(cache=True)
def map_d2(p, z):
    s = 1.0 if z > 0.0 else -1.0
    u = abs(z)
    return s * (_core_d2(p, u) + p[P_MU] * _ramp_d2(p, u))


@njit(cache=True)
def map_lift(p, w):
    """Lift of f_mu to the real line: continuous, F(w+2) = F(w) + 2*degree."""
    z = reduce_circle(w)
    return map_raw(p, z) + p[P_DEGREE] * (w - z)


@njit(cache=True)
def crit_position(p, k):
    # signed lattice point x_k; |k| >= k0 assumed
    x = p[P_XHAT] * math.exp(-abs(k) * p[P_PIB])
    return x if k > 0 else -x


@njit(cache=True)
def inflection_position(p, m):
    return p[P_ZHAT] * math.exp(-m * p[P_PIB])


@njit(cache=True)
def nearest_crit(p, z):
    """Nearest element of {x_k : k0 <= |k| <= k_max} union {0} in circle distance.

    Returns (k, dist); k = 0 encodes the origin.  Ties break toward smaller
    |k|, then positive k, then lattice over origin.
    """
    u = abs(z)
    best_k = 0
    best_d = u
    best_origin = True
    k0 = int(p[P_K0])
    kmax = int(p[P_KMAX])
    sgn = 1 if z >= 0.0 else -1
    if u > SING_FLOOR:
        kc = int(round((math.log(p[P_XHAT]) - math.log(u)) / p[P_PIB]))
        if kc < k0:
            kc = k0
        if kc > kmax:
            kc = kmax
        for k in range(max(k0, kc - 1), min(kmax, kc + 1) + 1):
            x = p[P_XHAT] * math.exp(-k * p[P_PIB])
            d = abs(u - x)
            if d < best_d or (best_origin and d <= best_d):
                best_d = d
                best_k = sgn * k
                best_origin = False
    # wrap-around candidate: the opposite-sign outermost point
    d = 2.0 - u - p[P_XK0]
    if d < best_d or (best_origin and d <= best_d):
        best_d = d
        best_k = -sgn * k0
        best_origin = False
    return best_k, best_d


@njit(cache=True)
def dist_to_crit(p, z):
    k, d = nearest_crit(p, z)
    return d


@njit(cache=True)
def trunc_dist(p, z):
    d = dist_to_crit(p, z)
    if d <= p[P_FLAT]:
        return d
    return 1.0


@njit(cache=True)
def locate_kern(p, z):
    """Initial-partition index of z: returns (code, l, s, j)."""
    u = abs(z)
    eps = p[P_EPS]
    if abs(u - eps) < SING_TOL:
        return LOC_BOUNDARY, 0, 0, 0
    if u > eps:
        return LOC_OUTER, 0, 0, 0
    if u < SING_FLOOR:
        return LOC_SINGULAR, 0, 0, 0
    t = (math.log(p[P_YBASE]) - math.log(u)) / p[P_PIB]
    l = int(math.floor(t))
    # float guard: keep u strictly inside (y_{l+1}, y_l]
    while p[P_YBASE] * math.exp(-l * p[P_PIB]) < u:
        l -= 1
    while p[P_YBASE] * math.exp(-(l + 1) * p[P_PIB]) >= u:
        l += 1
    if l > int(p[P_KMAX]):
        return LOC_DEEP, 0, 0, 0
    xl = p[P_XHAT] * math.exp(-l * p[P_PIB])
    yl = p[P_YBASE] * math.exp(-l * p[P_PIB])
    dcell = yl - xl
    if abs(u - xl) < SING_TOL:
        return LOC_SINGULAR, 0, 0, 0
    if abs(u - yl) < SING_TOL or abs(u - yl * p[P_QLAT]) < SING_TOL:
        return LOC_BOUNDARY, 0, 0, 0
    q = p[P_QLAT]
    if u > xl:
        v = (u - xl) / dcell
        side = 1
    else:
        v = (xl - u) / dcell
        side = -1
    s = int(math.floor(-math.log(v) / p[P_PIB])) + 1
    if s < 1:
        s = 1
    # float guard on the block edges
    while v > q ** (s - 1):
        s -= 1
    while v <= q ** s:
        s += 1
    outer = q ** (s - 1) * dcell
    inner = q ** s * dcell
    m = (l + s) ** 3
    w = (outer - inner) / m
    j = int(math.floor((outer - (v * dcell)) / w)) + 1
    if j < 1:
        j = 1
    if j > m:
        j = m
    # boundary tolerance against the atom edges
    pos = outer - (j - 1) * w
    if abs(v * dcell - pos) < SING_TOL or abs(v * dcell - (pos - w)) < SING_TOL:
        return LOC_BOUNDARY, 0, 0, 0
    if z > 0.0:
        return LOC_OK, l, side * s, j
    return LOC_OK, -l, side * s, j


@njit(cache=True)
def binding_period_point(p, x, l, cap):
    """Largest p <= cap with (BCeq) holding for 1 <= h <= p; cap means 'at least cap'."""
    xl = crit_position(p, l)
    shadow = xl
    pt = x
    eps = p[P_EPS]
    thr_out = eps ** (1.0 + p[P_TAU])
    for h in range(1, cap + 1):
        shadow = map_eval(p, shadow)
        pt = map_eval(p, pt)
        diff = circle_dist(pt, shadow)
        if abs(shadow) <= eps:
            thr = dist_to_crit(p, shadow) * math.exp(-p[P_TAU] * h)
        else:
            thr = thr_out * math.exp(-p[P_TAU] * h)
        if diff > thr:
            return h - 1
    return cap


@njit(cache=True)
def growth_check(p, k, n):
    """Theorem condition (1a): |(f^m)'(z_k)| >= sigma^m for all m <= n.

    Returns (ok, first_failure); first_failure = 0 when ok.
    """
    logsig = math.log(p[P_SIGMA])
    z = map_eval(p, crit_position(p, k))
    acc = 0.0
    for m in range(1, n + 1):
        if dist_to_crit(p, z) < SING_TOL:
            return 0, m
        d = abs(map_d1(p, z))
        if d <= 0.0:
            return 0, m
        acc += math.log(d)
        if acc < m * logsig - 1e-12:
            return 0, m
        z = map_eval(p, z)
    return 1, 0


@njit(cache=True)
def recurrence_check(p, k, n):
    """Theorem condition (1b): |f^m(z_k)| > eps or dist to C >= exp(-rho m)."""
    z = map_eval(p, crit_position(p, k))
    for m in range(1, n + 1):
        z = map_eval(p, z)
        if abs(z) <= p[P_EPS]:
            d = dist_to_crit(p, z)
            if d < math.exp(-p[P_RHO] * m):
                return 0, m
        if dist_to_crit(p, z) < SING_TOL:
            return 0, m
    return 1, 0


@njit(cache=True)
def cpr_check(p, k, n, m_hat, cap_mult):
    """Exclusion tests along the critical-value orbit.

    Sub-test (i): running sum of -log dist(f^j(z_k), C) <= m_hat * m at every
    non-bound checkpoint m.  Sub-test (ii): depth sum over binding-eligible
    return situations <= m/2 at the same checkpoints.  Bound stretches come
    from replaying the binding period at each return.

    Returns (ok_i, ff_i, ok_ii, ff_ii, indeterminate).
    """
    z = map_eval(p, crit_position(p, k))
    acc = 0.0
    depth = 0
    bound_until = 0
    ok_i = 1
    ok_ii = 1
    ff_i = 0
    ff_ii = 0
    indet = 0
    for m in range(0, n):
        if m >= bound_until and abs(z) <= p[P_EPS]:
            code, ll, ss, jj = locate_kern(p, z)
            if code == LOC_OK and abs(ss) > p[P_STAU]:
                depth += abs(ll) + abs(ss)
                cap = cap_mult * (abs(ll) + abs(ss))
                pb = binding_period_point(p, z, ll, cap)
                if pb == cap:
                    indet = 1
                bound_until = m + pb
        d = dist_to_crit(p, z)
        if d < SING_FLOOR:
            d = SING_FLOOR
        acc += -math.log(min(d, 1.0))
        z = map_eval(p, z)
        c = m + 1
        if c >= bound_until:
            if ok_i == 1 and acc > m_hat * c:
                ok_i = 0
                ff_i = c
            if ok_ii == 1 and 2 * depth > c:
                ok_ii = 0
                ff_ii = c
    return ok_i, ff_i, ok_ii, ff_ii, indet


@njit(cache=True)
def orbit_stats(p, x0, n):
    """(log_deriv_sum, trunc_dist_sum, min_dist, singular_iterate or -1)."""
    z = x0
    logsum = 0.0
    truncsum = 0.0
    mind = 2.0
    for j in range(n):
        d = dist_to_crit(p, z)
        if d < mind:
            mind = d
        if d < SING_TOL:
            return logsum, truncsum, mind, j
        dd = d if d <= p[P_FLAT] else 1.0
        truncsum += -math.log(dd)
        logsum += math.log(abs(map_d1(p, z)))
        z = map_eval(p, z)
    return logsum, truncsum, mind, -1


@njit(cache=True)
def tail_point(p, x0, n_max):
    """(E, R, singular_iterate or -1); E or R equal to n_max+1 mean 'exceeded'."""
    z = x0
    logsum = 0.0
    truncsum = 0.0
    third = math.log(p[P_SIGMA]) / 3.0
    last_e = 0
    last_r = 0
    for m in range(1, n_max + 1):
        d = dist_to_crit(p, z)
        if d < SING_TOL:
            return n_max + 1, n_max + 1, m - 1
        dd = d if d <= p[P_FLAT] else 1.0
        truncsum += -math.log(dd)
        logsum += math.log(abs(map_d1(p, z)))
        z = map_eval(p, z)
        if logsum <= third * m:
            last_e = m
        if truncsum >= p[P_DELTA] * m:
            last_r = m
    return last_e + 1, last_r + 1, -1


@njit(cache=True)
def srb_accumulate(p, x0, n_transient, n_iter, counts):
    """Occupation counts of one orbit; returns 0 on success, 1 if singular."""
    nbins = counts.shape[0]
    z = x0
    for j in range(n_transient):
        if dist_to_crit(p, z) < SING_TOL:
            return 1
        z = map_eval(p, z)
    for j in range(n_iter):
        if dist_to_crit(p, z) < SING_TOL:
            return 1
        b = int((z + 1.0) * 0.5 * nbins)
        if b < 0:
            b = 0
        if b >= nbins:
            b = nbins - 1
        counts[b] += 1
        z = map_eval(p, z)
    return 0


@njit(cache=True)
def observable(obs_id, z):
    if obs_id == 0:
        return z
    if obs_id == 1:
        return math.sin(math.pi * z)
    # compactly supported bump centered at 0.3 with half-width 0.4
    t = (z - 0.3) / 0.4
    if t * t >= 1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - t * t))


@njit(cache=True)
def correlation_series(p, x0, n_iter, n_lags, phi_id, psi_id):
    """Raw moments for Corr_n along one orbit.

    Returns (cross, phi_mean, psi_mean, sing_flag); cross[lag] is the mean of
    phi(x_{j+lag}) * psi(x_j) over the usable pairs.
    """
    cross = np.zeros(n_lags + 1)
    counts = np.zeros(n_lags + 1)
    ring_psi = np.zeros(n_lags + 1)
    sphi = 0.0
    spsi = 0.0
    z = x0
    for j in range(n_iter):
        if dist_to_crit(p, z) < SING_TOL:
            return cross, 0.0, 0.0, 1
        ph = observable(phi_id, z)
        ps = observable(psi_id, z)
        sphi += ph
        spsi += ps
        ring_psi[j % (n_lags + 1)] = ps
        top = n_lags if j >= n_lags else j
        for lag in range(top + 1):
            cross[lag] += ph * ring_psi[(j - lag) % (n_lags + 1)]
            counts[lag] += 1.0
        z = map_eval(p, z)
    for lag in range(n_lags + 1):
        if counts[lag] > 0:
            cross[lag] /= counts[lag]
    return cross, sphi / n_iter, spsi / n_iter, 0


@njit(cache=True)
def block_sum(p, x0, block_n, phi_id):
    """(sum of phi over the block, sing_flag)."""
    z = x0
    s = 0.0
    for j in range(block_n):
        if dist_to_crit(p, z) < SING_TOL:
            return 0.0, 1
        s += observable(phi_id, z)
        z = map_eval(p, z)
    return s, 0


@njit(cache=True)
def lifted_position(p, x, n):
    """Orbit endpoint of the n-fold lift: (z_n, total_winding).

    The lifted value is z_n + 2*total_winding; differences of lifted values of
    points in one monotone branch give exact unwrapped image lengths.
    """
    z = x
    wind = 0
    for j in range(n):
        v = map_raw(p, z)
        k = int(math.floor((v + 1.0) * 0.5))
        z = v - 2.0 * k
        if z >= 1.0:
            z = -1.0
            k += 1
        wind += k
    return z, wind


@njit(cache=True)
def signed_diff(a, b):
    """Signed circle displacement a - b reduced into [-1, 1)."""
    return reduce_circle(a - b)


@njit(cache=True)
def _local_root(p, x0, fx0, target):
    """Solve f(x) = target on the monotone branch through x0 (f(x0) = fx0).

    Requires |signed_diff(target, fx0)| <= 0.45 so the direction is
    unambiguous.  The bracket grows away from x0, capped short of the
    critical set and so that the image moves < 0.5 per growth step.
    Returns (x, ok).
    """
    delta = signed_diff(target, fx0)
    if delta == 0.0:
        return x0, 1
    side = 1.0 if (delta > 0.0) == (map_d1(p, x0) > 0.0) else -1.0
    b = x0
    fa = -delta
    prev_img = fx0
    for grow in range(400):
        db = dist_to_crit(p, b)
        step = 0.9 * db
        d1b = abs(map_d1(p, b))
        if d1b > 0.0 and 0.35 / d1b < step:
            step = 0.35 / d1b
        if step <= 1e-300:
            return x0, 0
        b2 = b + side * step
        fb2v = map_eval(p, b2)
        h = 0
        while abs(signed_diff(fb2v, prev_img)) > 0.5 and h < 80:
            step *= 0.5
            b2 = b + side * step
            fb2v = map_eval(p, b2)
            h += 1
        fb2 = signed_diff(fb2v, target)
        if fb2 == 0.0:
            return b2, 1
        if (fb2 > 0.0) != (fa > 0.0):
            a = b
            flo = fa
            bb = b2
            for it in range(200):
                mid = 0.5 * (a + bb)
                if mid == a or mid == bb:
                    break
                fm = signed_diff(map_eval(p, mid), target)
                if fm == 0.0:
                    return mid, 1
                if (fm > 0.0) == (flo > 0.0):
                    a = mid
                    flo = fm
                else:
                    bb = mid
            return 0.5 * (a + bb), 1
        b = b2
        fa = fb2
        prev_img = fb2v
    return x0, 0


@njit(cache=True)
def _march_preimage(p, x_start, img_start, d):
    """Invert one map step for the point at arc displacement d from img_start.

    Marches along the image arc in sub-0.4 hops, staying on the monotone
    branch through x_start.  Returns (x, ok).
    """
    x = x_start
    img = img_start
    remaining = d
    for hop in range(12):
        if abs(remaining) <= 0.4:
            break
        stepd = 0.4 if remaining > 0 else -0.4
        tgt = reduce_circle(img + stepd)
        x, ok = _local_root(p, x, img, tgt)
        if ok == 0:
            return 0.0, 0
        img = tgt
        remaining -= stepd
    tgt = reduce_circle(img + remaining)
    return _local_root(p, x, img, tgt)


@njit(cache=True)
def pullback_interval(p, x0, n, d_lo, d_hi):
    """Preimage of the arc [f^n(x0)+d_lo, f^n(x0)+d_hi] around x0 under f^n.

    d_lo <= 0 <= d_hi are arc displacements of the target endpoints from the
    orbit point.  Walks the orbit backwards one step at a time with local
    monotone inversions; valid whatever the wrapping of intermediate arcs.
    Returns (lo, hi, ok) with lo -> hi the positively oriented omega arc.
    """
    orbit = np.empty(n + 1)
    z = x0
    for j in range(n + 1):
        orbit[j] = z
        z = map_eval(p, z)
    dl = d_lo
    dh = d_hi
    for m in range(n, 0, -1):
        anc = orbit[m - 1]
        img = orbit[m]
        xl, ok1 = _march_preimage(p, anc, img, dl)
        xh, ok2 = _march_preimage(p, anc, img, dh)
        if ok1 == 0 or ok2 == 0:
            return 0.0, 0.0, 0
        if map_d1(p, anc) > 0.0:
            dl = -((anc - xl) % 2.0)
            dh = (xh - anc) % 2.0
        else:
            dl2 = -((anc - xh) % 2.0)
            dh2 = (xl - anc) % 2.0
            dl = dl2
            dh = dh2
    return reduce_circle(x0 + dl), reduce_circle(x0 + dh), 1


@njit(cache=True)
def arc_step(p, b, span):
    """Image of the positively-oriented arc [b, b+span] under f_mu.

    The arc must not contain a critical point in its interior.  Returns
    (b2, span2, flip, covers_all): the image arc base and span, whether f
    is decreasing on the arc, and whether the image wrapped the full circle.
    """
    lift_lo = map_lift(p, b)
    lift_hi = map_lift(p, b + span)
    raw = lift_hi - lift_lo
    flip = raw < 0.0
    span2 = abs(raw)
    covers = span2 >= 2.0
    if covers:
        span2 = 2.0
    if flip:
        b2 = reduce_circle(lift_hi)
    else:
        b2 = reduce_circle(lift_lo)
    return b2, span2, flip, covers


@njit(cache=True)
def arc_contains_point(b, span, c):
    pos = (c - b) % 2.0
    return 0.0 < pos < span


@njit(cache=True)
def arc_contains_crit(p, b, span):
    """Does the open arc (b, b+span) contain a point of the critical set?

    Checks 0 and +-x_{k0} directly; any other lattice point inside the arc
    forces the arc into one signed band (0, x_{k0}), where an exact index
    range query decides.
    """
    if span >= 2.0:
        return True
    if arc_contains_point(b, span, 0.0):
        return True
    if arc_contains_point(b, span, p[P_XK0]):
        return True
    if arc_contains_point(b, span, -p[P_XK0]):
        return True
    e1 = reduce_circle(b)
    e2 = reduce_circle(b + span)
    # after the checks above the arc can only meet the lattice if it lies
    # entirely inside one signed band
    if e1 > 0.0 and e2 > 0.0 and e1 < p[P_XK0] and e2 < p[P_XK0] and e2 > e1:
        u1, u2 = e1, e2
    elif e1 < 0.0 and e2 < 0.0 and -e1 < p[P_XK0] and -e2 < p[P_XK0] and e1 > e2:
        u1, u2 = -e1, -e2
    else:
        return False
    if u1 < SING_FLOOR:
        return True
    k_hi = (math.log(p[P_XHAT]) - math.log(u1)) / p[P_PIB]
    k_lo = (math.log(p[P_XHAT]) - math.log(u2)) / p[P_PIB]
    k_first = int(math.ceil(k_lo))
    if abs(k_lo - round(k_lo)) < 1e-12:
        k_first = int(round(k_lo)) + 1
    k = max(k_first, int(p[P_K0]))
    return k < k_hi - 1e-12


@njit(cache=True)
def orbit_point(p, x0, n):
    z = x0
    for j in range(n):
        z = map_eval(p, z)
    return z


@njit(cache=True)
def logderiv_partial(p, x0, n):
    """Sum of log|f'| along the first n iterates (no singularity handling)."""
    z = x0
    s = 0.0
    for j in range(n):
        s += math.log(abs(map_d1(p, z)))
        z = map_eval(p, z)
    return s
