"""Initial partition, binding periods, and the inductive refinement.

The initial partition tiles each lattice cell (y_{l+1}, y_l) by geometric
blocks I(l,s) subdivided into (|l|+|s|)^3 equal atoms I(l,s,j), plus the
outer atom I(0,0,0).  The refinement tracks, per atom, the image arc
f^n(omega) exactly through its endpoints (the arc never straddles the
critical set except at the step where it is split, which is what the case
analysis detects), together with return times R_n, host indices Q_n and
binding bookkeeping.

Fully enumerating P_n is combinatorially infeasible beyond toy horizons:
every piece falling back into the expansion region re-splits across the
whole atom grid within a few iterates.  refine_step is exact and is meant
for moderate states; the desk-scale experiments use AnchorChain, which
follows the P_n atom containing a seeded anchor point with the identical
per-atom bookkeeping (a length-biased sample of P_n).
"""

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .mapcore import MapParams, circle_distance
from .sampling import chebyshev_interior


class InvalidIndexError(ValueError):
    pass


class BoundaryPointError(ValueError):
    pass


class SingularPointError(ValueError):
    pass


class DeepLatticeError(ValueError):
    """z lies in a cell beyond k_max (below the resolved lattice)."""


class DiffeoViolationError(RuntimeError):
    """The image arc of an atom straddles the critical set."""


class BindingPreconditionError(ValueError):
    """Binding period requested for a block with |s| <= s(tau)."""


class AtomIndex(NamedTuple):
    l: int
    s: int
    j: int


class Atom(NamedTuple):
    index: AtomIndex
    lo: float
    hi: float  # arc from lo to hi in positive orientation; wraps iff hi < lo


OUTER = AtomIndex(0, 0, 0)


class SThreshold(NamedTuple):
    """s(tau) plus the classification rule it induces."""

    value: float

    def is_return_block(self, s):
        """|s| > s(tau): close enough to the critical point to lose expansion."""
        return abs(s) > self.value


def s_threshold(params):
    return SThreshold(params.s_tau)


# -- initial partition geometry ----------------------------------------------

def _validate_index(params, index):
    l, s, j = index
    if (l, s, j) == (0, 0, 0):
        return
    if not (params.k0 <= abs(l) <= params.k_max):
        raise InvalidIndexError(f"|l|={abs(l)} outside [{params.k0}, {params.k_max}]")
    if abs(s) < 1 or j < 1 or j > (abs(l) + abs(s)) ** 3:
        raise InvalidIndexError(f"bad atom index {index}")


def _cell(params, l_abs):
    """(x_l, y_l, D) of the positive-side cell."""
    xl = K.crit_position(params.pack, l_abs)
    yl = params.pack[K.P_YBASE] * math.exp(-l_abs * math.pi / params.beta)
    return xl, yl, yl - xl


def atom_bounds(params, index):
    """Endpoints of I(l,s,j) from the closed formulas."""
    index = AtomIndex(*index)
    _validate_index(params, index)
    if index == OUTER:
        return Atom(OUTER, params.eps, -params.eps)
    l, s, j = index
    la, sa = abs(l), abs(s)
    xl, yl, D = _cell(params, la)
    q = params.lattice_q
    m = (la + sa) ** 3
    w = q ** (sa - 1) * (1.0 - q) * D / m
    if s > 0:
        hi0 = xl + q ** (sa - 1) * D - (j - 1) * w
        lo0 = hi0 - w
    else:
        lo0 = xl - q ** (sa - 1) * D + (j - 1) * w
        hi0 = lo0 + w
    if l > 0:
        return Atom(index, lo0, hi0)
    return Atom(index, -hi0, -lo0)


def atom_length(params, index):
    """Closed-form |I(l,s,j)| = a1 e^{-(pi/beta)(|l|+|s|)} / (|l|+|s|)^3."""
    l, s, _ = index
    L = abs(l) + abs(s)
    return params.a1 * math.exp(-L * math.pi / params.beta) / L ** 3


def locate(params, z):
    """Inverse of atom_bounds on the initial partition."""
    code, l, s, j = K.locate_kern(params.pack, float(z))
    if code == K.LOC_OUTER:
        return OUTER
    if code == K.LOC_BOUNDARY:
        raise BoundaryPointError(f"z={z!r} lies on an atom boundary")
    if code == K.LOC_SINGULAR:
        raise SingularPointError(f"z={z!r} is on (or too close to) the critical set")
    if code == K.LOC_DEEP:
        raise DeepLatticeError(f"z={z!r} lies below the resolved lattice (l > k_max)")
    return AtomIndex(int(l), int(s), int(j))


def neighbor_index(params, index, direction):
    """P_0-adjacent atom in the given circle direction (+1 = increasing).

    Returns OUTER when the neighbour is the expansion-region atom.  Walking
    toward a critical point never ends (blocks accumulate); the caller is
    responsible for depth limits there.
    """
    index = AtomIndex(*index)
    _validate_index(params, index)
    if index == OUTER:
        raise InvalidIndexError("the outer atom has the whole lattice as neighbours")
    l, s, j = index
    if l < 0:
        mirrored = neighbor_index(params, AtomIndex(-l, s, j), -direction)
        if mirrored == OUTER:
            return OUTER
        return AtomIndex(-mirrored.l, mirrored.s, mirrored.j)
    la, sa = l, abs(s)
    m = (la + sa) ** 3
    if s > 0:
        toward_crit = direction < 0  # x_l sits below the s>0 blocks... no: above?
    # orientation: s>0 blocks live in (x_l, y_l); j increases toward x_l,
    # i.e. downward.  s<0 blocks live in (y_{l+1}, x_l); j increases upward.
    if s > 0:
        if direction < 0:  # toward x_l
            if j < m:
                return AtomIndex(l, s, j + 1)
            return AtomIndex(l, s + 1, 1)
        # away from x_l
        if j > 1:
            return AtomIndex(l, s, j - 1)
        if sa > 1:
            return AtomIndex(l, s - 1, (la + sa - 1) ** 3)
        if l - 1 >= params.k0:
            return AtomIndex(l - 1, -1, 1)
        return OUTER
    # s < 0
    if direction > 0:  # toward x_l
        if j < m:
            return AtomIndex(l, s, j + 1)
        return AtomIndex(l, s - 1, 1)
    if j > 1:
        return AtomIndex(l, s, j - 1)
    if sa > 1:
        return AtomIndex(l, s + 1, (la + sa - 1) ** 3)
    return AtomIndex(l + 1, 1, 1)


def host_interval_plus(params, index):
    """Union of I(l,s,j) with its two P_0 neighbours."""
    index = AtomIndex(*index)
    if index == OUTER:
        raise InvalidIndexError("host interval undefined for the outer atom")
    core = atom_bounds(params, index)
    down = neighbor_index(params, index, -1)
    up = neighbor_index(params, index, +1)
    lo = atom_bounds(params, down).lo if down != OUTER else _outer_edge(params, -1)
    hi = atom_bounds(params, up).hi if up != OUTER else _outer_edge(params, +1)
    return Atom(index, lo, hi)


def _outer_edge(params, direction):
    """Edge of the expansion region beyond +-I(k0,1,1) in the given direction."""
    # for direction +1 the neighbour beyond I(k0,1,1) starts at eps and runs to
    # the negative edge atom; clip the host union at the outer boundary of
    # I(0,0,0)'s complement, i.e. at -+(eps - 0) -> use the far edge -eps/eps.
    return -params.eps if direction > 0 else params.eps


# -- binding periods ----------------------------------------------------------

class BindingPeriod(NamedTuple):
    p: int
    capped: bool


def default_cap(params, l, s):
    """50 (|l|+|s|) iterates, a safety factor over the linear upper bound."""
    return 50 * (abs(l) + abs(s))


def binding_period_point(params, x, l, cap):
    """Largest p <= cap such that the orbit of x shadows the orbit of x_l."""
    idx = locate(params, x)
    if idx == OUTER or not s_threshold(params).is_return_block(idx.s):
        s = None if idx == OUTER else idx.s
        raise BindingPreconditionError(
            f"x={x!r} lies in block s={s}, |s| <= s(tau)={params.s_tau:.3f}: "
            "no binding defined")
    p = int(K.binding_period_point(params.pack, float(x), int(l), int(cap)))
    return BindingPeriod(p, p >= cap)


def binding_period_interval(params, l, s, cap=None, n_samples=17):
    """min of the pointwise binding period over a deterministic grid of I(l,s).

    The grid holds both near-endpoint points and Chebyshev interior nodes;
    this approximates the infimum from above (documented approximation risk;
    cross-check by raising n_samples).
    """
    if not s_threshold(params).is_return_block(s):
        raise BindingPreconditionError(f"|s|={abs(s)} <= s(tau)={params.s_tau:.3f}")
    if cap is None:
        cap = default_cap(params, l, s)
    first = atom_bounds(params, AtomIndex(l, s, 1))
    last = atom_bounds(params, AtomIndex(l, s, (abs(l) + abs(s)) ** 3))
    lo = min(first.lo, last.lo)
    hi = max(first.hi, last.hi)
    pad = (hi - lo) * 1e-9
    xs = np.concatenate([[lo + pad, hi - pad], chebyshev_interior(lo, hi, n_samples)])
    best = cap
    any_capped = False
    for x in xs:
        p = int(K.binding_period_point(params.pack, float(x), int(l), int(cap)))
        if p >= cap:
            any_capped = True
        if p < best:
            best = p
    if best >= cap:
        return BindingPeriod(cap, True)
    return BindingPeriod(best, False)


class BindingTable:
    """Memoized p(l,s) per block for one parameter set."""

    def __init__(self, params, n_samples=17):
        self.params = params
        self.n_samples = n_samples
        self._memo = {}

    def period(self, l, s):
        key = (int(l), int(s))
        if key not in self._memo:
            if s_threshold(self.params).is_return_block(s):
                self._memo[key] = binding_period_interval(
                    self.params, l, s, n_samples=self.n_samples)
            else:
                self._memo[key] = BindingPeriod(0, False)
        return self._memo[key]


# -- refined atoms and the case analysis --------------------------------------

@dataclass
class RefinedAtom:
    """An element of P_n with its return history and image arc."""

    lo: float
    hi: float                      # omega = arc lo -> hi (positive orientation)
    arc_lo: float                  # f^n(omega) base point
    arc_span: float
    orient: int                    # +1 if lo maps to arc_lo, -1 if hi does
    returns: list = field(default_factory=list)
    hosts: list = field(default_factory=list)
    status: str = "free"           # free / bound / return / escape / frozen
    bound_until: int = 0
    last_binding: Optional[tuple] = None   # (return time r, period p)
    frozen: bool = False

    @property
    def length(self):
        return (self.hi - self.lo) % 2.0

    def copy(self):
        return replace(self, returns=list(self.returns), hosts=list(self.hosts))


@dataclass
class PartitionState:
    n: int
    atoms: list


def _arc_pos(b, c):
    return (c - b) % 2.0


def _arc_contains(b, span, c, tol=0.0):
    pos = _arc_pos(b, c)
    return tol < pos < span - tol


def _arc_intersect(bA, sA, bB, sB):
    """Components of the arc intersection A cap B, as (base, span) pairs."""
    out = []
    p = _arc_pos(bA, bB)
    lo1, hi1 = p, min(sA, p + sB)
    if lo1 < sA and hi1 > lo1:
        out.append((K.reduce_circle(bA + lo1), hi1 - lo1))
    if p + sB > 2.0:  # B wraps past A's base
        hi2 = min(sA, p + sB - 2.0)
        if hi2 > 0.0:
            out.append((bA, hi2))
    return out


def _expansion_region(params):
    """I(0,0,0) with the two edge atoms I(+-k0,1,1) merged in, as (base, span)."""
    edge = atom_bounds(params, AtomIndex(params.k0, 1, 1))
    return edge.lo, 2.0 - 2.0 * edge.lo


def _locate_for_cover(params, u, inward):
    """locate() that resolves boundary hits toward the arc interior."""
    for nudge in (0.0, 1e-16, 1e-15, 1e-14, 1e-13):
        try:
            return locate(params, u + inward * nudge)
        except (BoundaryPointError, SingularPointError):
            continue
        except DeepLatticeError:
            raise
    raise BoundaryPointError(f"could not resolve {u!r} off an atom boundary")


def _component_covers_atom(params, u, v):
    """Does [u, v] inside [-eps, eps] contain a full atom of P_0?

    True outright when a critical point lies inside (infinitely many deep
    atoms are then covered).
    """
    if v - u <= 0:
        return False
    if u <= 0.0 <= v:
        return True
    if v < 0:
        u, v = -v, -u
    for cand in range(int(params.k0), int(params.k_max) + 1):
        x = K.crit_position(params.pack, cand)
        if u < x < v:
            return True
        if x <= u:
            break
    try:
        iu = _locate_for_cover(params, u, +1)
        iv = _locate_for_cover(params, v, -1)
    except DeepLatticeError:
        return True  # below the resolved lattice: treat as covering frozen atoms
    if iu == iv or iu == OUTER or iv == OUTER:
        return False if iu == iv else True
    bu = atom_bounds(params, iu).hi
    bv = atom_bounds(params, iv).lo
    return bu < bv


def arc_covers_full_atom(params, b, span):
    """Does the arc cover at least one full atom I(l,s,j) (edge atoms included)?"""
    if span >= 2.0 - 1e-12:
        return True
    cr = (-params.eps, 2.0 * params.eps)
    for cb, cs in _arc_intersect(b, span, cr[0], cr[1]):
        u = K.reduce_circle(cb)
        # components of the critical region never wrap +-1
        if _component_covers_atom(params, u, u + cs):
            return True
    return False


def _covers_atom_fully(params, b, span, index):
    a = atom_bounds(params, index)
    alen = _arc_pos(a.lo, a.hi)
    pos = _arc_pos(b, a.lo)
    return pos + alen <= span + 1e-18 and (pos < span or pos == 0.0)


class CaseDecision(NamedTuple):
    kind: str                     # "bound" / "free" / "inessential" / "split"
    host: Optional[AtomIndex] = None


def classify_arc(params, atom, n, sthr):
    """The three-way case split for the image arc of one atom at time n."""
    if atom.returns and atom.last_binding is not None:
        r, p = atom.last_binding
        if n < r + p:
            return CaseDecision("bound")
    b, span = atom.arc_lo, atom.arc_span
    eb, es = _expansion_region(params)
    pos = _arc_pos(eb, b)
    inside_exp = pos < es - 1e-18 and pos + span <= es + 1e-18
    if inside_exp:
        edge_pos = AtomIndex(params.k0, 1, 1)
        edge_neg = AtomIndex(-params.k0, 1, 1)
        if not (_covers_atom_fully(params, b, span, edge_pos)
                or _covers_atom_fully(params, b, span, edge_neg)):
            return CaseDecision("free")
        return CaseDecision("split")
    if arc_covers_full_atom(params, b, span):
        return CaseDecision("split")
    # case 3a: the arc sits inside some host I(l,s,j)^+
    for probe in (b + span * 0.5, b + span * 0.25, b + span * 0.75,
                  b + span * 1e-3, b + span * (1.0 - 1e-3)):
        try:
            idx = locate(params, K.reduce_circle(probe))
        except (BoundaryPointError, SingularPointError, DeepLatticeError):
            continue
        if idx == OUTER:
            continue
        hostp = host_interval_plus(params, idx)
        hpos = _arc_pos(hostp.lo, b)
        hspan = _arc_pos(hostp.lo, hostp.hi)
        if hpos + span <= hspan + 1e-15:
            if sthr.is_return_block(idx.s):
                return CaseDecision("inessential", host=idx)
            return CaseDecision("free")
    raise DiffeoViolationError(
        f"image arc ({b!r}, span {span!r}) fits no host at time {n}")


# -- exact split machinery -----------------------------------------------------

def pullback_interval(params, x0, n, t_lo, t_hi):
    """omega-coordinates of the f^n-preimage component around x0 of [t_lo, t_hi].

    x0's orbit point f^n(x0) must lie inside the target arc.  The pullback
    walks the orbit backwards one step at a time with local bisections, so it
    never leaves the monotone branch even when f^n(omega) wraps the circle.
    """
    lo, hi, ok = K.pullback_interval(params.pack, float(x0), int(n),
                                     float(t_lo), float(t_hi))
    if not ok:
        raise DiffeoViolationError(
            f"pullback of ({t_lo!r}, {t_hi!r}) around {x0!r} failed at time {n}")
    return lo, hi
