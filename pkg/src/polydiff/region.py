"""Connected components of semi-algebraic sets {sign pattern of factors fixed}.

The component is the one containing a designated interior point.  It is
located on a node grid: nodes sharing the interior point's sign pattern are
labelled by 4-connectivity after dropping nodes within about one cell of the
boundary (which separates components meeting at singular points).  The grid
box is grown until the component stops touching its edge, then shrunk to the
component plus a margin.  Membership
of arbitrary points combines the sign pattern with the label of the enclosing
grid cell, falling back to a sign test along the segment to the nearest
component node.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import DegenerateRegion, UnboundedDetected
from .polyring import Poly, evaluate


def _default_grid(d):
    return {1: 4096, 2: 512, 3: 96}.get(d, 24)


class Region:
    """Component of ``{x : sign f_k(x) = sign f_k(x0) for all k}`` through x0."""

    def __init__(self, factors, interior_point, grid=None, max_extent=64.0, max_expansions=8):
        self.factors = [f for f in factors]
        if not self.factors:
            raise ValueError("a region needs at least one boundary factor")
        self.d = self.factors[0].dimension
        self.x0 = np.array([float(v) for v in interior_point])
        self._fns = [f.lambdify() for f in self.factors]
        self._grads = [[f.diff(j).lambdify() for j in range(self.d)] for f in self.factors]
        s0 = self.signs(self.x0[None, :])[0]
        if np.any(s0 == 0):
            raise DegenerateRegion("interior point lies on the boundary")
        self.s0 = s0
        self.grid = grid or _default_grid(self.d)
        self.max_extent = max_extent
        lo, hi, self._ray_found = self._ray_box()
        self._label(lo, hi, max_expansions)

    # -- sign evaluation -----------------------------------------------
    def signs(self, pts):
        pts = np.atleast_2d(pts)
        return np.stack([np.sign(f(pts)) for f in self._fns], axis=1)

    def pattern_ok(self, pts):
        return np.all(self.signs(pts) == self.s0, axis=1)

    def _clear_of_boundary(self, pts, h):
        """Nodes whose distance estimate |f|/|grad f| to every factor exceeds h."""
        ok = np.ones(len(pts), bool)
        for f, grad in zip(self._fns, self._grads):
            val = np.abs(f(pts))
            gn = np.sqrt(sum(g(pts) ** 2 for g in grad))
            ok &= val > h * gn
        return ok

    # -- box search ------------------------------------------------------
    def _ray_exit(self, direction):
        """Distance along a ray to the first change of sign pattern, or None."""
        extent = 1.0
        while extent <= self.max_extent:
            t = np.linspace(0.0, extent, 2049)[1:]
            pts = self.x0 + t[:, None] * direction
            ok = self.pattern_ok(pts)
            bad = np.flatnonzero(~ok)
            if bad.size:
                k = bad[0]
                a = 0.0 if k == 0 else t[k - 1]
                b = t[k]
                for _ in range(60):
                    mid = 0.5 * (a + b)
                    if self.pattern_ok((self.x0 + mid * direction)[None, :])[0]:
                        a = mid
                    else:
                        b = mid
                return b
            extent *= 2
        return None

    def _ray_box(self):
        lo = self.x0.copy()
        hi = self.x0.copy()
        found = np.ones((self.d, 2), bool)
        for j in range(self.d):
            e = np.zeros(self.d)
            e[j] = 1.0
            up = self._ray_exit(e)
            dn = self._ray_exit(-e)
            # an even-multiplicity touching point hides the exit; let the grid decide
            hi[j] += up if up is not None else 1.0
            lo[j] -= dn if dn is not None else 1.0
            found[j] = (dn is not None, up is not None)
        return lo, hi, found

    def _grid_axes(self, lo, hi):
        return [np.linspace(lo[j], hi[j], self.grid + 1) for j in range(self.d)]

    def _label(self, lo, hi, max_expansions):
        ray_lo, ray_hi = lo.copy(), hi.copy()
        span = hi - lo
        lo = lo - 0.05 * span
        hi = hi + 0.05 * span
        for _ in range(max_expansions + 1):
            axes = self._grid_axes(lo, hi)
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            h = 0.75 * float(np.max((hi - lo) / self.grid))
            mask = (self.pattern_ok(pts) & self._clear_of_boundary(pts, h)).reshape(mesh[0].shape)
            labels, _ = ndimage.label(mask)
            seed = self._seed_label(labels, axes)
            comp = labels == seed
            touch_lo = [bool(np.take(comp, 0, axis=j).any()) for j in range(self.d)]
            touch_hi = [bool(np.take(comp, -1, axis=j).any()) for j in range(self.d)]
            if not any(touch_lo) and not any(touch_hi):
                break
            span = hi - lo
            for j in range(self.d):
                if touch_lo[j]:
                    lo[j] -= span[j]
                if touch_hi[j]:
                    hi[j] += span[j]
            if np.any(hi - self.x0 > self.max_extent) or np.any(self.x0 - lo > self.max_extent):
                raise UnboundedDetected(
                    "component keeps touching the search box; region looks unbounded"
                )
        else:
            raise UnboundedDetected("component did not fit in the search box")
        grown = self._grow(comp, labels, seed, pts, mesh[0].shape)
        idx = np.argwhere(grown)
        step = (hi - lo) / self.grid
        new_lo = np.minimum(lo + (idx.min(axis=0) - 2) * step, ray_lo)
        new_hi = np.maximum(lo + (idx.max(axis=0) + 2) * step, ray_hi)
        # thin tips end at singular points of the boundary; keep adjacent ones
        gpts = pts[grown.ravel()]
        tree = cKDTree(gpts)
        span = float(np.max(new_hi - new_lo))
        pad = 0.5 * (hi - lo)
        for sp in self._singular_points(lo - pad, hi + pad):
            dist, j = tree.query(sp)
            c = gpts[j]
            if dist < 0.5 * span and self._tip_reaches(sp, c, 1e-2 * span):
                new_lo = np.minimum(new_lo, sp - 2 * step)
                new_hi = np.maximum(new_hi, sp + 2 * step)
        self.lo, self.hi = new_lo, new_hi
        axes = self._grid_axes(new_lo, new_hi)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        h = 0.75 * float(np.max((new_hi - new_lo) / self.grid))
        mask = (self.pattern_ok(pts) & self._clear_of_boundary(pts, h)).reshape(mesh[0].shape)
        labels, _ = ndimage.label(mask)
        seed = self._seed_label(labels, axes)
        comp = labels == seed
        near = self._grow(comp, labels, seed, pts, mesh[0].shape, iterations=3)
        self._axes = axes
        self._comp = comp
        self._tree = cKDTree(pts[comp.ravel()])
        self._comp_nodes = self._tree.data
        # cell flag: any corner of the cell is on (or hugs) the component
        cell = np.zeros(tuple(self.grid for _ in range(self.d)), bool)
        for corner in np.ndindex(*(2,) * self.d):
            sl = tuple(slice(c, c + self.grid) for c in corner)
            cell |= near[sl]
        self._cells = cell

    def _singular_points(self, lo, hi, n_seeds=400, iters=80):
        """Numerical points of the box where the product Q and its gradient vanish."""
        Q = self.factors[0]
        for f in self.factors[1:]:
            Q = Q * f
        d = self.d
        q = Q.lambdify()
        grad = [Q.diff(j) for j in range(d)]
        gf = [g.lambdify() for g in grad]
        hf = [[grad[i].diff(j).lambdify() for j in range(d)] for i in range(d)]
        m = {2: 160, 3: 40}.get(d, 12)
        axes = [np.linspace(lo[j], hi[j], m) for j in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([a.ravel() for a in mesh], axis=1)
        qv = np.abs(q(pts))
        gv = np.sqrt(sum(g(pts) ** 2 for g in gf))
        score = qv / (qv.max() + 1e-300) + gv / (gv.max() + 1e-300)
        x = pts[np.argsort(score)[:n_seeds]].copy()
        for _ in range(iters):
            G = np.stack([g(x) for g in gf], axis=1)
            H = np.stack([np.stack([h(x) for h in row], axis=1) for row in hf], axis=1)
            H = H + 1e-14 * np.eye(d)
            try:
                dx = np.linalg.solve(H, G[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
            x = x - dx
            x = np.where(np.isfinite(x), x, 0.0)
        scale = float(sum(abs(float(c)) for c in Q.terms.values())) or 1.0
        keep = (np.abs(q(x)) < 1e-9 * scale) & np.all((x >= lo) & (x <= hi), axis=1)
        gnorm = np.sqrt(sum(g(x) ** 2 for g in gf))
        keep &= gnorm < 1e-6 * scale
        tol = 1e-3 * float(np.max(hi - lo))
        found = []
        for p in x[keep]:
            if all(np.linalg.norm(p - r) > tol for r in found):
                found.append(p)
        return found

    def _tip_reaches(self, target, start, tol, max_steps=120):
        """Follow same-pattern points from ``start`` towards ``target``.

        Each step contracts towards the target and re-projects onto the
        region along the perpendicular line through the contracted point.
        """
        x = np.asarray(start, float)
        offs = np.linspace(-0.3, 0.3, 2049)
        for _ in range(max_steps):
            v = x - target
            dist = float(np.linalg.norm(v))
            if dist < tol:
                return True
            y = target + 0.85 * v
            if self.d == 1:
                cands = y[None, :]
            else:
                u = v / dist
                # some direction orthogonal to u
                e = np.eye(self.d)[np.argmin(np.abs(u))]
                n = e - (e @ u) * u
                n /= np.linalg.norm(n)
                cands = y + (offs * dist)[:, None] * n
            ok = self.pattern_ok(cands)
            if not ok.any():
                return False
            good = cands[ok]
            best = good[np.argmin(np.linalg.norm(good - y, axis=1))]
            x = best
        return False

    def _grow(self, comp, labels, seed, pts, shape, iterations=None):
        """Dilate the buffered component into the unbuffered same-pattern nodes.

        Other buffered components are forbidden, so the growth recovers the
        strip next to the boundary and thin tips without crossing over to a
        neighbouring component through a singular point.
        """
        full = self.pattern_ok(pts).reshape(shape)
        allowed = full & ~((labels > 0) & (labels != seed))
        iterations = iterations or max(8, self.grid // 8)
        return ndimage.binary_dilation(comp, iterations=iterations, mask=allowed) | comp

    def _seed_label(self, labels, axes):
        """Label of the component containing x0 (nearest same-pattern node)."""
        idx = [int(np.clip(np.searchsorted(a, x) - 1, 0, len(a) - 2)) for a, x in zip(axes, self.x0)]
        best = None
        for corner in np.ndindex(*(2,) * self.d):
            node = tuple(i + c for i, c in zip(idx, corner))
            lab = labels[node]
            if lab:
                p = np.array([axes[j][node[j]] for j in range(self.d)])
                dist = np.linalg.norm(p - self.x0)
                if self._segment_ok(self.x0, p) and (best is None or dist < best[0]):
                    best = (dist, lab)
        if best is not None:
            return best[1]
        # fall back: nearest labelled node reachable by a clean segment
        nodes = np.argwhere(labels > 0)
        if nodes.size == 0:
            raise DegenerateRegion("no grid node shares the interior sign pattern")
        coords = np.stack([axes[j][nodes[:, j]] for j in range(self.d)], axis=1)
        order = np.argsort(np.linalg.norm(coords - self.x0, axis=1))
        for k in order[:256]:
            if self._segment_ok(self.x0, coords[k]):
                return labels[tuple(nodes[k])]
        raise DegenerateRegion("grid too coarse to resolve the component of the interior point")

    def _segment_ok(self, a, b, n=32):
        t = np.linspace(0, 1, n)[:, None]
        return bool(self.pattern_ok(a + t * (b - a)).all())

    # -- public ----------------------------------------------------------
    @property
    def box(self):
        return self.lo.copy(), self.hi.copy()

    def box_fractions(self, max_denominator=10**6):
        """Outward-rounded rational box."""
        lo = [Fraction(v).limit_denominator(max_denominator) for v in self.lo]
        hi = [Fraction(v).limit_denominator(max_denominator) for v in self.hi]
        eps = Fraction(1, max_denominator)
        return [v - eps for v in lo], [v + eps for v in hi]

    @property
    def volume_box(self):
        return float(np.prod(self.hi - self.lo))

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        inside_box = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        ok = inside_box & self.pattern_ok(pts)
        if not ok.any():
            return ok
        step = (self.hi - self.lo) / self.grid
        cidx = np.clip(((pts - self.lo) / step).astype(int), 0, self.grid - 1)
        flagged = np.zeros(len(pts), bool)
        sel = np.flatnonzero(ok)
        flagged[sel] = self._cells[tuple(cidx[sel].T)]
        # ambiguous: pattern matches but no component corner nearby
        amb = np.flatnonzero(ok & ~flagged)
        if amb.size:
            _, nearest = self._tree.query(pts[amb])
            for k, j in zip(amb, nearest):
                flagged[k] = self._segment_ok(pts[k], self._comp_nodes[j], 16)
        return ok & flagged

    def sample(self, n, seed=0, max_draws=None, return_rate=False):
        """n points of the component from a scrambled Sobol sequence on the box."""
        sampler = qmc.Sobol(self.d, scramble=True, seed=np.random.default_rng(seed))
        max_draws = max_draws or max(64 * n, 2**16)
        out = []
        drawn = 0
        batch = 1 << int(np.ceil(np.log2(max(2 * n, 256))))
        while sum(len(o) for o in out) < n and drawn < max_draws:
            u = sampler.random(batch)
            pts = self.lo + u * (self.hi - self.lo)
            out.append(pts[self.contains(pts)])
            drawn += batch
        got = np.concatenate(out) if out else np.empty((0, self.d))
        rate = len(got) / max(drawn, 1)
        if len(got) < n:
            if rate < 1e-4:
                raise DegenerateRegion(f"acceptance rate {rate:.2e} too small")
        got = got[:n]
        return (got, rate) if return_rate else got


def region_of(boundary, interior_point, **kw) -> Region:
    """Region for a BoundarySpec (factors) or a single polynomial."""
    if isinstance(boundary, Poly):
        factors = [boundary]
    else:
        factors = list(boundary.factors)
    return Region(factors, interior_point, **kw)


def find_interior_rational(Q: Poly, hint, max_denominator=64):
    """Rational point near ``hint`` with Q nonzero."""
    pt = [Fraction(v).limit_denominator(max_denominator) for v in hint]
    if evaluate(Q, pt) != 0:
        return pt
    for k in range(1, 100):
        cand = [v + Fraction(k, 997) for v in pt]
        if evaluate(Q, cand) != 0:
            return cand
    raise DegenerateRegion("could not find a rational interior point")
