"""SVG drawings of plane algebraic curves Q = 0 by marching squares.

Segment endpoints are interpolated on cell edges and then pulled onto the
curve by a few Newton steps along the gradient, which keeps |Q| at the
emitted vertices far below the grid scale away from singular points.
"""

from __future__ import annotations

import json
from xml.sax.saxutils import escape

import numpy as np

from .polyring import Poly

# cases of the 4-bit corner code -> pairs of cell edges (0 bottom, 1 right, 2 top, 3 left)
_EDGES = {
    1: ((3, 0),), 2: ((0, 1),), 3: ((3, 1),), 4: ((1, 2),), 5: ((3, 2), (0, 1)),
    6: ((0, 2),), 7: ((3, 2),), 8: ((2, 3),), 9: ((0, 2),), 10: ((0, 3), (1, 2)),
    11: ((1, 2),), 12: ((1, 3),), 13: ((0, 1),), 14: ((0, 3),),
}


def marching_squares(Q: Poly, box, grid=512, newton_steps=3):
    """Line segments approximating Q = 0 in box = ((x0, y0), (x1, y1)).

    Returns (segments of shape (k, 2, 2), grid spacing).
    """
    (x0, y0), (x1, y1) = [tuple(map(float, p)) for p in box]
    f = Q.lambdify()
    # irrational sub-cell offset keeps grid nodes off lines such as x = 0
    xs = np.linspace(x0, x1, grid + 1) + (x1 - x0) / grid * 0.0137 * np.sqrt(2)
    ys = np.linspace(y0, y1, grid + 1) + (y1 - y0) / grid * 0.0119 * np.sqrt(3)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = f(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    F = np.where(F == 0, 1e-300, F)
    pos = F > 0
    code = (pos[:-1, :-1] * 1 + pos[1:, :-1] * 2 + pos[1:, 1:] * 4 + pos[:-1, 1:] * 8)
    segs = []
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    for c, pairs in _EDGES.items():
        I, J = np.nonzero(code == c)
        if not I.size:
            continue
        f00, f10 = F[I, J], F[I + 1, J]
        f11, f01 = F[I + 1, J + 1], F[I, J + 1]
        bx, by = xs[I], ys[J]

        def edge_point(e):
            if e == 0:  # bottom: (i,j)-(i+1,j)
                t = f00 / (f00 - f10)
                return np.column_stack([bx + t * hx, by])
            if e == 1:  # right
                t = f10 / (f10 - f11)
                return np.column_stack([bx + hx, by + t * hy])
            if e == 2:  # top
                t = f01 / (f01 - f11)
                return np.column_stack([bx + t * hx, by + hy])
            t = f00 / (f00 - f01)  # left
            return np.column_stack([bx, by + t * hy])

        for a, b in pairs:
            segs.append(np.stack([edge_point(a), edge_point(b)], axis=1))
    if not segs:
        return np.zeros((0, 2, 2)), max(hx, hy)
    S = np.concatenate(segs)
    if newton_steps:
        S = _project(Q, S.reshape(-1, 2), newton_steps, max(hx, hy)).reshape(-1, 2, 2)
    return S, max(hx, hy)


def _project(Q, P, steps, h):
    f = Q.lambdify()
    gx, gy = Q.diff(0).lambdify(), Q.diff(1).lambdify()
    P = P.copy()
    start = P.copy()
    for _ in range(steps):
        v = f(P)
        g = np.column_stack([gx(P), gy(P)])
        n2 = np.einsum("ij,ij->i", g, g)
        ok = n2 > 1e-24
        delta = np.zeros_like(P)
        delta[ok] = (v[ok] / n2[ok])[:, None] * g[ok]
        cand = P - delta
        # never move a vertex by more than one cell (singular points)
        far = np.linalg.norm(cand - start, axis=1) > h
        P = np.where(far[:, None], P, cand)
    return P


def chain(segments, tol):
    """Join segments sharing endpoints into polylines."""
    key = lambda p: (round(p[0] / tol), round(p[1] / tol))
    ends = {}
    for k, (a, b) in enumerate(segments):
        ends.setdefault(key(a), []).append((k, 0))
        ends.setdefault(key(b), []).append((k, 1))
    used = np.zeros(len(segments), bool)
    lines = []
    for k in range(len(segments)):
        if used[k]:
            continue
        used[k] = True
        line = [segments[k][0], segments[k][1]]
        for direction in (1, 0):
            while True:
                tip = line[-1] if direction else line[0]
                nxt = None
                for j, side in ends.get(key(tip), []):
                    if not used[j]:
                        nxt = (j, side)
                        break
                if nxt is None:
                    break
                j, side = nxt
                used[j] = True
                p = segments[j][1 - side]
                if direction:
                    line.append(p)
                else:
                    line.insert(0, p)
        lines.append(np.array(line))
    return lines


def render_svg(Q: Poly, box, grid=512, title="", width=480):
    """SVG 1.1 document of Q = 0; returns (svg text, metadata dict)."""
    if Q.dimension != 2:
        raise ValueError("render needs a polynomial in two variables")
    segs, h = marching_squares(Q, box, grid)
    f = Q.lambdify()
    verts = segs.reshape(-1, 2)
    vals = np.abs(f(verts)) if len(verts) else np.zeros(0)
    lines = chain(segs, h * 1e-3)
    (x0, y0), (x1, y1) = [tuple(map(float, p)) for p in box]
    sx = width / (x1 - x0)
    height = int(round((y1 - y0) * sx))
    meta = {
        "schema": "polydiff/1",
        "polynomial": Q.to_string(),
        "box": [[x0, y0], [x1, y1]],
        "grid": grid,
        "cell": h,
        "vertices": int(len(verts)),
        "max_abs_Q_at_vertices": float(vals.max()) if len(vals) else 0.0,
        "tolerance": h,
    }
    paths = []
    for line in lines:
        px = (line[:, 0] - x0) * sx
        py = (y1 - line[:, 1]) * sx
        d = "M " + " L ".join(f"{a:.3f} {b:.3f}" for a, b in zip(px, py))
        paths.append(f'<path d="{d}"/>')
    body = "\n".join(paths)
    svg = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f"<title>{escape(title or Q.to_string())}</title>\n"
        f"<metadata>{escape(json.dumps(meta))}</metadata>\n"
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        f'<g fill="none" stroke="black" stroke-width="1.2">\n{body}\n</g>\n</svg>\n'
    )
    meta["polylines"] = lines
    return svg, meta


def default_box(m=None, Q=None, margin=0.25):
    """Region box of a model widened by ``margin`` on each side; else [-2, 2]^2."""
    if m is not None and m.boundary is not None and m.interior_point is not None:
        from .measure import _region

        lo, hi = _region(m).box
        span = hi - lo
        return (tuple(lo - margin * span), tuple(hi + margin * span))
    return ((-2.0, -2.0), (2.0, 2.0))


def parse_svg_polylines(text):
    """Polylines back in SVG pixel coordinates (for tests and tooling)."""
    import re

    out = []
    for d in re.findall(r'<path d="([^"]+)"', text):
        nums = [float(v) for v in re.findall(r"-?\d+\.?\d*", d)]
        out.append(np.array(nums).reshape(-1, 2))
    return out
