"""Models of definable subsets of R^n (n <= 3).

Four set kinds are supported:

* :class:`SignCondition` — a conjunction of atoms ``expr op 0``;
* :class:`ParametricPatch` — the image of a box under a definable map;
* :class:`GraphBand` — the open region between two ordered graphs;
* :class:`FiniteUnion` — a finite union of the above.

Every kind answers membership by expression evaluation alone.  Boundary
sampling produces a :class:`PointCloud` whose points sit on the defining
equalities to residual <= 1e-9; distance-to-complement queries go through
the sampled boundary, polished by Newton projection where a defining
expression is available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import PointOutsideSet, UnboundedSet
from .expr import Expr, UnaryRestriction, isolate_roots

EQ_TOL = 1e-9

_STRICT = {"lt": np.less, "gt": np.greater}
_CLOSED = {"lt": "le", "gt": "ge", "le": "le", "ge": "ge", "eq": "eq"}
_FLIP = {"lt": "gt", "gt": "lt", "le": "ge", "ge": "le", "eq": "eq"}


@dataclass(frozen=True)
class Atom:
    """One sign condition ``expr op 0``.

    Public sets use ``op`` in {"lt", "eq", "gt"}; the closed variants
    {"le", "ge"} appear internally when a boundary feature is filtered by
    the closure of the remaining atoms.
    """

    expr: Expr
    op: str

    def __post_init__(self):
        if self.op not in ("lt", "eq", "gt", "le", "ge"):
            raise ValueError(f"unknown atom op {self.op!r}")

    def holds_many(self, points: np.ndarray) -> np.ndarray:
        vals, valid = self.expr.eval_many(points)
        if self.op == "eq":
            ok = valid & (np.abs(vals) <= EQ_TOL)
        elif self.op == "le":
            ok = valid & (vals <= EQ_TOL)
        elif self.op == "ge":
            ok = valid & (vals >= -EQ_TOL)
        else:
            ok = valid & _STRICT[self.op](vals, 0.0)
        return ok

    def closure(self) -> "Atom":
        return Atom(self.expr, _CLOSED[self.op])


@dataclass
class PointCloud:
    """Sampled boundary points with the feature each one came from."""

    points: np.ndarray  # (m, n)
    tags: list[str]
    pitch: float  # guaranteed spacing along each sampled feature

    def __len__(self):
        return len(self.points)


def _canonicalize(points: np.ndarray, tags: list[str]) -> tuple[np.ndarray, list[str]]:
    if len(points) == 0:
        return points.reshape(0, points.shape[1] if points.ndim == 2 else 0), tags
    order = np.lexsort(points.T[::-1])
    return points[order], [tags[i] for i in order]


class DefinableSet:
    """Common surface: membership, boundary sampling, bounding box."""

    dim: int
    bounding_box: list[tuple[float, float]] | None

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float).reshape(1, -1)
        return bool(self.contains_many(p)[0])

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def boundary_sample(self, density: int) -> PointCloud:
        raise NotImplementedError

    def _require_box(self) -> list[tuple[float, float]]:
        if self.bounding_box is None:
            raise UnboundedSet(f"{type(self).__name__} declares no bounding box")
        return self.bounding_box

    def box_diameter(self) -> float:
        box = self._require_box()
        return float(np.linalg.norm([hi - lo for lo, hi in box]))

    # feature descriptors used by the distance refinement; (kind, payload)
    def _distance_features(self):
        return []


class SignCondition(DefinableSet):
    """Conjunction of sign conditions; disjunctions go through FiniteUnion."""

    def __init__(self, atoms: list[Atom], dim: int,
                 bounding_box: list[tuple[float, float]] | None = None):
        if not atoms:
            raise ValueError("need at least one atom")
        self.atoms = list(atoms)
        self.dim = int(dim)
        self.bounding_box = bounding_box

    def __repr__(self):
        return "SignCondition(" + " & ".join(
            f"{a.expr.to_text()} {a.op} 0" for a in self.atoms) + ")"

    def contains_many(self, points):
        points = np.asarray(points, dtype=float)
        ok = np.ones(len(points), dtype=bool)
        for a in self.atoms:
            ok &= a.holds_many(points)
        return ok

    def equality_atoms(self):
        return [a for a in self.atoms if a.op == "eq"]

    def boundary_sample(self, density):
        """Trace every atom's zero curve, filtered by the closure of the
        remaining atoms.  2-D sign conditions use marching squares refined
        by Newton onto {expr = 0}."""
        box = self._require_box()
        if self.dim != 2:
            raise NotImplementedError("boundary sampling of sign conditions needs n = 2")
        pts, tags = [], []
        for i, a in enumerate(self.atoms):
            others = [b.closure() for j, b in enumerate(self.atoms) if j != i]
            cur = _trace_zero_curve(a.expr, box, density)
            if len(cur) == 0:
                continue
            keep = np.ones(len(cur), dtype=bool)
            for b in others:
                keep &= b.holds_many(cur)
            cur = cur[keep]
            pts.append(cur)
            tags.extend([f"atom{i}"] * len(cur))
        all_pts = np.vstack(pts) if pts else np.zeros((0, self.dim))
        all_pts, tags = _canonicalize(all_pts, tags)
        return PointCloud(all_pts, tags, pitch=self.box_diameter() / density)

    def _distance_features(self):
        feats = []
        for i, a in enumerate(self.atoms):
            others = [b.closure() for j, b in enumerate(self.atoms) if j != i]
            feats.append((f"atom{i}", ("implicit", a.expr, others)))
        return feats


class ParametricPatch(DefinableSet):
    """Image of a parameter box under a tuple of expressions."""

    def __init__(self, component_exprs: list[Expr], param_box: list[tuple[float, float]],
                 dim: int, bounding_box: list[tuple[float, float]] | None = None):
        if len(component_exprs) != dim:
            raise ValueError("one component expression per ambient coordinate")
        self.components = list(component_exprs)
        self.param_box = [(float(lo), float(hi)) for lo, hi in param_box]
        self.k = len(self.param_box)
        self.dim = int(dim)
        self.bounding_box = bounding_box

    def map_many(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cols, valid = [], np.ones(len(params), dtype=bool)
        for c in self.components:
            v, ok = c.eval_many(params)
            cols.append(v)
            valid &= ok
        return np.column_stack(cols), valid

    def contains_many(self, points):
        points = np.asarray(points, dtype=float)
        return np.array([self._inverse_solve(p) is not None for p in points])

    def _inverse_solve(self, point, seeds_per_axis: int = 12):
        """Find params in the box with map(params) ~ point (residual <= 1e-9).

        Gauss-Newton from a multi-start grid; returns the parameter vector
        or None.
        """
        axes = [np.linspace(lo, hi, seeds_per_axis + 2)[1:-1] for lo, hi in self.param_box]
        mesh = np.meshgrid(*axes, indexing="ij")
        seeds = np.column_stack([m.ravel() for m in mesh])
        img, ok = self.map_many(seeds)
        if not ok.any():
            return None
        res = np.linalg.norm(img[ok] - point, axis=1)
        order = np.argsort(res)
        cands = seeds[ok][order[: min(6, len(order))]]
        for u in cands:
            u = self._gauss_newton(u.copy(), np.asarray(point, dtype=float))
            if u is not None:
                return u
        return None

    def _gauss_newton(self, u, target, iters=60):
        lo = np.array([b[0] for b in self.param_box])
        hi = np.array([b[1] for b in self.param_box])
        for _ in range(iters):
            r = np.empty(self.dim)
            J = np.empty((self.dim, self.k))
            row = u.reshape(1, -1)
            for i, c in enumerate(self.components):
                v, g, ok = c.grad_many(row)
                if not ok[0]:
                    return None
                r[i] = v[0] - target[i]
                J[i] = g[0, : self.k]
            if np.linalg.norm(r) <= EQ_TOL:
                return u
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            if not np.all(np.isfinite(step)):
                return None
            u = np.clip(u + step, lo, hi)
        return u if np.linalg.norm(r) <= EQ_TOL else None

    def boundary_sample(self, density):
        """Thin image: sample the whole patch on a parameter grid."""
        self._require_box()
        per_axis = max(2, int(np.ceil(density ** (1.0 / self.k))))
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.param_box]
        mesh = np.meshgrid(*axes, indexing="ij")
        params = np.column_stack([m.ravel() for m in mesh])
        img, ok = self.map_many(params)
        img = img[ok]
        img, tags = _canonicalize(img, ["patch"] * len(img))
        return PointCloud(img, tags, pitch=self.box_diameter() / density)


class GraphBand(DefinableSet):
    """Open band {(x', xn) : x' in base, lower(x') < xn < upper(x')} for n = 2."""

    def __init__(self, base: tuple[float, float], lower: Expr, upper: Expr,
                 bounding_box: list[tuple[float, float]] | None = None,
                 check_samples: int = 64):
        self.base = (float(base[0]), float(base[1]))
        self.lower = lower
        self.upper = upper
        self.dim = 2
        xs = np.linspace(self.base[0], self.base[1], check_samples).reshape(-1, 1)
        lo, ok1 = lower.eval_many(xs)
        hi, ok2 = upper.eval_many(xs)
        good = ok1 & ok2
        if not good.any() or not np.all(lo[good] < hi[good]):
            raise ValueError("GraphBand requires lower < upper on the base")
        if bounding_box is None:
            bounding_box = [
                (self.base[0], self.base[1]),
                (float(np.min(lo[good])), float(np.max(hi[good]))),
            ]
        self.bounding_box = bounding_box

    def contains_many(self, points):
        points = np.asarray(points, dtype=float)
        x = points[:, :1]
        inside = (points[:, 0] > self.base[0]) & (points[:, 0] < self.base[1])
        lo, ok1 = self.lower.eval_many(x)
        hi, ok2 = self.upper.eval_many(x)
        return inside & ok1 & ok2 & (lo < points[:, 1]) & (points[:, 1] < hi)

    def boundary_sample(self, density):
        a, b = self.base
        xs = np.linspace(a, b, max(density, 2))
        col = xs.reshape(-1, 1)
        lo, ok1 = self.lower.eval_many(col)
        hi, ok2 = self.upper.eval_many(col)
        pts, tags = [], []
        good = ok1 & ok2
        pts.append(np.column_stack([xs[good], lo[good]]))
        tags += ["lower"] * int(good.sum())
        pts.append(np.column_stack([xs[good], hi[good]]))
        tags += ["upper"] * int(good.sum())
        for name, xend in (("end0", a), ("end1", b)):
            try:
                l0 = self.lower.eval([xend])
                h0 = self.upper.eval([xend])
            except Exception:
                continue
            fib = np.linspace(l0, h0, max(density // 4, 2))
            pts.append(np.column_stack([np.full_like(fib, xend), fib]))
            tags += [name] * len(fib)
        all_pts = np.vstack(pts)
        all_pts, tags = _canonicalize(all_pts, tags)
        return PointCloud(all_pts, tags, pitch=self.box_diameter() / density)

    def _distance_features(self):
        a, b = self.base
        feats = [
            ("lower", ("graph", self.lower, (a, b))),
            ("upper", ("graph", self.upper, (a, b))),
        ]
        for name, xend in (("end0", a), ("end1", b)):
            try:
                seg = (np.array([xend, self.lower.eval([xend])]),
                       np.array([xend, self.upper.eval([xend])]))
            except Exception:
                continue
            feats.append((name, ("segment", seg)))
        return feats


class FiniteUnion(DefinableSet):
    def __init__(self, parts: list[DefinableSet]):
        if not parts:
            raise ValueError("union of nothing")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ValueError("union parts must share the ambient dimension")
        self.parts = list(parts)
        self.dim = dims.pop()
        boxes = [p.bounding_box for p in parts]
        if all(b is not None for b in boxes):
            self.bounding_box = [
                (min(b[i][0] for b in boxes), max(b[i][1] for b in boxes))
                for i in range(self.dim)
            ]
        else:
            self.bounding_box = None

    def contains_many(self, points):
        points = np.asarray(points, dtype=float)
        ok = np.zeros(len(points), dtype=bool)
        for p in self.parts:
            ok |= p.contains_many(points)
        return ok

    def boundary_sample(self, density):
        pts, tags = [], []
        for i, p in enumerate(self.parts):
            c = p.boundary_sample(density)
            pts.append(c.points)
            tags.extend([f"p{i}:{t}" for t in c.tags])
        all_pts = np.vstack(pts)
        all_pts, tags = _canonicalize(all_pts, tags)
        return PointCloud(all_pts, tags, pitch=self.box_diameter() / density)

    def _distance_features(self):
        feats = []
        for i, p in enumerate(self.parts):
            feats.extend((f"p{i}:{name}", payload) for name, payload in p._distance_features())
        return feats


# ---------------------------------------------------------------------------
# Boundary curve tracing (marching squares + Newton).
# ---------------------------------------------------------------------------


def _trace_zero_curve(expr: Expr, box, density: int) -> np.ndarray:
    """Points on {expr = 0} inside the box, residual <= 1e-9.

    Sign changes along grid edges give linear-interpolation seeds; a few
    vectorized Newton steps along the gradient push them onto the curve.
    """
    (x0, x1), (y0, y1) = box
    nx = ny = max(int(density), 8)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([XX.ravel(), YY.ravel()])
    vals, valid = expr.eval_many(grid)
    V = vals.reshape(nx + 1, ny + 1)
    M = valid.reshape(nx + 1, ny + 1)

    seeds = []
    # vertical edges (along y)
    a, b = V[:, :-1], V[:, 1:]
    ok = M[:, :-1] & M[:, 1:] & ((a * b < 0) | (a == 0))
    ii, jj = np.nonzero(ok)
    if len(ii):
        va, vb = a[ii, jj], b[ii, jj]
        frac = np.where(va == 0, 0.0, va / (va - vb))
        seeds.append(np.column_stack([xs[ii], ys[jj] + frac * (ys[1] - ys[0])]))
    # horizontal edges (along x)
    a, b = V[:-1, :], V[1:, :]
    ok = M[:-1, :] & M[1:, :] & ((a * b < 0) | (a == 0))
    ii, jj = np.nonzero(ok)
    if len(ii):
        va, vb = a[ii, jj], b[ii, jj]
        frac = np.where(va == 0, 0.0, va / (va - vb))
        seeds.append(np.column_stack([xs[ii] + frac * (xs[1] - xs[0]), ys[jj]]))
    if not seeds:
        return np.zeros((0, 2))
    pts = np.vstack(seeds)
    pts = _newton_onto_curve(expr, pts)
    vals, valid = expr.eval_many(pts)
    return pts[valid & (np.abs(vals) <= EQ_TOL)]


def _newton_onto_curve(expr: Expr, pts: np.ndarray, iters: int = 30) -> np.ndarray:
    """First-order projection steps q <- q - f(q) grad/|grad|^2."""
    q = pts.copy()
    for _ in range(iters):
        v, g, ok = expr.grad_many(q)
        norm2 = np.einsum("ij,ij->i", g, g)
        ok = ok & (norm2 > 0)
        if not ok.any():
            break
        step = np.zeros_like(q)
        step[ok] = (v[ok] / norm2[ok])[:, None] * g[ok]
        if np.max(np.abs(v[ok])) <= 1e-13:
            break
        q = q - step
    return q


# ---------------------------------------------------------------------------
# Distance to complement.
# ---------------------------------------------------------------------------


@dataclass
class _DistanceField:
    """Cached boundary cloud plus per-feature refinement for one set."""

    owner: DefinableSet
    density: int
    cloud: PointCloud = field(init=False)
    tree: cKDTree = field(init=False)
    feature_trees: dict = field(init=False)

    def __post_init__(self):
        self.cloud = self.owner.boundary_sample(self.density)
        if len(self.cloud) == 0:
            raise UnboundedSet("boundary sampling produced no points")
        self.tree = cKDTree(self.cloud.points)
        self.feature_trees = {}
        feats = dict(self.owner._distance_features())
        for name, payload in feats.items():
            mask = np.array([t == name for t in self.cloud.tags])
            if mask.any():
                self.feature_trees[name] = (cKDTree(self.cloud.points[mask]),
                                            self.cloud.points[mask], payload)

    def query(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=float)
        upper, _ = self.tree.query(points)
        for name, (ftree, fpts, payload) in self.feature_trees.items():
            kind = payload[0]
            if kind == "implicit":
                _, idx = ftree.query(points)
                d = _implicit_foot_distance(payload[1], payload[2], points, fpts[idx])
            elif kind == "graph":
                _, idx = ftree.query(points)
                d = _graph_foot_distance(payload[1], payload[2], points, fpts[idx])
            elif kind == "segment":
                d = _segment_distance(points, *payload[1])
            else:
                continue
            upper = np.minimum(upper, d)
        lower = np.maximum(upper - self.cloud.pitch, 0.0)
        return lower, upper


def _implicit_foot_distance(expr, closure_atoms, points, seeds, iters=40):
    """Distance from each point to {expr=0} (within the closure filter).

    Projected-gradient descent of the distance restricted to the curve,
    seeded at the nearest cloud sample; invalid feet fall back to +inf so
    the caller keeps the raw cloud distance.
    """
    q = seeds.copy()
    for _ in range(iters):
        v, g, ok = expr.grad_many(q)
        norm2 = np.einsum("ij,ij->i", g, g)
        ok = ok & (norm2 > 0)
        if not ok.any():
            break
        # normal step onto the curve
        qn = q.copy()
        qn[ok] -= (v[ok] / norm2[ok])[:, None] * g[ok]
        # tangential slide toward the query point
        v2, g2, ok2 = expr.grad_many(qn)
        n2 = np.einsum("ij,ij->i", g2, g2)
        ok2 = ok2 & (n2 > 0)
        tang = np.zeros_like(qn)
        diff = points - qn
        proj = np.einsum("ij,ij->i", diff, g2, optimize=False)
        tang[ok2] = diff[ok2] - (proj[ok2] / n2[ok2])[:, None] * g2[ok2]
        q = qn + 0.8 * tang
    # final normal polish
    for _ in range(5):
        v, g, ok = expr.grad_many(q)
        norm2 = np.einsum("ij,ij->i", g, g)
        ok = ok & (norm2 > 0)
        q[ok] -= (v[ok] / norm2[ok])[:, None] * g[ok]
    v, ok = expr.eval_many(q)
    good = ok & (np.abs(v) <= 1e-7)
    for atom in closure_atoms:
        good &= atom.holds_many(q)
    d = np.linalg.norm(points - q, axis=1)
    return np.where(good, d, np.inf)


def _graph_foot_distance(graph_expr, base, points, seeds, iters=40):
    """Distance to the graph {(a, phi(a)) : a in [base]} by 1-D descent."""
    a = seeds[:, 0].copy()
    lo, hi = base
    px, py = points[:, 0], points[:, 1]
    step = np.full_like(a, max(1e-3 * (hi - lo), 1e-9))
    col = a.reshape(-1, 1)
    phi, g, ok = graph_expr.grad_many(col)
    best = np.where(ok, np.hypot(a - px, phi - py), np.inf)
    for _ in range(iters):
        for sgn in (1.0, -1.0):
            cand = np.clip(a + sgn * step, lo, hi)
            phi_c, okc = graph_expr.eval_many(cand.reshape(-1, 1))
            d = np.where(okc, np.hypot(cand - px, phi_c - py), np.inf)
            better = d < best
            a = np.where(better, cand, a)
            best = np.minimum(best, d)
        step *= 0.6
    return best


def _segment_distance(points, p0, p1):
    d = p1 - p0
    L2 = float(d @ d)
    if L2 == 0.0:
        return np.linalg.norm(points - p0, axis=1)
    t = np.clip(((points - p0) @ d) / L2, 0.0, 1.0)
    feet = p0[None, :] + t[:, None] * d[None, :]
    return np.linalg.norm(points - feet, axis=1)


def _distance_field(s: DefinableSet, density: int) -> _DistanceField:
    cache = getattr(s, "_dist_cache", None)
    if cache is None:
        cache = {}
        try:
            s._dist_cache = cache
        except AttributeError:
            pass
    if density not in cache:
        cache[density] = _DistanceField(s, density)
    return cache[density]


def distance_to_complement(open_set: DefinableSet, point, density: int) -> tuple[float, float]:
    """Bracket [lower, upper] for d(point, R^n \\ open_set).

    For a bounded open set this is the distance to the sampled boundary;
    the gap upper - lower equals the sampling pitch and shrinks as the
    density grows.
    """
    p = np.asarray(point, dtype=float)
    if not open_set.contains(p):
        raise PointOutsideSet(f"{p.tolist()} is not in the open set")
    lower, upper = _distance_field(open_set, density).query(p.reshape(1, -1))
    return float(lower[0]), float(upper[0])


def distance_to_complement_many(open_set: DefinableSet, points: np.ndarray,
                                density: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`distance_to_complement` without the membership check."""
    return _distance_field(open_set, density).query(points)


def contains(s: DefinableSet, point) -> bool:
    return s.contains(point)


def boundary_sample(s: DefinableSet, density: int) -> PointCloud:
    return s.boundary_sample(density)


# ---------------------------------------------------------------------------
# Singular points of a plane curve {p = 0}.
# ---------------------------------------------------------------------------


def find_singular_points(curve_expr: Expr, box, seeds_per_axis: int = 33) -> PointCloud:
    """Points with |p| <= 1e-9 and ||grad p|| <= 1e-6 inside the box.

    Grid seeding followed by damped Newton on (p, dp/dx1) (finite-difference
    Jacobian row for the derivative), then a Gauss-Newton polish on the full
    residual (p, dp/dx1, dp/dx2).
    """
    (x0, x1), (y0, y1) = box
    xs = np.linspace(x0, x1, seeds_per_axis)
    ys = np.linspace(y0, y1, seeds_per_axis)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    seeds = np.column_stack([XX.ravel(), YY.ravel()])
    scale = max(x1 - x0, y1 - y0)

    found = []
    for s in seeds:
        q = _newton_singular(curve_expr, s.copy(), scale)
        if q is None:
            continue
        if not (x0 - 1e-9 <= q[0] <= x1 + 1e-9 and y0 - 1e-9 <= q[1] <= y1 + 1e-9):
            continue
        found.append(q)
    # dedupe
    uniq: list[np.ndarray] = []
    for q in sorted(found, key=lambda p: (p[0], p[1])):
        if not any(np.linalg.norm(q - u) <= 1e-6 * (1 + scale) for u in uniq):
            uniq.append(q)
    pts = np.array(uniq) if uniq else np.zeros((0, 2))
    pts, tags = _canonicalize(pts, ["singular"] * len(pts))
    return PointCloud(pts, tags, pitch=0.0)


def _newton_singular(expr, q, scale, iters=60):
    def residual(p):
        row = p.reshape(1, -1)
        v, g, ok = expr.grad_many(row)
        if not ok[0]:
            return None
        return float(v[0]), g[0]

    h = 1e-6 * (1.0 + scale)
    for _ in range(iters):
        r = residual(q)
        if r is None:
            return None
        p_val, grad = r
        F = np.array([p_val, grad[0]])
        if np.linalg.norm(F) <= 1e-13:
            break
        rx = residual(q + np.array([h, 0.0]))
        ry = residual(q + np.array([0.0, h]))
        rxm = residual(q - np.array([h, 0.0]))
        rym = residual(q - np.array([0.0, h]))
        if None in (rx, ry, rxm, rym):
            return None
        J = np.array([
            [grad[0], grad[1]],
            [(rx[1][0] - rxm[1][0]) / (2 * h), (ry[1][0] - rym[1][0]) / (2 * h)],
        ])
        step, *_ = np.linalg.lstsq(J + 1e-12 * np.eye(2), -F, rcond=None)
        if not np.all(np.isfinite(step)):
            return None
        nrm = np.linalg.norm(step)
        if nrm > 0.5 * scale:
            step *= 0.5 * scale / nrm
        q = q + step
    # Gauss-Newton polish on (p, px, py) pulls onto the exact singularity
    for _ in range(40):
        r = residual(q)
        if r is None:
            return None
        p_val, grad = r
        F = np.array([p_val, grad[0], grad[1]])
        if np.linalg.norm(F) <= 1e-14:
            break
        rx = residual(q + np.array([h, 0.0]))
        ry = residual(q + np.array([0.0, h]))
        rxm = residual(q - np.array([h, 0.0]))
        rym = residual(q - np.array([0.0, h]))
        if None in (rx, ry, rxm, rym):
            return None
        J = np.array([
            [grad[0], grad[1]],
            [(rx[1][0] - rxm[1][0]) / (2 * h), (ry[1][0] - rym[1][0]) / (2 * h)],
            [(rx[1][1] - rxm[1][1]) / (2 * h), (ry[1][1] - rym[1][1]) / (2 * h)],
        ])
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 0.1 * scale:
            break
        q = q + step
    r = residual(q)
    if r is None:
        return None
    p_val, grad = r
    if abs(p_val) <= 1e-9 and np.linalg.norm(grad) <= 1e-6:
        return q
    return None


# ---------------------------------------------------------------------------
# Helpers used by the cover machinery.
# ---------------------------------------------------------------------------


def boundary_curve(open_set: DefinableSet) -> DefinableSet:
    """The frontier of a sign-condition open set as an equality-defined set.

    Each strict atom contributes its zero set filtered by the closure of
    the remaining atoms.
    """
    if isinstance(open_set, FiniteUnion):
        return FiniteUnion([boundary_curve(p) for p in open_set.parts])
    if not isinstance(open_set, SignCondition):
        raise TypeError("boundary_curve needs a sign-condition set")
    parts = []
    for i, a in enumerate(open_set.atoms):
        others = [b.closure() for j, b in enumerate(open_set.atoms) if j != i]
        parts.append(SignCondition([Atom(a.expr, "eq")] + others, open_set.dim,
                                   open_set.bounding_box))
    return FiniteUnion(parts) if len(parts) > 1 else parts[0]


def disk(center=(0.0, 0.0), radius=1.0, pad=0.25) -> SignCondition:
    """Convenience constructor used across tests: open disk in R^2."""
    from .expr import Const, Power, Sum, Var

    cx, cy = center
    e = (Var(0) - Const(cx)) ** 2 + (Var(1) - Const(cy)) ** 2 - Const(radius ** 2)
    box = [(cx - radius - pad, cx + radius + pad), (cy - radius - pad, cy + radius + pad)]
    return SignCondition([Atom(e, "lt")], 2, box)


def circle(center=(0.0, 0.0), radius=1.0, pad=0.25) -> SignCondition:
    """The boundary circle {(x-cx)^2 + (y-cy)^2 = r^2}."""
    from .expr import Const, Var

    cx, cy = center
    e = (Var(0) - Const(cx)) ** 2 + (Var(1) - Const(cy)) ** 2 - Const(radius ** 2)
    box = [(cx - radius - pad, cx + radius + pad), (cy - radius - pad, cy + radius + pad)]
    return SignCondition([Atom(e, "eq")], 2, box)
