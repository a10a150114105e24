"""SLIC segmentation of the central view, the superpixel adjacency graph and
the superpixel-wise depth regularization used to locate partially occluded
border regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from skimage.color import rgb2lab

from . import solver
from .cost import DepthMap
from .lightfield import LabelGrid


@dataclass(frozen=True)
class SpRegParams:
    target_sp_size: float = 50.0
    slic_compactness: float = 10.0
    slic_iters: int = 10
    lam: float = 0.5
    grad_floor: float = 1e-3
    # "forward" or "central" differences for the border gradient
    gradient: str = "forward"

    def __post_init__(self):
        for name in ("target_sp_size", "slic_compactness", "slic_iters", "lam", "grad_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gradient not in ("forward", "central"):
            raise ValueError("gradient must be 'forward' or 'central'")


@dataclass(frozen=True)
class SuperpixelGraph:
    """``members[k]`` and ``borders[(k, l)]`` hold flat (row-major) pixel indices;
    ``borders[(k, l)]`` are the pixels of superpixel l that touch superpixel k."""

    label_map: np.ndarray
    n: int
    members: tuple
    adjacency: tuple
    borders: dict

    @classmethod
    def from_labels(cls, label_map):
        label_map = np.asarray(label_map, dtype=np.int64)
        flat = label_map.ravel()
        n = int(flat.max()) + 1
        order = np.argsort(flat, kind="stable")
        splits = np.searchsorted(flat[order], np.arange(1, n))
        members = tuple(np.split(order, splits))

        idx = np.arange(flat.size).reshape(label_map.shape)
        a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
        b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
        diff = flat[a] != flat[b]
        a, b = a[diff], b[diff]
        # pixel b lies in P_{lab b} and touches P_{lab a}, and vice versa
        k = np.concatenate([flat[a], flat[b]])
        l = np.concatenate([flat[b], flat[a]])
        pix = np.concatenate([b, a])
        triples = np.unique(np.stack([k, l, pix], axis=1), axis=0)
        borders = {}
        adjacency = [set() for _ in range(n)]
        if triples.size:
            keys = triples[:, 0] * n + triples[:, 1]
            starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
            ends = np.r_[starts[1:], len(keys)]
            for s, e in zip(starts, ends):
                kk, ll = int(triples[s, 0]), int(triples[s, 1])
                borders[(kk, ll)] = triples[s:e, 2].copy()
                adjacency[kk].add(ll)
        label_map = label_map.copy()
        label_map.setflags(write=False)
        return cls(label_map, n, members, tuple(frozenset(s) for s in adjacency), borders)

    def boundary_mask(self):
        lm = self.label_map
        edge = np.zeros(lm.shape, dtype=bool)
        edge[:, :-1] |= lm[:, :-1] != lm[:, 1:]
        edge[:-1, :] |= lm[:-1, :] != lm[1:, :]
        return edge


# --------------------------------------------------------------------------
# SLIC


def _color_features(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    if image.shape[2] == 3:
        return rgb2lab(np.clip(image, 0.0, 1.0))
    return 100.0 * image.mean(axis=2, keepdims=True)


def _seed_centers(h, w, step):
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    ys = (np.arange(ny) + 0.5) * h / ny
    xs = (np.arange(nx) + 0.5) * w / nx
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    return np.floor(cy.ravel()).astype(np.int64), np.floor(cx.ravel()).astype(np.int64)


def _perturb_to_low_gradient(feat, cy, cx):
    h, w = feat.shape[:2]
    grad = np.zeros((h, w))
    if h > 2:
        grad[1:-1] += np.sum((feat[2:] - feat[:-2]) ** 2, axis=2)
    if w > 2:
        grad[:, 1:-1] += np.sum((feat[:, 2:] - feat[:, :-2]) ** 2, axis=2)
    ny, nx = cy.copy(), cx.copy()
    for k in range(cy.size):
        y0, y1 = max(cy[k] - 1, 0), min(cy[k] + 2, h)
        x0, x1 = max(cx[k] - 1, 0), min(cx[k] + 2, w)
        win = grad[y0:y1, x0:x1]
        j = int(np.argmin(win))
        ny[k], nx[k] = y0 + j // win.shape[1], x0 + j % win.shape[1]
    return ny, nx


def _slic_assign(feat, p):
    h, w, _ = feat.shape
    step = float(np.sqrt(p.target_sp_size))
    cy, cx = _seed_centers(h, w, step)
    cy, cx = _perturb_to_low_gradient(feat, cy, cx)
    centers_pos = np.stack([cy, cx], axis=1).astype(np.float64)
    centers_col = feat[cy, cx].astype(np.float64)
    K = centers_pos.shape[0]
    spatial = (p.slic_compactness / step) ** 2
    radius = int(np.ceil(step))

    Y, X = np.mgrid[0:h, 0:w].astype(np.float64)
    labels = np.full((h, w), -1, dtype=np.int64)
    for _ in range(int(p.slic_iters)):
        dist = np.full((h, w), np.inf)
        for k in range(K):
            y, x = centers_pos[k]
            y0, y1 = max(int(y) - radius, 0), min(int(y) + radius + 1, h)
            x0, x1 = max(int(x) - radius, 0), min(int(x) + radius + 1, w)
            dc = np.sum((feat[y0:y1, x0:x1] - centers_col[k]) ** 2, axis=2)
            ds = (Y[y0:y1, x0:x1] - y) ** 2 + (X[y0:y1, x0:x1] - x) ** 2
            d = dc + spatial * ds
            better = d < dist[y0:y1, x0:x1]
            dist[y0:y1, x0:x1][better] = d[better]
            labels[y0:y1, x0:x1][better] = k
        missing = labels < 0
        if missing.any():
            my, mx = np.nonzero(missing)
            d2 = (my[:, None] - centers_pos[None, :, 0]) ** 2 + (mx[:, None] - centers_pos[None, :, 1]) ** 2
            labels[my, mx] = np.argmin(d2, axis=1)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=K).astype(np.float64)
        has = counts > 0
        for arr, target in ((Y, 0), (X, 1)):
            sums = np.bincount(flat, arr.ravel(), minlength=K)
            centers_pos[has, target] = sums[has] / counts[has]
        for c in range(feat.shape[2]):
            sums = np.bincount(flat, feat[..., c].ravel(), minlength=K)
            centers_col[has, c] = sums[has] / counts[has]
    return labels


def _enforce_connectivity(labels):
    """Keep the largest 4-connected piece of each label and merge every other
    piece into its largest adjacent superpixel; relabel 0..n-1 in raster order."""
    h, w = labels.shape
    flat = labels.ravel()
    idx = np.arange(flat.size).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    same = flat[a] == flat[b]
    graph = sp.coo_matrix((np.ones(int(same.sum())), (a[same], b[same])), shape=(flat.size, flat.size))
    n_comp, comp = connected_components(graph, directed=False)
    size = np.bincount(comp, minlength=n_comp).astype(np.int64)
    comp_label = np.zeros(n_comp, dtype=np.int64)
    comp_label[comp] = flat

    # the largest component of each label survives (ties: lowest component id)
    order = np.lexsort((np.arange(n_comp), -size, comp_label))
    first = np.r_[True, comp_label[order][1:] != comp_label[order][:-1]]
    kept = np.zeros(n_comp, dtype=bool)
    kept[order[first]] = True

    diff = ~same
    ca, cb = comp[a[diff]], comp[b[diff]]
    pairs = np.unique(np.concatenate([np.stack([ca, cb], 1), np.stack([cb, ca], 1)]), axis=0)
    neighbours = [[] for _ in range(n_comp)]
    for u, v in pairs:
        neighbours[u].append(int(v))

    root = np.where(kept, np.arange(n_comp), -1)
    root_size = np.where(kept, size, 0)
    pending = [c for c in range(n_comp) if not kept[c]]
    while pending:
        still = []
        for c in pending:
            roots = {int(root[v]) for v in neighbours[c] if root[v] >= 0}
            if not roots:
                still.append(c)
                continue
            target = max(sorted(roots), key=lambda r: root_size[r])
            root[c] = target
            root_size[target] += size[c]
        if len(still) == len(pending):
            raise RuntimeError("connectivity enforcement made no progress")
        pending = still

    merged = root[comp].reshape(h, w)
    _, first_seen = np.unique(merged.ravel(), return_index=True)
    remap = np.empty(merged.max() + 1, dtype=np.int64)
    remap[np.unique(merged.ravel())] = np.argsort(np.argsort(first_seen))
    return remap[merged]


def slic_segment(central_view, p: SpRegParams = SpRegParams()):
    """SLIC superpixels of the central view with enforced 4-connectivity."""
    feat = _color_features(central_view)
    if feat.shape[0] == 0 or feat.shape[1] == 0:
        raise ValueError("image must be non-empty")
    labels = _slic_assign(feat, p)
    return SuperpixelGraph.from_labels(_enforce_connectivity(labels))


# --------------------------------------------------------------------------
# superpixel-wise depth


def gradient_l1(gray):
    """|forward difference in x| + |forward difference in y|; zero past the last
    row/column."""
    gray = np.asarray(gray, dtype=np.float64)
    g = np.zeros_like(gray)
    g[:, :-1] += np.abs(gray[:, 1:] - gray[:, :-1])
    g[:-1, :] += np.abs(gray[1:, :] - gray[:-1, :])
    return g


def gradient_l1_central(gray):
    """|d/dx| + |d/dy| by central differences, one-sided at the border.

    Unlike forward differences this sees an intensity step from both of its
    sides, so border pixels on either side of an edge weaken the coupling.
    """
    gy, gx = np.gradient(np.asarray(gray, dtype=np.float64))
    return np.abs(gx) + np.abs(gy)


GRADIENTS = {"forward": gradient_l1, "central": gradient_l1_central}


def _inv_grad(central_view, p):
    return 1.0 / (GRADIENTS[p.gradient](_gray(central_view)).ravel() + p.grad_floor)


def _gray(image):
    image = np.asarray(image, dtype=np.float64)
    return image.mean(axis=2) if image.ndim == 3 else image


def sp_system(g: SuperpixelGraph, d, w, central_view, p: SpRegParams):
    """Assemble the superpixel energy as a sparse SPD system over n unknowns."""
    d = np.asarray(getattr(d, "values", d), dtype=np.float64).ravel()
    w = np.asarray(getattr(w, "values", w), dtype=np.float64).ravel()
    labels = g.label_map.ravel()
    mass = np.bincount(labels, w, minlength=g.n)
    moment = np.bincount(labels, w * d, minlength=g.n)
    targets = np.divide(moment, mass, out=np.zeros(g.n), where=mass > 0)

    inv_grad = _inv_grad(central_view, p)
    pair_w = {}
    for (k, l), pix in g.borders.items():
        key = (min(k, l), max(k, l))
        pair_w[key] = pair_w.get(key, 0.0) + p.lam * float(np.sum(inv_grad[pix]))
    keys = sorted(pair_w)
    ei = np.array([k for k, _ in keys], dtype=np.int64)
    ej = np.array([l for _, l in keys], dtype=np.int64)
    ew = np.array([pair_w[key] for key in keys])
    return solver.assemble(mass, targets, ei, ej, ew)


def sp_energy(g: SuperpixelGraph, pvals, d, w, central_view, p: SpRegParams):
    """Superpixel energy evaluated literally over pixels, for checking solutions."""
    d = np.asarray(getattr(d, "values", d), dtype=np.float64).ravel()
    w = np.asarray(getattr(w, "values", w), dtype=np.float64).ravel()
    pvals = np.asarray(pvals, dtype=np.float64)
    labels = g.label_map.ravel()
    data = np.sum(w * (pvals[labels] - d) ** 2)
    inv_grad = _inv_grad(central_view, p)
    smooth = 0.0
    for (k, l), pix in g.borders.items():
        smooth += np.sum(inv_grad[pix]) * (pvals[k] - pvals[l]) ** 2
    return float(data + p.lam * smooth)


def solve_sp_depth(g, d, w, central_view, p: SpRegParams = SpRegParams(), *, tol=1e-10, max_iter=None):
    """Minimize the superpixel energy and broadcast p(k) to its pixels.

    Returns ``(DepthMap(kind='sp'), per-superpixel values, SolveReport)``.  The
    energy is quadratic, so solving in disparity units gives the same minimizer
    as solving in label indices.
    """
    system = sp_system(g, d, w, central_view, p)
    pvals, report = solver.solve(system, tol=tol, max_iter=max_iter)
    return DepthMap(pvals[g.label_map], "sp"), pvals, report


def epsilon_map(d: DepthMap, p: DepthMap, grid: LabelGrid):
    """Pixel-wise minus superpixel-wise depth in label units.

    Labels are counted from the nearest hypothesis, so an underestimated depth
    (the occluder's label bleeding into the surface behind it) is negative.
    """
    if np.shape(d.values) != np.shape(p.values):
        raise ValueError("depth maps differ in shape")
    return DepthMap(grid.to_depth_index(d.values) - grid.to_depth_index(p.values), "epsilon")
