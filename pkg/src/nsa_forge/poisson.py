"""Discrete Poisson image editing.

A clone region ``region`` (the set of unknown pixels) lives inside a
destination image.  Every region pixel ``p`` gets the 5-point equation

    |N_p| f_p - sum_{q in N_p, q in region} f_q
        = sum_{q in N_p, q not in region} dst_q + sum_{q in N_p} v_pq

where ``v_pq`` is the guidance value on the directed edge ``p -> q``.  Pixels
outside the region act as Dirichlet data and are never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import Rect, as_image, resize_bilinear

# (dy, dx) for up, down, left, right
OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))

DEFAULT_TOLERANCE = 1e-8


class SolverError(RuntimeError):
    """Raised when a clone could not be solved to the requested tolerance."""


@dataclass
class GuidanceField:
    """Directed edge values ``v_pq`` for every region pixel ``p`` and neighbour ``q``.

    ``edges[d, y, x, c]`` holds ``v_pq`` for ``p = (y, x)`` and
    ``q = p + OFFSETS[d]``; entries for pixels outside ``region`` and for
    neighbours outside the image are zero.
    """

    region: np.ndarray
    edges: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.region.shape

    def divergence(self) -> np.ndarray:
        """Per-pixel sum of outgoing edge values, ``(H, W, C)``."""
        return self.edges.sum(axis=0)


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    final_residual: float
    converged: bool


def _differences(img: np.ndarray) -> np.ndarray:
    """``out[d] = img_p - img_{p+offset_d}``, zero where the neighbour is off-image."""
    h, w, c = img.shape
    out = np.zeros((4, h, w, c))
    out[0, 1:] = img[1:] - img[:-1]
    out[1, :-1] = img[:-1] - img[1:]
    out[2, :, 1:] = img[:, 1:] - img[:, :-1]
    out[3, :, :-1] = img[:, :-1] - img[:, 1:]
    return out


def _check_region(image: np.ndarray, region: np.ndarray) -> np.ndarray:
    region = np.asarray(region, dtype=bool)
    if region.shape != image.shape[:2]:
        raise ValueError(f"region shape {region.shape} does not match image shape {image.shape[:2]}")
    return region


def guidance_source(source_patch: np.ndarray, region: np.ndarray) -> GuidanceField:
    """Guidance from the source gradients only: ``v_pq = g_p - g_q``."""
    src = as_image(source_patch)
    region = _check_region(src, region)
    edges = _differences(src)
    edges[:, ~region] = 0.0
    return GuidanceField(region, edges)


def guidance_mixed(source_patch: np.ndarray, destination: np.ndarray, region: np.ndarray) -> GuidanceField:
    """Per edge and channel, keep the destination difference if strictly larger in magnitude."""
    src = as_image(source_patch)
    dst = as_image(destination)
    if src.shape != dst.shape:
        raise ValueError(f"source shape {src.shape} does not match destination shape {dst.shape}")
    region = _check_region(src, region)
    g = _differences(src)
    f = _differences(dst)
    edges = np.where(np.abs(f) > np.abs(g), f, g)
    edges[:, ~region] = 0.0
    return GuidanceField(region, edges)


def assemble_system(destination: np.ndarray, field: GuidanceField):
    """Build the sparse system for the region pixels.

    Returns ``(A, b, index)`` where ``A`` is the ``n x n`` CSR matrix, ``b`` the
    ``n x C`` right-hand side and ``index`` the ``(rows, cols)`` of the unknowns
    in row-major order.
    """
    dst = as_image(destination)
    region = field.region
    h, w = region.shape
    if region[0].any() or region[-1].any() or region[:, 0].any() or region[:, -1].any():
        raise ValueError("clone region must keep a one-pixel margin from the image border")
    rows, cols = np.nonzero(region)
    n = rows.size
    ids = -np.ones((h, w), dtype=np.intp)
    ids[rows, cols] = np.arange(n)

    b = field.divergence()[rows, cols].copy()
    a_rows = [np.arange(n)]
    a_cols = [np.arange(n)]
    a_vals = [np.full(n, 4.0)]
    for dy, dx in OFFSETS:
        qr, qc = rows + dy, cols + dx
        inside = region[qr, qc]
        a_rows.append(np.nonzero(inside)[0])
        a_cols.append(ids[qr[inside], qc[inside]])
        a_vals.append(np.full(int(inside.sum()), -1.0))
        outside = ~inside
        b[outside] += dst[qr[outside], qc[outside]]
    A = sparse.csr_matrix(
        (np.concatenate(a_vals), (np.concatenate(a_rows), np.concatenate(a_cols))), shape=(n, n)
    )
    return A, b, (rows, cols)


def _col_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # explicit reduction instead of BLAS so results do not depend on thread count
    return np.sum(a * b, axis=0)


def conjugate_gradient(A, b: np.ndarray, x0: np.ndarray, tolerance: float, max_iter: int):
    """Jacobi-preconditioned CG on every column of ``b`` at once.

    Stops when each column's relative residual ``||b - A x|| / ||b||`` is at
    most ``tolerance``.  Returns ``(x, iterations, residual)`` where
    ``residual`` is the worst column's relative residual, recomputed from
    scratch.
    """
    inv_diag = 1.0 / A.diagonal()[:, None]
    x = x0.copy()
    bnorm = np.sqrt(_col_dot(b, b))
    scale = np.where(bnorm > 0, bnorm, 1.0)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = _col_dot(r, z)
    it = 0
    while it < max_iter:
        if np.all(np.sqrt(_col_dot(r, r)) <= tolerance * scale):
            break
        Ap = A @ p
        pAp = _col_dot(p, Ap)
        alpha = np.divide(rz, pAp, out=np.zeros_like(rz), where=pAp > 0)
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = _col_dot(r, z)
        beta = np.divide(rz_new, rz, out=np.zeros_like(rz), where=rz > 0)
        p = z + beta * p
        rz = rz_new
        it += 1
    true_r = b - A @ x
    residual = float(np.max(np.sqrt(_col_dot(true_r, true_r)) / scale)) if b.size else 0.0
    return x, it, residual


def default_max_iter(n_unknowns: int) -> int:
    return int(10 * math.sqrt(n_unknowns) + 1000)


def solve_poisson(
    destination: np.ndarray,
    field: GuidanceField,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int | None = None,
    *,
    clamp: bool = True,
) -> tuple[np.ndarray, SolveStats]:
    """Solve the Dirichlet problem for ``field.region`` and composite into ``destination``.

    The result is clamped to [0, 1] unless ``clamp`` is false; the reported
    residual always refers to the unclamped solution.  Non-convergence is
    reported through ``SolveStats.converged`` rather than raised.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    dst = as_image(destination)
    if field.edges.shape[1:3] != dst.shape[:2] or field.edges.shape[3] != dst.shape[2]:
        raise ValueError("guidance field does not match destination shape")
    A, b, (rows, cols) = assemble_system(dst, field)
    out = dst.copy()
    n = rows.size
    if n == 0:
        return out, SolveStats(0, 0.0, True)
    if max_iter is None:
        max_iter = default_max_iter(n)
    x, iterations, residual = conjugate_gradient(A, b, dst[rows, cols], tolerance, max_iter)
    out[rows, cols] = np.clip(x, 0.0, 1.0) if clamp else x
    return out, SolveStats(iterations, residual, residual <= tolerance)


def clone_region(height: int, width: int, shape_mask: np.ndarray | None = None) -> np.ndarray:
    """Rectangle minus its one-pixel ring, optionally intersected with ``shape_mask``."""
    region = np.zeros((height, width), dtype=bool)
    region[1:-1, 1:-1] = True
    if shape_mask is not None:
        shape_mask = np.asarray(shape_mask, dtype=bool)
        if shape_mask.shape != (height, width):
            raise ValueError(f"shape mask {shape_mask.shape} does not match patch size {(height, width)}")
        region &= shape_mask
    return region


def seamless_clone(
    source: np.ndarray,
    destination: np.ndarray,
    src_rect: Rect,
    dst_rect: Rect,
    mode: str = "source",
    shape_mask: np.ndarray | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int | None = None,
    *,
    patch: np.ndarray | None = None,
) -> np.ndarray:
    """Clone ``src_rect`` of ``source`` into ``dst_rect`` of ``destination``.

    The source patch is bilinearly resized to the destination box.  ``patch``
    overrides the extracted source patch (it must already have the
    destination box size).  Raises :class:`SolverError` if CG does not reach
    ``tolerance``.
    """
    src = as_image(source)
    dst = as_image(destination)
    if src.shape[2] != dst.shape[2]:
        raise ValueError("source and destination must have the same number of channels")
    dh, dw = dst.shape[:2]
    ys, xs = dst_rect.slices(dw, dh)
    box_h, box_w = ys.stop - ys.start, xs.stop - xs.start
    if box_h <= 2 or box_w <= 2:
        raise ValueError(f"destination box {box_w}x{box_h} is too small to have an interior")
    if patch is None:
        sh, sw = src.shape[:2]
        sys_, sxs = src_rect.slices(sw, sh)
        patch = resize_bilinear(src[sys_, sxs], box_w, box_h)
    else:
        patch = as_image(patch)
        if patch.shape[:2] != (box_h, box_w):
            raise ValueError("patch does not match the destination box size")
    region = clone_region(box_h, box_w, shape_mask)
    crop = dst[ys, xs]
    if mode == "source":
        field = guidance_source(patch, region)
    elif mode == "mixed":
        field = guidance_mixed(patch, crop, region)
    else:
        raise ValueError(f"unknown gradient mode {mode!r}")
    solved, stats = solve_poisson(crop, field, tolerance, max_iter)
    if not stats.converged:
        raise SolverError(
            f"Poisson solve did not converge: residual {stats.final_residual:.3g} after {stats.iterations} iterations"
        )
    out = dst.copy()
    out[ys, xs] = solved
    return out
