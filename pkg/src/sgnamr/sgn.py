"""Dispersive pressure correction: elliptic solve + momentum source.

Each time step first solves a linear elliptic system for the two components
of the dispersive correction field (psi1, psi2), then applies the momentum
source dt * h * ((g/alpha) * grad(eta) - psi) before the hyperbolic update.
The elliptic operator is (identity + alpha * T) where T is a second-order
differential operator with coefficients built from the current depth, surface
gradient and bed derivatives; it is discretized with centered differences on
each patch, giving rows with at most 12 nonzeros.

Cells in water shallower than the switch depth (including a one-cell buffer)
fall back to plain shallow-water dynamics: their rows become identity rows
with zero right-hand side, so their correction is pinned to zero while they
remain usable in neighboring stencils.

Boundary handling folds ghost columns back onto interior columns: wall edges
negate the wall-normal component (psi1 at x walls, psi2 at y walls) and keep
the other, extrapolation edges copy without sign change.
"""

import numpy as np

from .core import NGHOST
from .linalg import (SolverError, csr_from_entries, make_preconditioner,
                     solve_krylov)


def _interior(a, mx, my, di=0, dj=0):
    ng = NGHOST
    return a[ng + di:ng + mx + di, ng + dj:ng + my + dj]


def _ring(a, mx, my, di=0, dj=0):
    """Interior plus a one-cell ring, optionally shifted."""
    ng = NGHOST
    return a[ng - 1 + di:ng + mx + 1 + di, ng - 1 + dj:ng + my + 1 + dj]


def velocity_fields(patch, dry_tolerance):
    """Desingularized velocities over the whole padded patch arrays."""
    h = patch.h
    eps = dry_tolerance
    den = h * h + np.maximum(h, eps) * eps
    return h * patch.hu / den, h * patch.hv / den


def switch_mask(patch, cfg):
    """Mark cells that use the dispersive correction in patch.eqn.

    A cell participates only if the still-water depth (sea level minus bed)
    is at least the switch depth in its whole 3x3 neighborhood; everything
    else (beaches, dry land, and a one-cell buffer around them) runs as
    plain shallow water.  Pure shallow-water mode masks every cell.
    """
    mx, my = patch.mx, patch.my
    if cfg.mode == "swe":
        _interior(patch.eqn, mx, my)[...] = 0
        return
    still = cfg.sea_level - patch.B
    m = _ring(still, mx, my).copy()
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1),
                   (-1, 1), (-1, -1)):
        np.minimum(m, _ring(still, mx, my, di, dj), out=m)
    _interior(patch.eqn, mx, my)[...] = (m[1:-1, 1:-1] >= cfg.h_switch)


def fold_index_maps(patch, cfg, ids_pad, sign1, sign2, level_shape):
    """Fold domain-boundary ghost columns onto interior columns in place.

    ids_pad/sign1/sign2 cover the padded patch; ghost entries at physical
    edges are rewritten to point at the reflected (wall) or copied
    (extrapolation) interior cell, with the sign of the wall-normal
    component flipped.  Corners compose both reflections.
    """
    ng = NGHOST
    mxl, myl = level_shape
    mx, my = patch.mx, patch.my
    if patch.i_lo == 0:
        wall = cfg.bc_left == "wall"
        for g in range(ng):
            src = ng + g if wall else ng
            ids_pad[ng - 1 - g, :] = ids_pad[src, :]
            sign1[ng - 1 - g, :] = (-1.0 if wall else 1.0) * sign1[src, :]
            sign2[ng - 1 - g, :] = sign2[src, :]
    if patch.i_hi == mxl - 1:
        wall = cfg.bc_right == "wall"
        hi = ng + mx
        for g in range(ng):
            src = hi - 1 - g if wall else hi - 1
            ids_pad[hi + g, :] = ids_pad[src, :]
            sign1[hi + g, :] = (-1.0 if wall else 1.0) * sign1[src, :]
            sign2[hi + g, :] = sign2[src, :]
    if patch.j_lo == 0:
        wall = cfg.bc_bottom == "wall"
        for g in range(ng):
            src = ng + g if wall else ng
            ids_pad[:, ng - 1 - g] = ids_pad[:, src]
            sign1[:, ng - 1 - g] = sign1[:, src]
            sign2[:, ng - 1 - g] = (-1.0 if wall else 1.0) * sign2[:, src]
    if patch.j_hi == myl - 1:
        wall = cfg.bc_top == "wall"
        hi = ng + my
        for g in range(ng):
            src = hi - 1 - g if wall else hi - 1
            ids_pad[:, hi + g] = ids_pad[:, src]
            sign1[:, hi + g] = sign1[:, src]
            sign2[:, hi + g] = (-1.0 if wall else 1.0) * sign2[:, src]


def nonlinear_rhs(patch, cfg):
    """Right-hand side of the elliptic system on the patch interior.

    Each component is (g/alpha) * deta + 2 h ((h/3) dphi + phi (dh + dB/2))
    + (h/2) dw + w * deta, differentiated along its own axis, where phi is
    the quadratic velocity-gradient invariant and w the bed-curvature
    forcing.  Ghost cells must hold valid state before the call.
    """
    mx, my = patch.mx, patch.my
    dx, dy = patch.dx, patch.dy
    g_a = cfg.g / cfg.alpha
    u, v = velocity_fields(patch, cfg.dry_tolerance)
    B = patch.B
    eta = patch.h + B

    def rg(a, di, dj):
        return _ring(a, mx, my, di, dj)

    ux = (rg(u, 1, 0) - rg(u, -1, 0)) / (2.0 * dx)
    uy = (rg(u, 0, 1) - rg(u, 0, -1)) / (2.0 * dy)
    vx = (rg(v, 1, 0) - rg(v, -1, 0)) / (2.0 * dx)
    vy = (rg(v, 0, 1) - rg(v, 0, -1)) / (2.0 * dy)
    div = ux + vy
    phi = vx * uy - ux * vy + div * div
    Bxx = (rg(B, 1, 0) - 2.0 * rg(B, 0, 0) + rg(B, -1, 0)) / (dx * dx)
    Byy = (rg(B, 0, 1) - 2.0 * rg(B, 0, 0) + rg(B, 0, -1)) / (dy * dy)
    Bxy = (rg(B, 1, 1) - rg(B, 1, -1) - rg(B, -1, 1)
           + rg(B, -1, -1)) / (4.0 * dx * dy)
    uc = rg(u, 0, 0)
    vc = rg(v, 0, 0)
    w = uc * uc * Bxx + 2.0 * uc * vc * Bxy + vc * vc * Byy

    def ii(a, di=0, dj=0):
        return _interior(a, mx, my, di, dj)

    h = ii(patch.h)
    etax = (ii(eta, 1, 0) - ii(eta, -1, 0)) / (2.0 * dx)
    etay = (ii(eta, 0, 1) - ii(eta, 0, -1)) / (2.0 * dy)
    hx = (ii(patch.h, 1, 0) - ii(patch.h, -1, 0)) / (2.0 * dx)
    hy = (ii(patch.h, 0, 1) - ii(patch.h, 0, -1)) / (2.0 * dy)
    Bx = (ii(B, 1, 0) - ii(B, -1, 0)) / (2.0 * dx)
    By = (ii(B, 0, 1) - ii(B, 0, -1)) / (2.0 * dy)
    phix = (phi[2:, 1:-1] - phi[:-2, 1:-1]) / (2.0 * dx)
    phiy = (phi[1:-1, 2:] - phi[1:-1, :-2]) / (2.0 * dy)
    wx = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2.0 * dx)
    wy = (w[1:-1, 2:] - w[1:-1, :-2]) / (2.0 * dy)
    phic = phi[1:-1, 1:-1]
    wc = w[1:-1, 1:-1]

    rhs1 = (g_a * etax + 2.0 * h * ((h / 3.0) * phix + phic * (hx + 0.5 * Bx))
            + 0.5 * h * wx + wc * etax)
    rhs2 = (g_a * etay + 2.0 * h * ((h / 3.0) * phiy + phic * (hy + 0.5 * By))
            + 0.5 * h * wy + wc * etay)
    return rhs1, rhs2


def operator_entries(patch, cfg, ids_pad, sign1, sign2, n_cells,
                     rhs1, rhs2, rhs_vec, entries, ghost_psi=None,
                     row_mask=None):
    """Emit the matrix entries and rhs for every interior cell of one patch.

    ids_pad maps padded cells to unknown ids (-1 = known value); sign1/sign2
    carry the boundary-fold signs per component.  Unknown k of component one
    is column k, component two is column n_cells + k.  Masked cells get
    identity rows with zero rhs.  Entries whose column id is -1 move to the
    rhs using ghost_psi = (psi1_pad, psi2_pad) when given, else contribute
    zero (homogeneous Dirichlet).  row_mask (interior-shaped bool) restricts
    which cells emit rows; other cells get their rows elsewhere or are
    excluded from the system entirely.
    """
    mx, my = patch.mx, patch.my
    dx, dy = patch.dx, patch.dy
    alpha = cfg.alpha
    B = patch.B
    eta = patch.h + B

    def ii(a, di=0, dj=0):
        return _interior(a, mx, my, di, dj)

    h = ii(patch.h)
    hx = (ii(patch.h, 1, 0) - ii(patch.h, -1, 0)) / (2.0 * dx)
    hy = (ii(patch.h, 0, 1) - ii(patch.h, 0, -1)) / (2.0 * dy)
    Bx = (ii(B, 1, 0) - ii(B, -1, 0)) / (2.0 * dx)
    By = (ii(B, 0, 1) - ii(B, 0, -1)) / (2.0 * dy)
    etax = (ii(eta, 1, 0) - ii(eta, -1, 0)) / (2.0 * dx)
    etay = (ii(eta, 0, 1) - ii(eta, 0, -1)) / (2.0 * dy)
    Bxx = (ii(B, 1, 0) - 2.0 * ii(B) + ii(B, -1, 0)) / (dx * dx)
    Byy = (ii(B, 0, 1) - 2.0 * ii(B) + ii(B, 0, -1)) / (dy * dy)
    Bxy = (ii(B, 1, 1) - ii(B, 1, -1) - ii(B, -1, 1)
           + ii(B, -1, -1)) / (4.0 * dx * dy)

    h2_3 = alpha * h * h / 3.0
    t2x = h2_3 / (dx * dx)             # second-derivative weight, own axis x
    t2y = h2_3 / (dy * dy)
    txy = h2_3 / (4.0 * dx * dy)       # mixed-derivative corner weight
    a1x = -alpha * h * hx / (2.0 * dx)  # advection-like first-derivative terms
    a1y = -alpha * h * hy / (2.0 * dy)
    d11 = 1.0 + 2.0 * t2x + alpha * (0.5 * h * Bxx + Bx * etax)
    d22 = 1.0 + 2.0 * t2y + alpha * (0.5 * h * Byy + By * etay)
    d12 = alpha * (0.5 * h * Bxy + By * etax)
    d21 = alpha * (0.5 * h * Bxy + Bx * etay)
    bx12 = alpha * 0.5 * h * By / (2.0 * dx)   # psi2 x-derivative in row 1
    by12 = -alpha * h * (hx + 0.5 * Bx) / (2.0 * dy)
    by21 = alpha * 0.5 * h * Bx / (2.0 * dy)   # psi1 y-derivative in row 2
    bx21 = -alpha * h * (hy + 0.5 * By) / (2.0 * dx)

    live = ii(patch.eqn) != 0
    emit = np.ones_like(live) if row_mask is None else row_mask
    rows_self = ii(ids_pad)
    if (rows_self[emit] < 0).any():
        raise ValueError("patch interior contains unnumbered cells")
    live = live & emit

    # rhs first: stamping may subtract known-ghost contributions from it
    dead = ~live & emit
    rhs_vec[rows_self[live]] = rhs1[live]
    rhs_vec[rows_self[live] + n_cells] = rhs2[live]
    rhs_vec[rows_self[dead]] = 0.0
    rhs_vec[rows_self[dead] + n_cells] = 0.0

    def nb(di, dj):
        return (ii(ids_pad, di, dj), ii(sign1, di, dj), ii(sign2, di, dj),
                ii(ghost_psi[0], di, dj) if ghost_psi is not None else None,
                ii(ghost_psi[1], di, dj) if ghost_psi is not None else None)

    def stamp(comp_row, terms):
        # terms: list of (di, dj, comp_col, coefficient array)
        for di, dj, comp_col, val in terms:
            cols, s1, s2, g1, g2 = nb(di, dj)
            sgn = s1 if comp_col == 1 else s2
            gp = g1 if comp_col == 1 else g2
            keep = live & (val != 0.0) & (cols >= 0)
            known = live & (val != 0.0) & (cols < 0)
            if keep.any():
                r = rows_self[keep] + (0 if comp_row == 1 else n_cells)
                c = cols[keep] + (0 if comp_col == 1 else n_cells)
                entries.append((r, c, (val * sgn)[keep]))
            if known.any() and gp is not None:
                # the ghost arrays already hold the geometrically correct
                # (reflected or interpolated) value at the ghost position, so
                # the fold sign must not be applied a second time here
                r = rows_self[known] + (0 if comp_row == 1 else n_cells)
                np.subtract.at(rhs_vec, r, (val * gp)[known])

    stamp(1, [
        (0, 0, 1, d11),
        (1, 0, 1, -t2x + a1x), (-1, 0, 1, -t2x - a1x),
        (0, 0, 2, d12),
        (1, 0, 2, bx12), (-1, 0, 2, -bx12),
        (0, 1, 2, by12), (0, -1, 2, -by12),
        (1, 1, 2, -txy), (-1, -1, 2, -txy),
        (1, -1, 2, txy), (-1, 1, 2, txy),
    ])
    stamp(2, [
        (0, 0, 2, d22),
        (0, 1, 2, -t2y + a1y), (0, -1, 2, -t2y - a1y),
        (0, 0, 1, d21),
        (0, 1, 1, by21), (0, -1, 1, -by21),
        (1, 0, 1, bx21), (-1, 0, 1, -bx21),
        (1, 1, 1, -txy), (-1, -1, 1, -txy),
        (1, -1, 1, txy), (-1, 1, 1, txy),
    ])

    # masked cells: pin both components to zero
    if dead.any():
        r = rows_self[dead]
        one = np.ones(r.size)
        entries.append((r, r, one))
        entries.append((r + n_cells, r + n_cells, one))


def patch_index_maps(patch, cfg, level_shape, start=0):
    """Unknown ids and fold signs for a lone patch; interior is numbered
    row-major starting at `start`, domain ghosts folded, other ghosts -1."""
    ng = NGHOST
    mx, my = patch.mx, patch.my
    ids_pad = np.full((mx + 2 * ng, my + 2 * ng), -1, dtype=np.int64)
    _interior(ids_pad, mx, my)[...] = (
        start + np.arange(mx * my, dtype=np.int64).reshape(mx, my))
    sign1 = np.ones_like(ids_pad, dtype=float)
    sign2 = np.ones_like(ids_pad, dtype=float)
    fold_index_maps(patch, cfg, ids_pad, sign1, sign2, level_shape)
    return ids_pad, sign1, sign2


def build_patch_system(patch, cfg, level_shape):
    """Assemble the elliptic system of one isolated patch.

    Returns (matrix, rhs); unknown layout is [psi1 cells..., psi2 cells...]
    in row-major interior order.
    """
    mx, my = patch.mx, patch.my
    n = mx * my
    ids_pad, sign1, sign2 = patch_index_maps(patch, cfg, level_shape)
    rhs1, rhs2 = nonlinear_rhs(patch, cfg)
    rhs_vec = np.zeros(2 * n)
    entries = []
    operator_entries(patch, cfg, ids_pad, sign1, sign2, n, rhs1, rhs2,
                     rhs_vec, entries)
    rows = np.concatenate([e[0] for e in entries])
    cols = np.concatenate([e[1] for e in entries])
    vals = np.concatenate([e[2] for e in entries])
    return csr_from_entries(2 * n, 2 * n, rows, cols, vals), rhs_vec


class DispersiveSolver:
    """Solves the correction system for a patch, reusing the preconditioner.

    The preconditioner is rebuilt every cfg.precond_rebuild_interval solves
    (or when the matrix shape changes); the previous solution warm-starts
    the Krylov iteration.  `solves` counts completed linear solves.

    Under solver_precond="auto" a solve that fails with the factored
    preconditioner is retried once with the diagonal one.  The incomplete
    factors degrade as alpha*h^2/(3*dx^2) grows (they can amplify the
    residual instead of damping it), and that stiffness is a fixed property
    of a level's grid, so the fallback sticks for the solver's lifetime.
    """

    def __init__(self):
        self.solves = 0
        self.iterations = 0
        self._precond = None
        self._since_rebuild = 0
        self._shape = None
        self._prefer_diagonal = False

    def invalidate(self):
        self._precond = None
        self._shape = None

    def solve_system(self, A, b, cfg, x0=None):
        """Run the Krylov solve on an assembled system, managing the cache."""
        kind = cfg.solver_precond
        if kind == "auto" and self._prefer_diagonal:
            kind = "jacobi"
        reused = True
        if (self._precond is None or self._shape != A.shape
                or self._since_rebuild >= cfg.precond_rebuild_interval):
            self._precond = make_preconditioner(A, kind)
            self._shape = A.shape
            self._since_rebuild = 0
            reused = False
        try:
            x, stats = solve_krylov(A, b, method=cfg.solver_method,
                                    rtol=cfg.solver_rtol,
                                    maxit=cfg.solver_maxit,
                                    precond=self._precond, x0=x0)
        except SolverError as err:
            if cfg.solver_precond != "auto" or self._precond.kind == "jacobi":
                raise
            if err.stats is not None:
                self.iterations += err.stats.iterations
            self._precond = make_preconditioner(A, "jacobi")
            self._prefer_diagonal = True
            self._since_rebuild = 0
            reused = False
            # continue from the failed attempt unless it diverged
            restart = err.x if (err.stats is not None
                                and err.stats.residual < 1.0) else x0
            x, stats = solve_krylov(A, b, method=cfg.solver_method,
                                    rtol=cfg.solver_rtol,
                                    maxit=cfg.solver_maxit,
                                    precond=self._precond, x0=restart)
        self.solves += 1
        self.iterations += stats.iterations
        self._since_rebuild += 1
        stats.precond_reused = reused
        return x, stats

    def solve_patch(self, patch, cfg, level_shape=None):
        if level_shape is None:
            level_shape = (patch.mx, patch.my)
        mx, my = patch.mx, patch.my
        live = _interior(patch.eqn, mx, my) != 0
        if not live.any():
            _interior(patch.psi1, mx, my)[...] = 0.0
            _interior(patch.psi2, mx, my)[...] = 0.0
            return None
        A, b = build_patch_system(patch, cfg, level_shape)
        x0 = np.concatenate([_interior(patch.psi1, mx, my).ravel(),
                             _interior(patch.psi2, mx, my).ravel()])
        x, stats = self.solve_system(A, b, cfg, x0=x0)
        n = mx * my
        _interior(patch.psi1, mx, my)[...] = x[:n].reshape(mx, my)
        _interior(patch.psi2, mx, my)[...] = x[n:].reshape(mx, my)
        return stats


def source_update(patch, dt, cfg):
    """Momentum source dt * h * ((g/alpha) grad(eta) - psi) on live wet cells.

    Masked (shallow-water) cells are skipped entirely; mass is untouched.
    """
    mx, my = patch.mx, patch.my
    eta = patch.h + patch.B

    def ii(a, di=0, dj=0):
        return _interior(a, mx, my, di, dj)

    g_a = cfg.g / cfg.alpha
    etax = (ii(eta, 1, 0) - ii(eta, -1, 0)) / (2.0 * patch.dx)
    etay = (ii(eta, 0, 1) - ii(eta, 0, -1)) / (2.0 * patch.dy)
    h = ii(patch.h)
    live = (ii(patch.eqn) != 0) & (h >= cfg.dry_tolerance)
    dmx = dt * h * (g_a * etax - ii(patch.psi1))
    dmy = dt * h * (g_a * etay - ii(patch.psi2))
    hu = ii(patch.hu)
    hv = ii(patch.hv)
    hu[live] += dmx[live]
    hv[live] += dmy[live]
