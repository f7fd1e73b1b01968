"""Patch-based adaptive refinement with subcycled time stepping.

A hierarchy holds one list of rectangular patches per level; level 1 is a
single patch covering the whole domain and each finer level refines the
previous one by an integer factor in space and time.  One coarse step runs:

  1. fill ghosts, solve the level's elliptic correction system (all patches
     of the level coupled in one matrix), apply the momentum source, take
     the hyperbolic step;
  2. solve the correction system again on the post-step state ("lookahead"
     solve) so children can interpolate both the state and the correction
     field linearly in time for their ghost cells;
  3. advance the child level with its smaller step the matching number of
     times (recursively), then replace covered coarse cells by the
     conservative average of the fine cells and fix the mass flux mismatch
     along the refinement boundary (reflux).

Bed elevation is sampled once at the finest level's resolution and averaged
upward, so a coarse cell's bed is bitwise the block mean of the fine beds
below it; together with surface-based interpolation this keeps a flat sea
at rest exactly stationary across the whole hierarchy.

Regridding flags cells whose surface deviates from sea level, buffers them,
clusters them into rectangles (signature-splitting), clips them into the
one-cell-eroded footprint of the parent level, and rebuilds the finer level,
copying state from overlapping old patches and interpolating the rest.
"""

from __future__ import annotations

import numpy as np

from .core import NGHOST, Patch, check_no_overlap
from .linalg import csr_from_entries
from .sgn import (DispersiveSolver, fold_index_maps, nonlinear_rhs,
                  operator_entries, source_update, switch_mask)
from .swe import apply_domain_bc, compute_dt, extend_bathymetry, swe_step

STATE_FIELDS = ("h", "hu", "hv", "psi1", "psi2")


# ---------------------------------------------------------------------------
# bed elevation
# ---------------------------------------------------------------------------

class BathymetryPyramid:
    """Per-level bed arrays where coarse cells are exact fine block means.

    The bed is sampled at cell centers of the finest configured level and
    averaged up; any value a patch ever sees is a slice of these arrays, so
    restriction of a lake at rest reproduces the coarse bed bitwise.
    """

    def __init__(self, cfg, fn):
        L = cfg.max_levels
        mxf, myf = cfg.shape_of(L)
        dxf, dyf = cfg.dx_of(L), cfg.dy_of(L)
        x = cfg.x_lo + (np.arange(mxf) + 0.5) * dxf
        y = cfg.y_lo + (np.arange(myf) + 0.5) * dyf
        X, Y = np.meshgrid(x, y, indexing="ij")
        self.levels = {L: np.asarray(fn(X, Y), dtype=float)}
        for l in range(L - 1, 0, -1):
            r = cfg.ratio_space(l)
            mx, my = cfg.shape_of(l)
            self.levels[l] = (self.levels[l + 1]
                              .reshape(mx, r, my, r).mean(axis=(1, 3)))

    def fill_patch(self, patch, cfg):
        """Write B into the padded patch array (in-domain cells only)."""
        arr = self.levels[patch.level]
        mxl, myl = arr.shape
        ng = NGHOST
        i0 = max(patch.i_lo - ng, 0)
        i1 = min(patch.i_hi + ng, mxl - 1)
        j0 = max(patch.j_lo - ng, 0)
        j1 = min(patch.j_hi + ng, myl - 1)
        li = i0 - (patch.i_lo - ng)
        lj = j0 - (patch.j_lo - ng)
        patch.B[li:li + (i1 - i0 + 1), lj:lj + (j1 - j0 + 1)] = \
            arr[i0:i1 + 1, j0:j1 + 1]
        extend_bathymetry(patch, cfg, (mxl, myl))


# ---------------------------------------------------------------------------
# flagging, clustering, nesting
# ---------------------------------------------------------------------------

def dilate(mask, n):
    """Binary dilation by n cells (separable, square neighborhood)."""
    out = mask.copy()
    for axis in (0, 1):
        acc = out.copy()
        for _ in range(n):
            shifted = np.zeros_like(out)
            if axis == 0:
                shifted[1:, :] |= acc[:-1, :]
                shifted[:-1, :] |= acc[1:, :]
            else:
                shifted[:, 1:] |= acc[:, :-1]
                shifted[:, :-1] |= acc[:, 1:]
            acc |= shifted
        out = acc
    return out


def erode(mask):
    """Binary erosion by one cell, 8-neighborhood; outside counts as set.

    The domain boundary does not erode, so refinement may touch it.
    """
    p = np.pad(mask, 1, constant_values=True)
    out = mask.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            out &= p[1 + di:1 + di + mask.shape[0],
                     1 + dj:1 + dj + mask.shape[1]]
    return out


def block_any(mask, r):
    """True on a coarse cell when any of its r x r children is set."""
    mx, my = mask.shape[0] // r, mask.shape[1] // r
    return mask.reshape(mx, r, my, r).any(axis=(1, 3))


def region_cells(box, lo, dx, dy, shape):
    """Index ranges (half-open) of cells intersecting a physical rectangle."""
    x1, x2, y1, y2 = box
    i0 = max(int(np.floor((x1 - lo[0]) / dx)), 0)
    i1 = min(int(np.ceil((x2 - lo[0]) / dx)), shape[0])
    j0 = max(int(np.floor((y1 - lo[1]) / dy)), 0)
    j1 = min(int(np.ceil((y2 - lo[1]) / dy)), shape[1])
    return i0, i1, j0, j1


def _split_index(sig):
    """Where to cut a signature: prefer an interior zero, else the strongest
    inflection of its second difference, else the middle."""
    n = sig.size
    zeros = np.flatnonzero(sig[1:-1] == 0) + 1
    if zeros.size:
        return int(zeros[np.argmin(np.abs(zeros - n / 2))])
    if n >= 4:
        d2 = sig[:-2] - 2 * sig[1:-1] + sig[2:]
        jump = np.abs(np.diff(d2))
        best = int(np.argmax(jump)) + 2   # cut between the two cells
        if jump[best - 2] > 0 and 1 <= best < n:
            return best
    return n // 2


def cluster_flags(flags, efficiency, max_size):
    """Cover flagged cells with boxes (i0, i1, j0, j1), half-open.

    Recursively shrinks to the flag bounding box and splits along signature
    gaps until each box is efficient enough and within the size cap.
    """
    boxes = []
    stack = [(0, flags.shape[0], 0, flags.shape[1])]
    while stack:
        i0, i1, j0, j1 = stack.pop()
        sub = flags[i0:i1, j0:j1]
        if not sub.any():
            continue
        ii = np.flatnonzero(sub.any(axis=1))
        jj = np.flatnonzero(sub.any(axis=0))
        i0, i1 = i0 + ii[0], i0 + ii[-1] + 1
        j0, j1 = j0 + jj[0], j0 + jj[-1] + 1
        sub = flags[i0:i1, j0:j1]
        w, h = i1 - i0, j1 - j0
        eff = sub.sum() / (w * h)
        fits = w <= max_size and h <= max_size
        if fits and (eff >= efficiency or (w <= 2 and h <= 2)):
            boxes.append((i0, i1, j0, j1))
            continue
        if w >= h:
            cut = i0 + _split_index(sub.sum(axis=1))
            cut = min(max(cut, i0 + 1), i1 - 1)
            stack.append((i0, cut, j0, j1))
            stack.append((cut, i1, j0, j1))
        else:
            cut = j0 + _split_index(sub.sum(axis=0))
            cut = min(max(cut, j0 + 1), j1 - 1)
            stack.append((i0, i1, j0, cut))
            stack.append((i0, i1, cut, j1))
    return sorted(boxes)


def rectangles_of(mask):
    """Greedy exact decomposition of a boolean mask into boxes (half-open)."""
    out = []
    open_runs = {}
    for i in range(mask.shape[0] + 1):
        runs = []
        if i < mask.shape[0]:
            row = mask[i]
            j = 0
            while j < row.size:
                if row[j]:
                    j0 = j
                    while j < row.size and row[j]:
                        j += 1
                    runs.append((j0, j))
                else:
                    j += 1
        nxt = {}
        for run in runs:
            if run in open_runs:
                nxt[run] = open_runs.pop(run)
            else:
                nxt[run] = i
        for (j0, j1), i0 in open_runs.items():
            out.append((i0, i, j0, j1))
        open_runs = nxt
    return sorted(out)


def clip_boxes(boxes, allowed):
    """Intersect boxes with an allowed mask, splitting where needed."""
    out = []
    for i0, i1, j0, j1 in boxes:
        m = allowed[i0:i1, j0:j1]
        if m.all():
            out.append((i0, i1, j0, j1))
        elif m.any():
            out.extend((i0 + a, i0 + b, j0 + c, j0 + d)
                       for a, b, c, d in rectangles_of(m))
    return out


# ---------------------------------------------------------------------------
# flux registers (mass only)
# ---------------------------------------------------------------------------

class FluxRegister:
    """Coarse/fine mass-flux mismatch along one fine patch's perimeter.

    Stores, per coarse face on each edge, the time-and-face-integrated
    coarse mass flux minus the accumulated fine mass fluxes; applying the
    (signed) mismatch to the adjacent exterior coarse cell restores exact
    mass conservation across the refinement boundary.  Only mass is fixed:
    momentum fluxes include hydrostatic wall terms that do not vanish over
    a sloping bed at rest, so correcting them would disturb steady states.
    """

    def __init__(self, patch, rho):
        self.rho = rho
        nx = patch.mx // rho
        ny = patch.my // rho
        self.edges = {"W": np.zeros(ny), "E": np.zeros(ny),
                      "S": np.zeros(nx), "N": np.zeros(nx)}

    def reset(self):
        for a in self.edges.values():
            a[:] = 0.0

    def add_coarse(self, edge, values, scale):
        self.edges[edge] += scale * values

    def add_fine(self, edge, values, scale):
        """values: per-fine-face mass fluxes along the edge (length n*rho)."""
        grouped = values.reshape(-1, self.rho).sum(axis=1)
        self.edges[edge] -= scale * grouped


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------

class Hierarchy:
    """All levels of the adaptive grid plus the machinery to advance them."""

    def __init__(self, cfg, bathymetry_fn, eta_fn=None, velocity_fn=None):
        cfg.validate()
        self.cfg = cfg
        self.pyramid = BathymetryPyramid(cfg, bathymetry_fn)
        self.eta_fn = eta_fn
        self.velocity_fn = velocity_fn
        self.time = 0.0
        self.levels = {l: [] for l in range(1, cfg.max_levels + 1)}
        self.old_state = {l: None for l in range(1, cfg.max_levels + 1)}
        self.registers = {l: [] for l in range(1, cfg.max_levels + 1)}
        self.solvers = {l: DispersiveSolver()
                        for l in range(1, cfg.max_levels + 1)}
        self.steps = {l: 0 for l in range(1, cfg.max_levels + 1)}
        self.sweep_flip = {l: True for l in range(1, cfg.max_levels + 1)}

        base = self._new_patch(1, 0, 0, cfg.mx, cfg.my)
        self._init_state(base)
        self.levels[1] = [base]
        for _ in range(cfg.max_levels - 1):
            self.regrid_from(1)

    # -- construction ------------------------------------------------------

    def _new_patch(self, level, i_lo, j_lo, mx, my):
        cfg = self.cfg
        p = Patch(level, i_lo, j_lo, mx, my, cfg.dx_of(level),
                  cfg.dy_of(level), (cfg.x_lo, cfg.y_lo))
        self.pyramid.fill_patch(p, cfg)
        switch_mask(p, cfg)
        return p

    def _init_state(self, p):
        ii = p.interior
        if self.eta_fn is None:
            eta = np.full((p.mx, p.my), self.cfg.sea_level)
        else:
            X, Y = np.meshgrid(p.x_centers(False), p.y_centers(False),
                               indexing="ij")
            eta = np.asarray(self.eta_fn(X, Y), dtype=float)
        p.h[ii] = np.maximum(0.0, eta - p.B[ii])
        if self.velocity_fn is not None:
            X, Y = np.meshgrid(p.x_centers(False), p.y_centers(False),
                               indexing="ij")
            u, v = self.velocity_fn(X, Y)
            p.hu[ii] = p.h[ii] * u
            p.hv[ii] = p.h[ii] * v

    def all_patches(self):
        for l in sorted(self.levels):
            yield from self.levels[l]

    def finest_active(self):
        return max((l for l in self.levels if self.levels[l]), default=1)

    # -- ghost filling -----------------------------------------------------

    def _blended_coarse(self, cp, old, theta):
        """Fields of one parent patch time-interpolated to fraction theta.

        Returns dict of padded arrays: surface elevation, momenta, the two
        correction components, and a wet mask.
        """
        if old is None or theta >= 1.0:
            h, hu, hv, p1, p2 = (cp.h, cp.hu, cp.hv, cp.psi1, cp.psi2)
        elif theta <= 0.0:
            h, hu, hv, p1, p2 = (old["h"], old["hu"], old["hv"],
                                 old["psi1"], old["psi2"])
        else:
            t, s = theta, 1.0 - theta
            h = t * cp.h + s * old["h"]
            hu = t * cp.hu + s * old["hu"]
            hv = t * cp.hv + s * old["hv"]
            p1 = t * cp.psi1 + s * old["psi1"]
            p2 = t * cp.psi2 + s * old["psi2"]
        return {"eta": h + cp.B, "hu": hu, "hv": hv, "psi1": p1, "psi2": p2,
                "wet": h >= self.cfg.dry_tolerance}

    def _interp_from_parent(self, p, theta, target):
        """Fill `target` cells (padded-index bool mask) of fine patch p by
        space interpolation of the time-blended parent level.

        Returns the mask of cells actually covered by a parent patch.
        """
        cfg = self.cfg
        l = p.level
        rho = cfg.ratio_space(l - 1)
        ng = NGHOST
        fi = np.arange(p.i_lo - ng, p.i_lo + p.mx + ng)
        fj = np.arange(p.j_lo - ng, p.j_lo + p.my + ng)
        FI, FJ = np.meshgrid(fi, fj, indexing="ij")
        mxl, myl = cfg.shape_of(l)
        valid = target & (FI >= 0) & (FI < mxl) & (FJ >= 0) & (FJ < myl)
        filled = np.zeros_like(valid)
        if not valid.any():
            return filled
        IC, JC = FI // rho, FJ // rho
        xi = (FI % rho + 0.5) / rho - 0.5
        zt = (FJ % rho + 0.5) / rho - 0.5
        olds = self.old_state[l - 1]
        for k, cp in enumerate(self.levels[l - 1]):
            sel = (valid & ~filled
                   & (IC >= cp.i_lo) & (IC <= cp.i_hi)
                   & (JC >= cp.j_lo) & (JC <= cp.j_hi))
            if not sel.any():
                continue
            F = self._blended_coarse(cp, None if olds is None else olds[k],
                                     theta)
            li = IC[sel] - cp.i_lo + ng
            lj = JC[sel] - cp.j_lo + ng
            wet = F["wet"]
            ok = wet[li, lj]
            okx = ok & wet[li + 1, lj] & wet[li - 1, lj]
            oky = ok & wet[li, lj + 1] & wet[li, lj - 1]

            def interp(A):
                gx = np.where(okx, 0.5 * (A[li + 1, lj] - A[li - 1, lj]), 0.0)
                gy = np.where(oky, 0.5 * (A[li, lj + 1] - A[li, lj - 1]), 0.0)
                return A[li, lj] + xi[sel] * gx + zt[sel] * gy

            eta = interp(F["eta"])
            h = np.where(ok, np.maximum(0.0, eta - p.B[sel]), 0.0)
            p.h[sel] = h
            dry_child = h < cfg.dry_tolerance
            for name in ("hu", "hv", "psi1", "psi2"):
                vals = np.where(ok, interp(F[name]), 0.0)
                if name in ("hu", "hv"):
                    vals = np.where(dry_child, 0.0, vals)
                getattr(p, name)[sel] = vals
            filled |= sel
        return filled

    def _copy_siblings(self, p, patches):
        ng = NGHOST
        for q in patches:
            if q is p:
                continue
            i0 = max(p.i_lo - ng, q.i_lo)
            i1 = min(p.i_hi + ng, q.i_hi)
            j0 = max(p.j_lo - ng, q.j_lo)
            j1 = min(p.j_hi + ng, q.j_hi)
            if i0 > i1 or j0 > j1:
                continue
            dst = (slice(i0 - p.i_lo + ng, i1 - p.i_lo + ng + 1),
                   slice(j0 - p.j_lo + ng, j1 - p.j_lo + ng + 1))
            src = (slice(i0 - q.i_lo + ng, i1 - q.i_lo + ng + 1),
                   slice(j0 - q.j_lo + ng, j1 - q.j_lo + ng + 1))
            for name in STATE_FIELDS:
                getattr(p, name)[dst] = getattr(q, name)[src]

    def fill_level_ghosts(self, l, theta):
        """Bring every ghost cell of level l up to date at parent fraction
        theta: parent-level interpolation, then sibling copies, then the
        physical boundary conditions."""
        cfg = self.cfg
        patches = self.levels[l]
        level_shape = cfg.shape_of(l)
        ng = NGHOST
        for p in patches:
            ghost = np.ones((p.mx + 2 * ng, p.my + 2 * ng), dtype=bool)
            ghost[ng:-ng, ng:-ng] = False
            if l > 1:
                covered = self._interp_from_parent(p, theta, ghost)
            else:
                covered = np.zeros_like(ghost)
            self._copy_siblings(p, patches)
            apply_domain_bc(p, cfg, level_shape)
            if l > 1:
                fi = np.arange(p.i_lo - ng, p.i_lo + p.mx + ng)
                fj = np.arange(p.j_lo - ng, p.j_lo + p.my + ng)
                FI, FJ = np.meshgrid(fi, fj, indexing="ij")
                outside = ((FI < 0) | (FI >= level_shape[0])
                           | (FJ < 0) | (FJ >= level_shape[1]))
                sib = np.zeros_like(ghost)
                for q in patches:
                    if q is p:
                        continue
                    sib |= ((FI >= q.i_lo) & (FI <= q.i_hi)
                            & (FJ >= q.j_lo) & (FJ <= q.j_hi))
                bad = ghost & ~covered & ~outside & ~sib
                if bad.any():
                    raise RuntimeError(
                        f"level {l} patch {p} has {int(bad.sum())} ghost "
                        "cells with no parent coverage (nesting violation)")

    # -- level elliptic solve ----------------------------------------------

    def _level_index_maps(self, l):
        cfg = self.cfg
        patches = self.levels[l]
        level_shape = cfg.shape_of(l)
        ng = NGHOST
        offsets = []
        total = 0
        for p in patches:
            offsets.append(total)
            total += p.mx * p.my
        maps = []
        for p, off in zip(patches, offsets):
            ids = np.full((p.mx + 2 * ng, p.my + 2 * ng), -1, dtype=np.int64)
            ids[ng:-ng, ng:-ng] = off + np.arange(
                p.mx * p.my, dtype=np.int64).reshape(p.mx, p.my)
            s1 = np.ones(ids.shape)
            s2 = np.ones(ids.shape)
            fold_index_maps(p, cfg, ids, s1, s2, level_shape)
            maps.append((ids, s1, s2))
        # ghost cells over a sibling patch take that patch's unknown ids
        for p, (ids, s1, s2) in zip(patches, maps):
            for q, qoff in zip(patches, offsets):
                if q is p:
                    continue
                i0 = max(p.i_lo - ng, q.i_lo)
                i1 = min(p.i_hi + ng, q.i_hi)
                j0 = max(p.j_lo - ng, q.j_lo)
                j1 = min(p.j_hi + ng, q.j_hi)
                if i0 > i1 or j0 > j1:
                    continue
                gi = np.arange(i0, i1 + 1)
                gj = np.arange(j0, j1 + 1)
                block = (qoff + (gi - q.i_lo)[:, None] * q.my
                         + (gj - q.j_lo)[None, :])
                dst = (slice(i0 - p.i_lo + ng, i1 - p.i_lo + ng + 1),
                       slice(j0 - p.j_lo + ng, j1 - p.j_lo + ng + 1))
                ids[dst] = block
                s1[dst] = 1.0
                s2[dst] = 1.0
        # fold again: where a domain boundary meets a patch seam, the first
        # fold ran before sibling ids existed and left the reflected corner
        # ghosts unnumbered, which would demote that coupling to a lagged
        # known value and can destabilize stiff fine levels.  Re-folding now
        # composes the reflection with the sibling unknowns.
        for p, (ids, s1, s2) in zip(patches, maps):
            fold_index_maps(p, cfg, ids, s1, s2, level_shape)
        return maps, total

    def solve_level(self, l):
        """One coupled correction solve over every patch of level l.

        Ghost unknowns shared between sibling patches couple their systems;
        ghost cells over the parent level contribute their interpolated
        values (already present in the psi ghost cells) to the right-hand
        side.  Patch psi fields are refreshed from the solution, including
        sibling ghosts.
        """
        cfg = self.cfg
        patches = self.levels[l]
        if not patches:
            return None
        if not any((p.eqn[p.interior] != 0).any() for p in patches):
            for p in patches:
                p.psi1[p.interior] = 0.0
                p.psi2[p.interior] = 0.0
            return None
        maps, n = self._level_index_maps(l)
        rhs_vec = np.zeros(2 * n)
        entries = []
        for p, (ids, s1, s2) in zip(patches, maps):
            r1, r2 = nonlinear_rhs(p, cfg)
            operator_entries(p, cfg, ids, s1, s2, n, r1, r2, rhs_vec,
                             entries, ghost_psi=(p.psi1, p.psi2))
        rows = np.concatenate([e[0] for e in entries])
        cols = np.concatenate([e[1] for e in entries])
        vals = np.concatenate([e[2] for e in entries])
        A = csr_from_entries(2 * n, 2 * n, rows, cols, vals)
        # unknown layout: [component one of all patches..., component two...]
        x0 = np.concatenate(
            [p.psi1[p.interior].ravel() for p in patches]
            + [p.psi2[p.interior].ravel() for p in patches])
        x, stats = self.solvers[l].solve_system(A, rhs_vec, cfg, x0=x0)
        for p, (ids, s1, s2) in zip(patches, maps):
            own = ids >= 0
            p.psi1[own] = s1[own] * x[ids[own]]
            p.psi2[own] = s2[own] * x[ids[own] + n]
        return stats

    # -- conservative averaging and refluxing ------------------------------

    def restrict_level(self, l, fields=("h", "hu", "hv")):
        """Replace covered coarse cells by the block mean of their children."""
        cfg = self.cfg
        rho = cfg.ratio_space(l)
        for fp in self.levels[l + 1]:
            ci0, cj0 = fp.i_lo // rho, fp.j_lo // rho
            cmx, cmy = fp.mx // rho, fp.my // rho
            for cp in self.levels[l]:
                i0 = max(ci0, cp.i_lo)
                i1 = min(ci0 + cmx - 1, cp.i_hi)
                j0 = max(cj0, cp.j_lo)
                j1 = min(cj0 + cmy - 1, cp.j_hi)
                if i0 > i1 or j0 > j1:
                    continue
                fs = (slice((i0 - ci0) * rho + NGHOST,
                            (i1 + 1 - ci0) * rho + NGHOST),
                      slice((j0 - cj0) * rho + NGHOST,
                            (j1 + 1 - cj0) * rho + NGHOST))
                cs = (slice(i0 - cp.i_lo + NGHOST, i1 - cp.i_lo + NGHOST + 1),
                      slice(j0 - cp.j_lo + NGHOST, j1 - cp.j_lo + NGHOST + 1))
                for name in fields:
                    fine = getattr(fp, name)[fs]
                    mean = fine.reshape(i1 - i0 + 1, rho, j1 - j0 + 1,
                                        rho).mean(axis=(1, 3))
                    getattr(cp, name)[cs] = mean

    def _register_coarse_fluxes(self, l, step_fluxes, dt):
        """Add this level's face fluxes along each child perimeter."""
        cfg = self.cfg
        rho = cfg.ratio_space(l)
        dxc, dyc = cfg.dx_of(l), cfg.dy_of(l)
        for fp, reg in zip(self.levels[l + 1], self.registers[l + 1]):
            ci0, cj0 = fp.i_lo // rho, fp.j_lo // rho
            cmx, cmy = fp.mx // rho, fp.my // rho
            for cp in self.levels[l]:
                fl = step_fluxes.get(id(cp))
                if fl is None:
                    continue
                # vertical edges: coarse x-face index, coarse cell j range
                for edge, iface in (("W", ci0), ("E", ci0 + cmx)):
                    if not (cp.i_lo <= iface <= cp.i_lo + cp.mx):
                        continue
                    j0 = max(cj0, cp.j_lo)
                    j1 = min(cj0 + cmy - 1, cp.j_hi)
                    if j0 > j1:
                        continue
                    arr = fl.x_low if edge == "W" else fl.x_high
                    vals = arr[iface - cp.i_lo, j0 - cp.j_lo:j1 - cp.j_lo + 1, 0]
                    reg.edges[edge][j0 - cj0:j1 - cj0 + 1] += dt * dyc * vals
                for edge, jface in (("S", cj0), ("N", cj0 + cmy)):
                    if not (cp.j_lo <= jface <= cp.j_lo + cp.my):
                        continue
                    i0 = max(ci0, cp.i_lo)
                    i1 = min(ci0 + cmx - 1, cp.i_hi)
                    if i0 > i1:
                        continue
                    arr = fl.y_low if edge == "S" else fl.y_high
                    vals = arr[i0 - cp.i_lo:i1 - cp.i_lo + 1,
                               jface - cp.j_lo, 0]
                    reg.edges[edge][i0 - ci0:i1 - ci0 + 1] += dt * dxc * vals

    def _register_fine_fluxes(self, l, step_fluxes, dt):
        """Subtract this level's own perimeter fluxes from its registers."""
        cfg = self.cfg
        dxf, dyf = cfg.dx_of(l), cfg.dy_of(l)
        for fp, reg in zip(self.levels[l], self.registers[l]):
            fl = step_fluxes[id(fp)]
            reg.add_fine("W", fl.x_low[0, :, 0], dt * dyf)
            reg.add_fine("E", fl.x_high[fp.mx, :, 0], dt * dyf)
            reg.add_fine("S", fl.y_low[:, 0, 0], dt * dxf)
            reg.add_fine("N", fl.y_high[:, fp.my, 0], dt * dxf)

    def apply_reflux(self, l):
        """Correct exterior coarse cells by the stored flux mismatches."""
        cfg = self.cfg
        rho = cfg.ratio_space(l)
        mxl, myl = cfg.shape_of(l)
        dxc, dyc = cfg.dx_of(l), cfg.dy_of(l)
        inv_area = 1.0 / (dxc * dyc)

        def covered(ic, jc):
            for q in self.levels[l + 1]:
                if (q.i_lo // rho <= ic <= (q.i_hi + 1) // rho - 1
                        and q.j_lo // rho <= jc <= (q.j_hi + 1) // rho - 1):
                    return True
            return False

        for fp, reg in zip(self.levels[l + 1], self.registers[l + 1]):
            ci0, cj0 = fp.i_lo // rho, fp.j_lo // rho
            cmx, cmy = fp.mx // rho, fp.my // rho
            edges = (("W", ci0 - 1, None, +1.0), ("E", ci0 + cmx, None, -1.0),
                     ("S", None, cj0 - 1, +1.0), ("N", None, cj0 + cmy, -1.0))
            for edge, ic_fix, jc_fix, sign in edges:
                vals = reg.edges[edge]
                for k in range(vals.size):
                    if vals[k] == 0.0:
                        continue
                    ic = ic_fix if ic_fix is not None else ci0 + k
                    jc = jc_fix if jc_fix is not None else cj0 + k
                    if not (0 <= ic < mxl and 0 <= jc < myl):
                        continue
                    if covered(ic, jc):
                        continue
                    for cp in self.levels[l]:
                        if (cp.i_lo <= ic <= cp.i_hi
                                and cp.j_lo <= jc <= cp.j_hi):
                            cp.h[ic - cp.i_lo + NGHOST,
                                 jc - cp.j_lo + NGHOST] += \
                                sign * inv_area * vals[k]
                            break
            reg.reset()

    # -- advancing ---------------------------------------------------------

    def stable_dt(self):
        """Largest level-1 step obeying every level's CFL constraint."""
        cfg = self.cfg
        best = np.inf
        scale = 1.0
        for l in range(1, cfg.max_levels + 1):
            if self.levels[l]:
                best = min(best, compute_dt(self.levels[l], cfg) * scale)
            scale *= cfg.ratio_time(l)
        return best

    def advance(self, dt):
        """One level-1 step of size dt (recursing through finer levels).

        Returns the largest Courant number seen anywhere in the subtree.
        """
        c = self.advance_level(1, dt)
        self.time += dt
        return c

    def advance_level(self, l, dt, theta0=0.0, theta1=1.0):
        cfg = self.cfg
        if (l < cfg.max_levels and self.steps[l] > 0
                and self.steps[l] % cfg.regrid_interval == 0):
            self.regrid_from(l)
        patches = self.levels[l]
        if not patches:
            return 0.0
        dispersive = cfg.mode != "swe"
        self.fill_level_ghosts(l, theta0)
        if dispersive:
            self.solve_level(l)
        children = l < cfg.max_levels and bool(self.levels[l + 1])
        if children:
            # time-interpolation endpoint for the children: the state at this
            # level's step start with the freshly solved correction field
            self.old_state[l] = [p.state_copy() for p in patches]
        if dispersive:
            for p in patches:
                source_update(p, dt, cfg)
            self.fill_level_ghosts(l, theta0)
        cmax = 0.0
        step_fluxes = {}
        xfirst = self.sweep_flip[l]
        for p in patches:
            fluxes, c = swe_step(p, dt, cfg, xfirst=xfirst)
            step_fluxes[id(p)] = fluxes
            cmax = max(cmax, c)
        self.sweep_flip[l] = not xfirst
        self.steps[l] += 1
        if l > 1:
            self._register_fine_fluxes(l, step_fluxes, dt)
        if children:
            self.fill_level_ghosts(l, theta1)
            if dispersive:
                self.solve_level(l)   # lookahead solve for child interpolation
            self._register_coarse_fluxes(l, step_fluxes, dt)
            rho_t = cfg.ratio_time(l)
            for s in range(rho_t):
                c = self.advance_level(l + 1, dt / rho_t,
                                       s / rho_t, (s + 1) / rho_t)
                cmax = max(cmax, c)
            self.restrict_level(l)
            self.apply_reflux(l)
        return cmax

    # -- regridding --------------------------------------------------------

    def _flag_level(self, l):
        """Level-l cells that need refining (criterion, regions, buffer)."""
        cfg = self.cfg
        shape = cfg.shape_of(l)
        flags = np.zeros(shape, dtype=bool)
        for p in self.levels[l]:
            ii = p.interior
            eta = p.h[ii] + p.B[ii]
            wet = p.h[ii] >= cfg.dry_tolerance
            f = wet & (np.abs(eta - cfg.sea_level) > cfg.flag_tolerance)
            flags[p.i_lo:p.i_hi + 1, p.j_lo:p.j_hi + 1] |= f
        if cfg.flag_buffer > 0:
            flags = dilate(flags, cfg.flag_buffer)
        dx, dy = cfg.dx_of(l), cfg.dy_of(l)
        lo = (cfg.x_lo, cfg.y_lo)
        for entry in cfg.forced_regions:
            if entry[0] == l + 1:
                i0, i1, j0, j1 = region_cells(entry[1:], lo, dx, dy, shape)
                flags[i0:i1, j0:j1] = True
        allowed_entries = [e for e in cfg.allowed_regions if e[0] == l + 1]
        if allowed_entries:
            allowed = np.zeros(shape, dtype=bool)
            for entry in allowed_entries:
                i0, i1, j0, j1 = region_cells(entry[1:], lo, dx, dy, shape)
                allowed[i0:i1, j0:j1] = True
            flags &= allowed
        return flags

    def _footprint(self, l):
        shape = self.cfg.shape_of(l)
        mask = np.zeros(shape, dtype=bool)
        for p in self.levels[l]:
            mask[p.i_lo:p.i_hi + 1, p.j_lo:p.j_hi + 1] = True
        return mask

    def regrid_from(self, l0):
        """Rebuild levels l0+1 .. max from fresh flags (levels must be
        synchronized in time when called)."""
        cfg = self.cfg
        L = cfg.max_levels
        raw = {l: self._flag_level(l) for l in range(l0, L)}
        # project finer-level needs down so parents leave room for children
        for l in range(L - 2, l0 - 1, -1):
            if raw[l + 1].any():
                raw[l] |= dilate(block_any(raw[l + 1], cfg.ratio_space(l)), 1)
        for l in range(l0, L):
            rho = cfg.ratio_space(l)
            allowed = erode(self._footprint(l))
            flags = raw[l] & allowed
            cap = max(2, cfg.max_patch_size // rho)
            boxes = clip_boxes(
                cluster_flags(flags, cfg.cluster_efficiency, cap), allowed)
            old_patches = self.levels[l + 1]
            new_patches = []
            for i0, i1, j0, j1 in boxes:
                p = self._new_patch(l + 1, i0 * rho, j0 * rho,
                                    (i1 - i0) * rho, (j1 - j0) * rho)
                interior = np.zeros((p.mx + 2 * NGHOST, p.my + 2 * NGHOST),
                                    dtype=bool)
                interior[NGHOST:-NGHOST, NGHOST:-NGHOST] = True
                cov = self._interp_from_parent(p, 1.0, interior)
                if not cov[NGHOST:-NGHOST, NGHOST:-NGHOST].all():
                    raise RuntimeError(f"new level {l + 1} patch {p} is not "
                                       "fully covered by its parent level")
                self._copy_siblings(p, old_patches)
                new_patches.append(p)
            check_no_overlap(new_patches)
            self.levels[l + 1] = new_patches
            self.registers[l + 1] = [FluxRegister(p, rho) for p in new_patches]
            self.old_state[l + 1] = None
            self.solvers[l + 1].invalidate()

    # -- diagnostics -------------------------------------------------------

    def total_mass(self):
        """Water volume counting each region once (finest covering level)."""
        cfg = self.cfg
        total = 0.0
        for l in range(1, cfg.max_levels + 1):
            if not self.levels[l]:
                continue
            covered = (self._footprint(l + 1)
                       if l + 1 <= cfg.max_levels and self.levels[l + 1]
                       else None)
            rho = cfg.ratio_space(l) if covered is not None else 1
            area = cfg.dx_of(l) * cfg.dy_of(l)
            for p in self.levels[l]:
                h = p.h[p.interior]
                if covered is None:
                    total += float(h.sum()) * area
                else:
                    mask = block_any(
                        covered[p.i_lo * rho:(p.i_hi + 1) * rho,
                                p.j_lo * rho:(p.j_hi + 1) * rho], rho)
                    total += float(h[~mask].sum()) * area
        return total

    def max_surface(self):
        """Largest wet |surface - sea level| over the composite solution.

        Cells covered by a finer level are skipped: they hold conservative
        averages of the fine data, which near a shoreline that cuts through
        an averaging block legitimately differ from pointwise values.
        """
        cfg = self.cfg
        out = 0.0
        for l in range(1, cfg.max_levels + 1):
            if not self.levels[l]:
                continue
            covered = (self._footprint(l + 1)
                       if l + 1 <= cfg.max_levels and self.levels[l + 1]
                       else None)
            rho = cfg.ratio_space(l) if covered is not None else 1
            for p in self.levels[l]:
                ii = p.interior
                use = p.h[ii] >= cfg.dry_tolerance
                if covered is not None:
                    use &= ~block_any(
                        covered[p.i_lo * rho:(p.i_hi + 1) * rho,
                                p.j_lo * rho:(p.j_hi + 1) * rho], rho)
                if use.any():
                    eta = (p.h[ii] + p.B[ii])[use] - cfg.sea_level
                    out = max(out, float(np.max(np.abs(eta))))
        return out

    def max_correction(self):
        out = 0.0
        for p in self.all_patches():
            ii = p.interior
            out = max(out, float(np.max(np.abs(p.psi1[ii]))),
                      float(np.max(np.abs(p.psi2[ii]))))
        return out
