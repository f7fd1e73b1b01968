"""Non-subcycled stepping: every level advances with one shared time step
and the dispersive correction is solved once per step as a single system
coupling all levels.

Unknowns are cells that can influence the solution:

  * interior cells not covered by a finer level -- operator rows;
  * covered cells whose averages a neighboring uncovered stencil reads
    (one-cell border ring, plus the children such cells need, recursively)
    -- constraint rows pinning them to the mean of their children;
  * the first ring of fine ghost cells over the parent level -- rows that
    interpolate them from parent unknowns (mean-preserving, gradient based,
    matching the ghost filling used between steps).

Strictly interior covered cells appear in no stencil and carry no unknowns;
after each solve they receive averaged values for diagnostics and warm
starts.  Ghosts over sibling patches share the sibling's unknowns, and
ghosts outside the domain fold onto interior unknowns with the boundary
signs, exactly as in the per-level systems.
"""

from __future__ import annotations

import numpy as np

from .core import NGHOST
from .linalg import csr_from_entries
from .sgn import (DispersiveSolver, fold_index_maps, nonlinear_rhs,
                  operator_entries, source_update)
from .swe import compute_dt, swe_step
from .amr import block_any, dilate


def refine_mask(mask, r):
    """Expand a coarse mask so each cell becomes an r x r fine block."""
    return np.repeat(np.repeat(mask, r, axis=0), r, axis=1)


class CompositeStepper:
    """Advances a hierarchy without subcycling, one coupled solve per step."""

    def __init__(self, hierarchy):
        self.h = hierarchy
        self.solver = DispersiveSolver()
        self.steps = 0

    # -- masks and unknown numbering ---------------------------------------

    def _level_masks(self):
        """Per level: (in-footprint, covered-by-finer, numbered) global masks.

        numbered = uncovered cells, plus covered cells an uncovered stencil
        can read (one ring), plus -- recursively -- the children of every
        numbered covered cell, so each constraint row finds its fine values.
        """
        h, cfg = self.h, self.h.cfg
        L = cfg.max_levels
        masks = {}
        need_children = None
        for l in range(1, L + 1):
            inl = h._footprint(l)
            cov = (block_any(h._footprint(l + 1), cfg.ratio_space(l))
                   if l < L and h.levels[l + 1] else np.zeros_like(inl))
            uncovered = inl & ~cov
            numbered = uncovered | (cov & dilate(uncovered, 1))
            if need_children is not None:
                numbered |= need_children
            masks[l] = (inl, cov, numbered)
            need_children = refine_mask(numbered & cov, cfg.ratio_space(l))
        return masks

    def _build_maps(self):
        """Number the unknowns and record everything needed for assembly."""
        h, cfg = self.h, self.h.cfg
        ng = NGHOST
        masks = self._level_masks()
        info = {}       # (level, patch index) -> dict
        offset = 0
        for l in range(1, cfg.max_levels + 1):
            inl, cov, numbered = masks[l]
            for k, p in enumerate(h.levels[l]):
                isl = (slice(p.i_lo, p.i_hi + 1), slice(p.j_lo, p.j_hi + 1))
                num = numbered[isl]
                ids = np.full((p.mx + 2 * ng, p.my + 2 * ng), -1,
                              dtype=np.int64)
                local = np.full((p.mx, p.my), -1, dtype=np.int64)
                flat = np.flatnonzero(num)
                local.ravel()[flat] = offset + np.arange(flat.size)
                ids[ng:-ng, ng:-ng] = local
                offset += flat.size
                info[(l, k)] = {
                    "patch": p, "ids": ids,
                    "s1": np.ones(ids.shape), "s2": np.ones(ids.shape),
                    "uncovered": ~cov[isl] & inl[isl],
                    "constrained": num & cov[isl],
                }
        # boundary folds and sibling ghost sharing (interior ids now final)
        for l in range(1, cfg.max_levels + 1):
            shape = cfg.shape_of(l)
            patches = h.levels[l]
            for k, p in enumerate(patches):
                d = info[(l, k)]
                fold_index_maps(p, cfg, d["ids"], d["s1"], d["s2"], shape)
            for k, p in enumerate(patches):
                d = info[(l, k)]
                d["sibling"] = np.zeros(d["ids"].shape, dtype=bool)
                for k2, q in enumerate(patches):
                    if q is p:
                        continue
                    i0, i1 = max(p.i_lo - ng, q.i_lo), min(p.i_hi + ng, q.i_hi)
                    j0, j1 = max(p.j_lo - ng, q.j_lo), min(p.j_hi + ng, q.j_hi)
                    if i0 > i1 or j0 > j1:
                        continue
                    dst = (slice(i0 - p.i_lo + ng, i1 - p.i_lo + ng + 1),
                           slice(j0 - p.j_lo + ng, j1 - p.j_lo + ng + 1))
                    src = (slice(i0 - q.i_lo + ng, i1 - q.i_lo + ng + 1),
                           slice(j0 - q.j_lo + ng, j1 - q.j_lo + ng + 1))
                    d["ids"][dst] = info[(l, k2)]["ids"][src]
                    d["s1"][dst] = 1.0
                    d["s2"][dst] = 1.0
                    d["sibling"][dst] = True
            # fold again so boundary reflections compose with the sibling
            # unknowns just written (the first fold ran before they existed)
            for k, p in enumerate(patches):
                d = info[(l, k)]
                fold_index_maps(p, cfg, d["ids"], d["s1"], d["s2"], shape)
        # first-ring ghost cells over the parent become unknowns
        for l in range(2, cfg.max_levels + 1):
            shape = cfg.shape_of(l)
            for k, p in enumerate(h.levels[l]):
                d = info[(l, k)]
                ring = np.zeros(d["ids"].shape, dtype=bool)
                ring[ng - 1:-(ng - 1), ng - 1:-(ng - 1)] = True
                ring[ng:-ng, ng:-ng] = False
                gi, gj = np.nonzero(ring & (d["ids"] < 0) & ~d["sibling"])
                fi = gi + p.i_lo - ng
                fj = gj + p.j_lo - ng
                keep = ((fi >= 0) & (fi < shape[0])
                        & (fj >= 0) & (fj < shape[1]))
                gi, gj, fi, fj = gi[keep], gj[keep], fi[keep], fj[keep]
                d["ids"][gi, gj] = offset + np.arange(gi.size)
                d["ghost"] = (gi, gj, fi, fj)
                offset += gi.size
            # and once more: boundary reflections of the new ring unknowns
            for k, p in enumerate(h.levels[l]):
                d = info[(l, k)]
                fold_index_maps(p, cfg, d["ids"], d["s1"], d["s2"], shape)
        return info, offset

    # -- system assembly ---------------------------------------------------

    def _ghost_interp_rows(self, info, l, k, n, entries):
        """Rows tying fine ghost unknowns to parent-level unknowns."""
        h, cfg = self.h, self.h.cfg
        ng = NGHOST
        d = info[(l, k)]
        gi, gj, fi, fj = d["ghost"]
        if gi.size == 0:
            return
        rho = cfg.ratio_space(l - 1)
        ic, jc = fi // rho, fj // rho
        xi = (fi % rho + 0.5) / rho - 0.5
        zt = (fj % rho + 0.5) / rho - 0.5
        done = np.zeros(gi.size, dtype=bool)
        for kp, cp in enumerate(h.levels[l - 1]):
            sel = (~done & (ic >= cp.i_lo) & (ic <= cp.i_hi)
                   & (jc >= cp.j_lo) & (jc <= cp.j_hi))
            if not sel.any():
                continue
            done |= sel
            dp = info[(l - 1, kp)]
            li = ic[sel] - cp.i_lo + ng
            lj = jc[sel] - cp.j_lo + ng
            own = d["ids"][gi[sel], gj[sel]]
            for comp, sgn in ((0, dp["s1"]), (1, dp["s2"])):
                shift = comp * n
                rows, cols, vals = [own + shift], [own + shift], \
                    [np.ones(own.size)]
                stencil = ((0, 0, -np.ones(own.size)),
                           (1, 0, -0.5 * xi[sel]), (-1, 0, 0.5 * xi[sel]),
                           (0, 1, -0.5 * zt[sel]), (0, -1, 0.5 * zt[sel]))
                for di, dj, coef in stencil:
                    cid = dp["ids"][li + di, lj + dj]
                    if (cid < 0).any():
                        raise RuntimeError("composite ghost interpolation "
                                           "references an unnumbered cell")
                    rows.append(own + shift)
                    cols.append(cid + shift)
                    vals.append(coef * sgn[li + di, lj + dj])
                entries.append((np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(vals)))
        if not done.all():
            raise RuntimeError("composite ghost cell has no parent coverage")

    def _constraint_rows(self, info, l, k, n, entries):
        """Rows pinning numbered covered cells to their children's mean."""
        h, cfg = self.h, self.h.cfg
        ng = NGHOST
        d = info[(l, k)]
        cp = d["patch"]
        con = d["constrained"]
        if not con.any():
            return
        rho = cfg.ratio_space(l)
        w = 1.0 / rho ** 2
        covered_once = np.zeros_like(con)
        for kf, fp in enumerate(h.levels[l + 1]):
            ci0, cj0 = fp.i_lo // rho, fp.j_lo // rho
            i0 = max(ci0, cp.i_lo)
            i1 = min(ci0 + fp.mx // rho - 1, cp.i_hi)
            j0 = max(cj0, cp.j_lo)
            j1 = min(cj0 + fp.my // rho - 1, cp.j_hi)
            if i0 > i1 or j0 > j1:
                continue
            sl = (slice(i0 - cp.i_lo, i1 - cp.i_lo + 1),
                  slice(j0 - cp.j_lo, j1 - cp.j_lo + 1))
            sel = con[sl]
            if not sel.any():
                continue
            covered_once[sl] |= sel
            own = d["ids"][ng:-ng, ng:-ng][sl][sel]
            fids = info[(l + 1, kf)]["ids"][
                ng + (i0 - ci0) * rho:ng + (i1 + 1 - ci0) * rho,
                ng + (j0 - cj0) * rho:ng + (j1 + 1 - cj0) * rho]
            blocks = fids.reshape(i1 - i0 + 1, rho, j1 - j0 + 1, rho)
            blocks = blocks.transpose(0, 2, 1, 3).reshape(
                i1 - i0 + 1, j1 - j0 + 1, rho * rho)[sel]
            if (blocks < 0).any():
                raise RuntimeError("composite constraint references an "
                                   "unnumbered fine cell")
            for shift in (0, n):
                rows = np.concatenate([own + shift,
                                       np.repeat(own + shift, rho * rho)])
                cols = np.concatenate([own + shift,
                                       blocks.ravel() + shift])
                vals = np.concatenate([np.ones(own.size),
                                       np.full(own.size * rho * rho, -w)])
                entries.append((rows, cols, vals))
        if not (covered_once == con).all():
            raise RuntimeError("constrained coarse cell has no fine patch")

    def build_system(self):
        """Assemble the all-level system; returns (A, b, info, n)."""
        h, cfg = self.h, self.h.cfg
        info, n = self._build_maps()
        rhs_vec = np.zeros(2 * n)
        entries = []
        any_live = False
        for l in range(1, cfg.max_levels + 1):
            for k, p in enumerate(h.levels[l]):
                d = info[(l, k)]
                r1, r2 = nonlinear_rhs(p, cfg)
                operator_entries(p, cfg, d["ids"], d["s1"], d["s2"], n,
                                 r1, r2, rhs_vec, entries,
                                 ghost_psi=(p.psi1, p.psi2),
                                 row_mask=d["uncovered"])
                any_live |= bool((p.eqn[p.interior][d["uncovered"]]
                                  != 0).any())
                self._constraint_rows(info, l, k, n, entries)
                if l >= 2:
                    self._ghost_interp_rows(info, l, k, n, entries)
        rows = np.concatenate([e[0] for e in entries])
        cols = np.concatenate([e[1] for e in entries])
        vals = np.concatenate([e[2] for e in entries])
        A = csr_from_entries(2 * n, 2 * n, rows, cols, vals)
        return A, rhs_vec, info, n, any_live

    # -- stepping ----------------------------------------------------------

    def solve(self):
        """One coupled correction solve over the whole hierarchy."""
        h = self.h
        A, b, info, n, any_live = self.build_system()
        if not any_live:
            for p in h.all_patches():
                p.psi1[p.interior] = 0.0
                p.psi2[p.interior] = 0.0
            return None
        # ghost unknowns interleave with patch blocks, so scatter the warm
        # start by id rather than concatenating per-patch slices
        x0 = np.zeros(2 * n)
        for key in sorted(info):
            d = info[key]
            own = d["ids"] >= 0
            x0[d["ids"][own]] = d["patch"].psi1[own] * d["s1"][own]
            x0[d["ids"][own] + n] = d["patch"].psi2[own] * d["s2"][own]
        x, stats = self.solver.solve_system(A, b, h.cfg, x0=x0)
        for key in sorted(info):
            d = info[key]
            p = d["patch"]
            own = d["ids"] >= 0
            p.psi1[own] = d["s1"][own] * x[d["ids"][own]]
            p.psi2[own] = d["s2"][own] * x[d["ids"][own] + n]
        # averaged values for excluded covered cells (diagnostics/warm start)
        for l in range(h.cfg.max_levels - 1, 0, -1):
            h.restrict_level(l, fields=("psi1", "psi2"))
        return stats

    def stable_dt(self):
        """Shared step: the tightest CFL bound over all levels."""
        h = self.h
        return min(compute_dt(h.levels[l], h.cfg)
                   for l in range(1, h.cfg.max_levels + 1) if h.levels[l])

    def advance(self, dt):
        """One step of the whole hierarchy with the shared dt."""
        h, cfg = self.h, self.h.cfg
        # regrid_interval counts coarse-grid steps; the shared step is about
        # one finest-level step, so stretch the cadence to match the
        # subcycled mode in physical time
        stretch = 1
        for l in range(1, cfg.max_levels):
            stretch *= cfg.ratio_time(l)
        if (self.steps > 0 and cfg.max_levels > 1
                and self.steps % (cfg.regrid_interval * stretch) == 0):
            h.regrid_from(1)
        dispersive = cfg.mode != "swe"
        for l in range(1, cfg.max_levels + 1):
            if h.levels[l]:
                h.fill_level_ghosts(l, 1.0)
        if dispersive:
            self.solve()
            for p in h.all_patches():
                source_update(p, dt, cfg)
            for l in range(1, cfg.max_levels + 1):
                if h.levels[l]:
                    h.fill_level_ghosts(l, 1.0)
        cmax = 0.0
        fluxes = {l: {} for l in range(1, cfg.max_levels + 1)}
        for l in range(1, cfg.max_levels + 1):
            xfirst = h.sweep_flip[l]
            for p in h.levels[l]:
                fl, c = swe_step(p, dt, cfg, xfirst=xfirst)
                fluxes[l][id(p)] = fl
                cmax = max(cmax, c)
            h.sweep_flip[l] = not xfirst
        for l in range(2, cfg.max_levels + 1):
            if h.levels[l]:
                h._register_fine_fluxes(l, fluxes[l], dt)
        for l in range(1, cfg.max_levels):
            if h.levels[l + 1]:
                h._register_coarse_fluxes(l, fluxes[l], dt)
        for l in range(cfg.max_levels - 1, 0, -1):
            if h.levels[l + 1]:
                h.restrict_level(l)
                h.apply_reflux(l)
        self.steps += 1
        h.steps[1] += 1
        h.time += dt
        return cmax
