"""One-dimensional reference solver for radially symmetric (and plane) runs.

Rewrites the two-dimensional model in the radial coordinate r: mass is
advanced in annulus-weighted flux form (exactly conserving the integral of
h * r dr), momentum in fluctuation form with the geometric source -h*u^2/r,
and the dispersive correction solves a tridiagonal system whose operator is
the radial reduction of the two-dimensional one.  With ``geometry="plane"``
every 1/r term is dropped and the solver becomes the straight 1-D limit of
the 2-D scheme, which makes it directly comparable to a one-cell-wide 2-D
channel run.

The grid places cell i at r = (i + 1/2) * dr so no cell center sits at the
origin; the r = 0 face has zero annulus weight, which closes the domain
without any special casing.  Two ghost cells on each side mirror the 2-D
layout: the inner boundary is always the symmetry axis (depth and bed even,
velocity odd), the outer boundary is wall or outflow by configuration.
"""

from __future__ import annotations

import numpy as np

from .swe import _interface_solve, limited_corrections, velocity

NGHOST = 2


def thomas_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system in place-free form by forward elimination.

    ``lower[i]`` couples row i to i-1 (lower[0] unused), ``upper[i]`` to
    i+1 (upper[-1] unused).
    """
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


class RadialSolver:
    """Finite-volume dispersive shallow-water solver on a 1-D radial grid."""

    def __init__(self, n, dr, bed, *, geometry="radial", model="sgn",
                 g=9.81, alpha=1.153, sea_level=0.0, dry_tolerance=1e-3,
                 h_switch=5.0, bc_outer="extrapolation"):
        if geometry not in ("radial", "plane"):
            raise ValueError(f"unknown geometry {geometry!r}")
        if model not in ("sgn", "swe"):
            raise ValueError(f"unknown model {model!r}")
        if bc_outer not in ("extrapolation", "wall"):
            raise ValueError(f"unknown outer boundary {bc_outer!r}")
        self.n = n
        self.dr = dr
        self.geometry = geometry
        self.model = model
        self.g = g
        self.alpha = alpha
        self.sea_level = sea_level
        self.dry_tolerance = dry_tolerance
        self.h_switch = h_switch
        self.bc_outer = bc_outer

        # padded arrays; interior occupies [NGHOST, NGHOST + n)
        self.r = (np.arange(-NGHOST, n + NGHOST) + 0.5) * dr
        self.B = np.asarray(bed(np.abs(self.r)), dtype=float).copy()
        self._extend_bed()
        self.h = np.maximum(0.0, sea_level - self.B)
        self.hu = np.zeros(n + 2 * NGHOST)
        self.psi = np.zeros(n + 2 * NGHOST)
        self.time = 0.0
        self.solves = 0

    # -- grid helpers -----------------------------------------------------

    @property
    def interior(self):
        return slice(NGHOST, NGHOST + self.n)

    def r_cells(self):
        return self.r[self.interior]

    def eta(self):
        """Free-surface elevation over interior cells."""
        i = self.interior
        return self.h[i] + self.B[i]

    def mass(self):
        """Discrete water volume (annulus-weighted in radial geometry)."""
        i = self.interior
        w = self.r[i] if self.geometry == "radial" else np.ones(self.n)
        return float(np.sum(self.h[i] * w) * self.dr)

    def set_initial(self, eta0=None, u0=None):
        i = self.interior
        B = self.B[i]
        eta = np.full(self.n, self.sea_level) if eta0 is None \
            else np.asarray(eta0(self.r[i]), dtype=float)
        self.h[i] = np.maximum(0.0, eta - B)
        if u0 is not None:
            self.hu[i] = self.h[i] * np.asarray(u0(self.r[i]), dtype=float)
        self.fill_ghosts()

    def _extend_bed(self):
        # inner ghosts were sampled at |r| already (bed even across the axis);
        # outer ghosts follow the boundary type like the 2-D patches do
        if self.bc_outer == "extrapolation":
            self.B[-NGHOST:] = self.B[-NGHOST - 1]
        else:
            self.B[-1] = self.B[-NGHOST - 2]
            self.B[-2] = self.B[-NGHOST - 1]

    def fill_ghosts(self):
        h, hu, psi = self.h, self.hu, self.psi
        ng = NGHOST
        # symmetry axis: scalars even, radial vectors odd
        h[0] = h[3]
        h[1] = h[2]
        for a in (hu, psi):
            a[0] = -a[3]
            a[1] = -a[2]
        if self.bc_outer == "extrapolation":
            for a in (h, hu, psi):
                a[-ng:] = a[-ng - 1]
        else:
            h[-1] = h[-ng - 2]
            h[-2] = h[-ng - 1]
            for a in (hu, psi):
                a[-1] = -a[-ng - 2]
                a[-2] = -a[-ng - 1]

    # -- time stepping ----------------------------------------------------

    def compute_dt(self, cfl=0.45):
        i = self.interior
        wet = self.h[i] > self.dry_tolerance
        if not np.any(wet):
            return np.inf
        u = velocity(self.h[i][wet], self.hu[i][wet], self.dry_tolerance)
        speed = np.abs(u) + np.sqrt(self.g * self.h[i][wet])
        return cfl * self.dr / float(np.max(speed))

    def step(self, dt):
        self.fill_ghosts()
        if self.model == "sgn":
            self._solve_dispersive()
            self._apply_dispersive_source(dt)
            self.fill_ghosts()
        self._hyperbolic_update(dt)
        self.time += dt

    def run_until(self, t_end, cfl=0.45, max_steps=10**7):
        steps = 0
        while self.time < t_end - 1e-12 * max(1.0, t_end):
            dt = min(self.compute_dt(cfl), t_end - self.time)
            self.step(dt)
            steps += 1
            if steps >= max_steps:
                raise RuntimeError("step budget exhausted")
        return steps

    # -- hyperbolic part ---------------------------------------------------

    def _hyperbolic_update(self, dt):
        h, hu, B = self.h, self.hu, self.B
        g, drytol, dr = self.g, self.dry_tolerance, self.dr
        zeros = np.zeros(h.shape[0] - 1)
        s1, s2, s3, amdq, apdq, fstar, waves, gammas = _interface_solve(
            h[:-1], hu[:-1], zeros, B[:-1],
            h[1:], hu[1:], zeros, B[1:], g, drytol)
        nu = dt / dr
        ftil = limited_corrections(waves, (s1, s2, s3), nu)

        cells = self.interior          # padded cells [2, n+2)
        IL = slice(1, self.n + 1)      # left face of each updated cell
        IR = slice(2, self.n + 2)      # right face

        if self.geometry == "radial":
            rc = self.r[cells]
            u = velocity(h[cells], hu[cells], drytol)
            geom = h[cells] * u * u / rc
            # faces at multiples of dr; the r = 0 face has zero weight
            rf = np.arange(-1, self.n + NGHOST) * dr
            fm = fstar[0] + ftil[0]
            h[cells] -= dt / (rc * dr) * (rf[IR] * fm[IR] - rf[IL] * fm[IL])
            hu[cells] -= nu * ((apdq[1][IL] + amdq[1][IR])
                               + (ftil[1][IR] - ftil[1][IL]))
            hu[cells] -= dt * geom
        else:
            for q, a, b, f in ((h, amdq[0], apdq[0], ftil[0]),
                               (hu, amdq[1], apdq[1], ftil[1])):
                q[cells] -= nu * ((b[IL] + a[IR]) + (f[IR] - f[IL]))

        np.maximum(h[cells], 0.0, out=h[cells])
        dry = h[cells] <= drytol
        hu_int = hu[cells]
        hu_int[dry] = 0.0

    # -- dispersive part ---------------------------------------------------

    def _still_depth_mask(self):
        """True on cells where the correction stays active."""
        still = self.sea_level - self.B
        near = np.minimum(np.minimum(still[:-2], still[1:-1]), still[2:])
        live = np.zeros(self.n + 2 * NGHOST, dtype=bool)
        live[1:-1] = near >= self.h_switch
        return live[self.interior]

    def _gradients(self):
        """Centered first/second differences of bed and surface on the ring."""
        dr = self.dr
        ring = slice(1, self.n + 2 * NGHOST - 1)
        B, h = self.B, self.h
        eta = h + B
        Br = (B[2:] - B[:-2]) / (2.0 * dr)
        Brr = (B[2:] - 2.0 * B[1:-1] + B[:-2]) / (dr * dr)
        hr = (h[2:] - h[:-2]) / (2.0 * dr)
        etar = (eta[2:] - eta[:-2]) / (2.0 * dr)
        return ring, Br, Brr, hr, etar

    def dispersive_system(self, live=None):
        """Assemble the tridiagonal correction system over interior cells.

        Returns (lower, diag, upper, rhs, live) with boundary folds applied
        to the first and last rows; masked cells carry identity rows.
        """
        n, dr, g, alpha = self.n, self.dr, self.g, self.alpha
        i = self.interior
        if live is None:
            live = self._still_depth_mask() & (self.h[i] > self.dry_tolerance)

        ring, Br, Brr, hr, etar = self._gradients()
        ufull = velocity(self.h, self.hu, self.dry_tolerance)
        u = ufull[ring]
        ur = (ufull[2:] - ufull[:-2]) / (2.0 * dr)
        rr = self.r[ring]  # signed radius: keeps mirrored ghosts consistent

        if self.geometry == "radial":
            phi = ur * ur + ur * u / rr + (u / rr) ** 2
        else:
            phi = ur * ur
        w = u * u * Brr

        # interior views of the ring-sized gradient arrays
        ii = slice(NGHOST - 1, NGHOST - 1 + n)
        hc = self.h[i]
        phir = (phi[NGHOST:NGHOST + n] - phi[NGHOST - 2:NGHOST - 2 + n]) \
            / (2.0 * dr)
        wr = (w[NGHOST:NGHOST + n] - w[NGHOST - 2:NGHOST - 2 + n]) / (2.0 * dr)
        wi = w[ii]
        Bri, Brri = Br[ii], Brr[ii]
        hri, etari = hr[ii], etar[ii]
        rhs = ((g / alpha) * etari
               + 2.0 * hc * ((hc / 3.0) * phir + phi[ii] * (hri + 0.5 * Bri))
               + 0.5 * hc * wr + wi * etari)

        t2 = alpha * hc * hc / (3.0 * dr * dr)
        adv = alpha * hc * hri / (2.0 * dr)
        diag = 1.0 + 2.0 * t2 + alpha * (0.5 * hc * Brri + Bri * etari)
        lo = -t2 + adv
        up = -t2 - adv
        if self.geometry == "radial":
            rc = self.r[i]
            curv = alpha * hc * hc / (6.0 * rc * dr)
            diag += alpha * (hc * hc / (3.0 * rc * rc) - hc * hri / rc
                             - 0.5 * hc * Bri / rc)
            lo += curv
            up -= curv

        lower = np.where(live, lo, 0.0)
        upper = np.where(live, up, 0.0)
        dmain = np.where(live, diag, 1.0)
        b = np.where(live, rhs, 0.0)

        # boundary folds: the correction is a radial vector component, so it
        # is odd across the symmetry axis and across an outer wall
        dmain[0] -= lower[0]
        if self.bc_outer == "extrapolation":
            dmain[-1] += upper[-1]
        else:
            dmain[-1] -= upper[-1]
        lower[0] = 0.0
        upper[-1] = 0.0
        return lower, dmain, upper, b, live

    def _solve_dispersive(self):
        i = self.interior
        live = self._still_depth_mask() & (self.h[i] > self.dry_tolerance)
        if not np.any(live):
            self.psi[:] = 0.0
            return
        lower, dmain, upper, b, live = self.dispersive_system(live)
        self.psi[i] = thomas_solve(lower, dmain, upper, b)
        self.psi[i][~live] = 0.0
        self.solves += 1

    def _apply_dispersive_source(self, dt):
        i = self.interior
        live = self._still_depth_mask() & (self.h[i] > self.dry_tolerance)
        eta = self.h + self.B
        etar = (eta[NGHOST + 1:NGHOST + 1 + self.n]
                - eta[NGHOST - 1:NGHOST - 1 + self.n]) / (2.0 * self.dr)
        dhu = dt * self.h[i] * ((self.g / self.alpha) * etar - self.psi[i])
        hu_int = self.hu[i]
        hu_int[live] += dhu[live]
