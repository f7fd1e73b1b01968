"""Core types: run configuration, bathymetry sampling, patches, gauges.

Sign conventions: the bed elevation B is measured from the reference sea
level, so open water has B < 0 and the still-water depth there is -B.  The
free surface is eta = h + B wherever the cell is wet.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

NGHOST = 2  # ghost ring width; two cells are needed by the limited sweeps

MODES = ("swe", "sgn_subcycled", "sgn_composite")
BC_KINDS = ("wall", "extrapolation")


@dataclass
class CellState:
    """Per-cell unknowns: depth, momenta, and the dispersive correction."""

    h: float
    hu: float
    hv: float
    psi1: float = 0.0
    psi2: float = 0.0


@dataclass
class GaugeRecord:
    t: float
    h: float
    hu: float
    hv: float
    eta: float
    level: int


def eta_of(h, B, dry_tolerance):
    """Free surface of a cell: (h + B, False) if wet, else (B, True).

    For a dry cell the returned value is the ground elevation and the second
    element marks it dry.
    """
    if h >= dry_tolerance:
        return h + B, False
    return B, True


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    # physics
    g: float = 9.81
    alpha: float = 1.153          # dispersion tuning coefficient
    h_switch: float = 5.0         # still-water depth below which cells run plain SWE
    dry_tolerance: float = 1e-3
    sea_level: float = 0.0
    # time stepping
    cfl_target: float = 0.9
    t_end: float = 0.0
    max_steps: int = 10**9
    # refinement
    max_levels: int = 1
    refine_ratio_space: tuple = (2,)
    refine_ratio_time: tuple = (2,)
    flag_tolerance: float = 0.01
    flag_buffer: int = 1
    regrid_interval: int = 4
    max_patch_size: int = 100
    cluster_efficiency: float = 0.6
    # elliptic solver
    solver_rtol: float = 1e-9
    solver_maxit: int = 1500
    solver_method: str = "bicgstab"
    solver_precond: str = "auto"  # ilu0 when compiled (jacobi retry on failure), else jacobi
    precond_rebuild_interval: int = 25
    mode: str = "sgn_subcycled"
    # domain and level-1 grid
    x_lo: float = 0.0
    x_hi: float = 1.0
    y_lo: float = 0.0
    y_hi: float = 1.0
    mx: int = 10
    my: int = 10
    bc_left: str = "extrapolation"
    bc_right: str = "extrapolation"
    bc_bottom: str = "extrapolation"
    bc_top: str = "extrapolation"
    # scenario
    bathymetry: str = "flat:100"
    ic: str = "lake_at_rest"
    # outputs
    output_times: tuple = ()
    gauges: tuple = ()            # ((x, y), ...)
    transect: tuple = ()          # (x0, y0, x1, y1) or empty
    transect_points: int = 500
    # refinement region control: (level, x1, x2, y1, y2) entries
    allowed_regions: tuple = ()
    forced_regions: tuple = ()
    threads: int = 1

    def ratio_space(self, level):
        """Spatial refinement factor between `level` and `level + 1`."""
        r = self.refine_ratio_space
        return r[min(level - 1, len(r) - 1)]

    def ratio_time(self, level):
        r = self.refine_ratio_time
        return r[min(level - 1, len(r) - 1)]

    def dx_of(self, level):
        dx = (self.x_hi - self.x_lo) / self.mx
        for lev in range(1, level):
            dx /= self.ratio_space(lev)
        return dx

    def dy_of(self, level):
        dy = (self.y_hi - self.y_lo) / self.my
        for lev in range(1, level):
            dy /= self.ratio_space(lev)
        return dy

    def shape_of(self, level):
        mx, my = self.mx, self.my
        for lev in range(1, level):
            r = self.ratio_space(lev)
            mx *= r
            my *= r
        return mx, my

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"config key 'mode': '{self.mode}' not in {MODES}")
        for key in ("bc_left", "bc_right", "bc_bottom", "bc_top"):
            v = getattr(self, key)
            if v not in BC_KINDS:
                raise ValueError(f"config key '{key}': '{v}' not in {BC_KINDS}")
        if not 0.0 < self.cfl_target <= 1.0:
            raise ValueError("config key 'cfl_target': must be in (0, 1]")
        if self.dry_tolerance <= 0.0:
            raise ValueError("config key 'dry_tolerance': must be positive")
        if self.max_levels < 1:
            raise ValueError("config key 'max_levels': must be >= 1")
        for key in ("refine_ratio_space", "refine_ratio_time"):
            ratios = getattr(self, key)
            if len(ratios) == 0:
                raise ValueError(f"config key '{key}': empty")
            for r in ratios:
                if int(r) != r or r < 2:
                    raise ValueError(f"config key '{key}': ratios must be integers >= 2")
        if self.x_hi <= self.x_lo or self.y_hi <= self.y_lo:
            raise ValueError("config key 'x_hi'/'y_hi': domain extents are empty")
        if self.mx < 1 or self.my < 1:
            raise ValueError("config key 'mx'/'my': grid must be at least 1x1")
        if self.solver_method not in ("bicgstab", "gmres"):
            raise ValueError(f"config key 'solver_method': '{self.solver_method}'")
        if self.solver_precond not in ("auto", "ilu0", "jacobi", "none"):
            raise ValueError(f"config key 'solver_precond': '{self.solver_precond}'")
        if self.regrid_interval < 1:
            raise ValueError("config key 'regrid_interval': must be >= 1")
        if self.threads < 1:
            raise ValueError("config key 'threads': must be >= 1")
        for name in ("allowed_regions", "forced_regions"):
            for entry in getattr(self, name):
                if len(entry) != 5:
                    raise ValueError(f"config key '{name}': entries are level:x1:x2:y1:y2")
        return self


_TUPLE_FLOAT_KEYS = {"output_times", "transect"}
_TUPLE_PAIR_KEYS = {"gauges"}
_TUPLE_REGION_KEYS = {"allowed_regions", "forced_regions"}
_TUPLE_INT_KEYS = {"refine_ratio_space", "refine_ratio_time"}


def _parse_value(key, text, target_type):
    text = text.strip()
    if key in _TUPLE_INT_KEYS:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    if key in _TUPLE_FLOAT_KEYS:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    if key in _TUPLE_PAIR_KEYS:
        out = []
        for tok in text.split(","):
            tok = tok.strip()
            if tok:
                a, b = tok.split(":")
                out.append((float(a), float(b)))
        return tuple(out)
    if key in _TUPLE_REGION_KEYS:
        out = []
        for tok in text.split(","):
            tok = tok.strip()
            if tok:
                parts = tok.split(":")
                out.append((int(parts[0]),) + tuple(float(p) for p in parts[1:]))
        return tuple(out)
    if target_type is float:
        return float(text)
    if target_type is int:
        return int(text)
    return text


def parse_overrides(cfg, pairs):
    """Apply key=value override strings to a config in place."""
    fields = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    for key, raw in pairs:
        if key not in fields:
            raise ValueError(f"unknown config key '{key}'")
        try:
            value = _parse_value(key, raw, type(getattr(cfg, key)))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"config key '{key}': cannot parse '{raw}'") from exc
        setattr(cfg, key, value)
    return cfg


def load_config(path_or_text, from_string=False):
    """Read a key=value config file ('#' starts a comment) into SimConfig."""
    if from_string:
        lines = path_or_text.splitlines()
        where = "<string>"
    else:
        with open(path_or_text) as f:
            lines = f.read().splitlines()
        where = str(path_or_text)
    cfg = SimConfig()
    for ln, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"{where}:{ln}: expected key=value, got '{line.strip()}'")
        key, raw = body.split("=", 1)
        try:
            parse_overrides(cfg, [(key.strip(), raw)])
        except ValueError as exc:
            raise ValueError(f"{where}:{ln}: {exc}") from exc
    return cfg.validate()


def dump_config(cfg):
    """Render a config back to key=value lines (round-trips via load_config)."""
    out = []
    for f in dataclasses.fields(SimConfig):
        v = getattr(cfg, f.name)
        if f.name in _TUPLE_PAIR_KEYS:
            text = ",".join(f"{a!r}:{b!r}" for a, b in v)
        elif f.name in _TUPLE_REGION_KEYS:
            text = ",".join(":".join(repr(x) for x in entry) for entry in v)
        elif isinstance(v, tuple):
            text = ",".join(repr(x) for x in v)
        else:
            text = repr(v) if isinstance(v, float) else str(v)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# bathymetry
# ---------------------------------------------------------------------------

class Bathymetry:
    """Bed elevation B(x, y), either analytic or a node-registered raster."""

    def __init__(self, fn=None, raster=None):
        if (fn is None) == (raster is None):
            raise ValueError("exactly one of fn / raster required")
        self.fn = fn
        self.raster = raster  # (x0, y0, cellsize, z[ncols, nrows]) with y increasing

    @property
    def extent(self):
        if self.raster is None:
            return None
        x0, y0, cs, z = self.raster
        return (x0, x0 + cs * (z.shape[0] - 1), y0, y0 + cs * (z.shape[1] - 1))

    def sample(self, x, y, clamp=False):
        """Bilinear sample; exact at node locations.

        Out-of-extent queries raise unless clamp=True (used for ghost cells),
        in which case coordinates are clipped to the raster edge.
        """
        if self.fn is not None:
            return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        x0, y0, cs, z = self.raster
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fx = (x - x0) / cs
        fy = (y - y0) / cs
        if clamp:
            fx = np.clip(fx, 0.0, z.shape[0] - 1)
            fy = np.clip(fy, 0.0, z.shape[1] - 1)
        elif (np.any(fx < 0) or np.any(fx > z.shape[0] - 1)
              or np.any(fy < 0) or np.any(fy > z.shape[1] - 1)):
            raise ValueError("bathymetry sample outside raster extent")
        ix = np.clip(np.floor(fx).astype(int), 0, z.shape[0] - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, z.shape[1] - 2)
        tx = fx - ix
        ty = fy - iy
        v = (z[ix, iy] * (1 - tx) * (1 - ty) + z[ix + 1, iy] * tx * (1 - ty)
             + z[ix, iy + 1] * (1 - tx) * ty + z[ix + 1, iy + 1] * tx * ty)
        if np.any(np.isnan(v)):
            raise ValueError("bathymetry sample touches nodata cells")
        return v


def sample_bathymetry(bathy, x, y):
    """Public sampling entry point; errors outside the raster extent."""
    return bathy.sample(x, y, clamp=False)


def read_ascii_grid(path):
    """Read an ASCII grid raster (node registration, north row first)."""
    header = {}
    with open(path) as f:
        pos = 0
        for _ in range(6):
            line = f.readline()
            pos = f.tell()
            key, val = line.split()
            header[key.lower()] = float(val)
        f.seek(pos)
        values = np.loadtxt(f, dtype=float)
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    values = np.atleast_2d(values)
    if values.shape != (nrows, ncols):
        raise ValueError(f"raster body is {values.shape}, header says {(nrows, ncols)}")
    if "nodata_value" in header:
        values = np.where(values == header["nodata_value"], np.nan, values)
    # file rows run north to south; store z[ix, iy] with iy increasing north
    z = values[::-1].T.copy()
    return Bathymetry(raster=(header["xllcorner"], header["yllcorner"],
                              header["cellsize"], z))


def write_ascii_grid(path, x0, y0, cellsize, z, nodata=-99999.0):
    """Write z[ix, iy] (iy increasing north) as an ASCII grid raster."""
    ncols, nrows = z.shape
    with open(path, "w") as f:
        f.write(f"ncols {ncols}\n")
        f.write(f"nrows {nrows}\n")
        f.write(f"xllcorner {float(x0)!r}\n")
        f.write(f"yllcorner {float(y0)!r}\n")
        f.write(f"cellsize {float(cellsize)!r}\n")
        f.write(f"nodata_value {float(nodata)!r}\n")
        body = z.T[::-1]
        for row in body:
            f.write(" ".join(f"{float(v)!r}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------

class Patch:
    """A rectangular block of cells at one refinement level.

    Arrays carry a ghost ring of NGHOST cells on every side and are indexed
    [i, j] with i along x.  (i_lo, j_lo) is the window origin in the level's
    global index space; cell (i, j) of the level has its center at
    x_lo_domain + (i + 0.5) dx.
    """

    FIELDS = ("h", "hu", "hv", "psi1", "psi2")

    def __init__(self, level, i_lo, j_lo, mx, my, dx, dy, origin):
        self.level = level
        self.i_lo = i_lo
        self.j_lo = j_lo
        self.mx = mx
        self.my = my
        self.dx = dx
        self.dy = dy
        self.origin = origin  # domain (x_lo, y_lo)
        ng = NGHOST
        shape = (mx + 2 * ng, my + 2 * ng)
        self.h = np.zeros(shape)
        self.hu = np.zeros(shape)
        self.hv = np.zeros(shape)
        self.psi1 = np.zeros(shape)
        self.psi2 = np.zeros(shape)
        self.B = np.zeros(shape)
        # 1 = dispersive correction active, 0 = shallow-water only (switch mask)
        self.eqn = np.ones(shape, dtype=np.int8)

    @property
    def i_hi(self):
        return self.i_lo + self.mx - 1

    @property
    def j_hi(self):
        return self.j_lo + self.my - 1

    @property
    def interior(self):
        ng = NGHOST
        return (slice(ng, ng + self.mx), slice(ng, ng + self.my))

    def x_centers(self, with_ghosts=True):
        ng = NGHOST if with_ghosts else 0
        idx = np.arange(self.i_lo - ng, self.i_lo + self.mx + ng)
        return self.origin[0] + (idx + 0.5) * self.dx

    def y_centers(self, with_ghosts=True):
        ng = NGHOST if with_ghosts else 0
        idx = np.arange(self.j_lo - ng, self.j_lo + self.my + ng)
        return self.origin[1] + (idx + 0.5) * self.dy

    def state_copy(self):
        return {name: getattr(self, name).copy() for name in self.FIELDS}

    def state_restore(self, saved):
        for name in self.FIELDS:
            getattr(self, name)[...] = saved[name]

    def __repr__(self):
        return (f"Patch(level={self.level}, i_lo={self.i_lo}, j_lo={self.j_lo}, "
                f"mx={self.mx}, my={self.my})")


def check_no_overlap(patches):
    """Same-level patches must not overlap (interiors are disjoint)."""
    for a_idx, a in enumerate(patches):
        for b in patches[a_idx + 1:]:
            if (a.i_lo <= b.i_hi and b.i_lo <= a.i_hi
                    and a.j_lo <= b.j_hi and b.j_lo <= a.j_hi):
                raise ValueError(f"overlapping patches at level {a.level}: {a} and {b}")
