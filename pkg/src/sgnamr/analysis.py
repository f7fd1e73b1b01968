"""Wave diagnostics: linear dispersion relations and profile measurements.

The dispersion relations give the angular frequency of a small-amplitude
plane wave of wavenumber k on still depth h0 for each model family:

  swe    long-wave limit, non-dispersive
  airy   full linear water-wave theory
  sgn    the dispersive model solved by this package (parameter alpha)
  ms     the classic weakly-nonlinear alternative (parameter beta)

sgn with alpha = 1 and ms with beta = 0 coincide identically.
"""

import numpy as np

from .core import NGHOST

DISPERSION_MODELS = ("swe", "airy", "sgn", "ms")


def omega(model, k, h0, g=9.81, alpha=1.153, beta=1.0 / 15.0):
    """Angular frequency of a linear plane wave; k may be an array.

    Complex k is accepted so group_speed can differentiate by complex step.
    """
    k = np.asarray(k)
    if not np.iscomplexobj(k):
        k = k.astype(float)
    kh = k * h0
    gh = g * h0
    if model == "swe":
        c2 = gh * np.ones_like(k)
    elif model == "airy":
        # k h -> 0 limit of tanh(kh)/(kh) is 1
        r = np.where(kh != 0.0, np.tanh(kh) / np.where(kh != 0.0, kh, 1.0), 1.0)
        c2 = gh * r
    elif model == "sgn":
        mu = kh * kh
        c2 = gh * (1.0 + (alpha - 1.0) * mu / 3.0) / (1.0 + alpha * mu / 3.0)
    elif model == "ms":
        mu = kh * kh
        c2 = gh * (1.0 + beta * mu) / (1.0 + (beta + 1.0 / 3.0) * mu)
    else:
        raise ValueError(f"unknown dispersion model {model!r}")
    return k * np.sqrt(c2)


def phase_speed(model, k, h0, g=9.81, alpha=1.153, beta=1.0 / 15.0):
    k = np.asarray(k, dtype=float)
    w = omega(model, k, h0, g=g, alpha=alpha, beta=beta)
    return np.where(k != 0.0, w / np.where(k != 0.0, k, 1.0),
                    np.sqrt(g * h0))


def group_speed(model, k, h0, g=9.81, alpha=1.153, beta=1.0 / 15.0,
                rel_step=1e-20):
    """d(omega)/dk by a complex-step derivative.

    Free of subtractive cancellation, so it is accurate to machine precision
    without transcribing hand-differentiated formulas.
    """
    k = np.asarray(k, dtype=float)
    dk = np.maximum(np.abs(k), 1e-30) * rel_step
    w = omega(model, k + 1j * dk, h0, g=g, alpha=alpha, beta=beta)
    return np.imag(w) / dk


def crest_position(x, eta, lo=None, hi=None):
    """Sub-cell position of the highest point of eta, parabola-refined.

    lo/hi restrict the search window in x-coordinates.
    """
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sel = np.ones(x.size, dtype=bool)
    if lo is not None:
        sel &= x >= lo
    if hi is not None:
        sel &= x <= hi
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise ValueError("empty crest search window")
    i = idx[np.argmax(eta[idx])]
    if i == 0 or i == x.size - 1:
        return float(x[i])
    ym, y0, yp = eta[i - 1], eta[i], eta[i + 1]
    den = ym - 2.0 * y0 + yp
    if den == 0.0:
        return float(x[i])
    frac = 0.5 * (ym - yp) / den
    frac = min(0.5, max(-0.5, frac))
    return float(x[i] + frac * (x[i + 1] - x[i]))


def measure_phase_speed(x, frames, times, lo=None, hi=None,
                        expected_speed=None):
    """Crest propagation speed least-squares fitted across snapshots.

    frames is a sequence of eta arrays on the common abscissa x, taken at the
    matching times.  The sub-cell crest position is tracked frame to frame and
    position-vs-time is fitted by least squares; the slope is returned.

    When expected_speed is given, each search window after the first is
    centered on the previous crest advanced by expected_speed * dt (halving
    the risk of locking onto a neighboring crest of a wavetrain); otherwise
    the fixed lo/hi window is reused.  Frames whose window contains no sample
    are skipped; fewer than three usable crests is an error.
    """
    x = np.asarray(x, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(frames) != times.size:
        raise ValueError("one time per frame required")
    dx = float(np.mean(np.diff(x))) if x.size > 1 else 1.0
    t_used = []
    pos = []
    for eta, t in zip(frames, times):
        try:
            if expected_speed is not None and pos:
                shift = expected_speed * (t - t_used[-1])
                center = pos[-1] + shift
                half = 0.45 * abs(shift) + 1.5 * abs(dx)
                p = crest_position(x, eta, center - half, center + half)
            else:
                p = crest_position(x, eta, lo, hi)
        except ValueError:
            continue
        t_used.append(float(t))
        pos.append(p)
    if len(pos) < 3:
        raise ValueError(f"only {len(pos)} usable crests; need at least 3")
    return float(np.polyfit(t_used, pos, 1)[0])


def _collapse_plateaus(x, y):
    """Merge runs of exactly repeated y values into single samples.

    Piecewise-constant sampling (a transect read from finite-volume cells at
    sub-cell spacing) repeats each cell value several times; local-extremum
    tests on such a staircase fire on every riser.  Each run is replaced by
    one sample at the run's mean coordinate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return x, y
    new_run = np.empty(y.size, dtype=bool)
    new_run[0] = True
    new_run[1:] = y[1:] != y[:-1]
    run_id = np.cumsum(new_run) - 1
    n_runs = int(run_id[-1]) + 1
    counts = np.bincount(run_id, minlength=n_runs)
    xs = np.bincount(run_id, weights=x, minlength=n_runs) / counts
    return xs, y[new_run]


def count_extrema(x, eta, threshold, lo=None, hi=None):
    """Number of interior turning points of eta with swing above threshold.

    Plateaus are collapsed first, then strict alternating local extrema are
    found, and adjacent extremum pairs are merged (smallest swing first)
    until every remaining swing between neighbors is at least `threshold`.
    Counts the surviving interior extrema; NaN samples are ignored.
    """
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sel = np.isfinite(eta)
    if lo is not None:
        sel &= x >= lo
    if hi is not None:
        sel &= x <= hi
    _, e = _collapse_plateaus(x[sel], eta[sel])
    if e.size < 3:
        return 0
    mid = e[1:-1]
    turning = np.flatnonzero(((mid > e[:-2]) & (mid > e[2:]))
                             | ((mid < e[:-2]) & (mid < e[2:]))) + 1
    vals = list(e[turning])
    while len(vals) >= 2:
        swings = [abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1)]
        k = int(np.argmin(swings))
        if swings[k] >= threshold:
            break
        del vals[k:k + 2]
    if len(vals) == 1 and abs(vals[0]) < threshold:
        return 0
    return len(vals)


def _refine_parabola(xm, x0, xp, ym, y0, yp):
    """Vertex of the parabola through three (possibly unevenly spaced) points.

    Returns (x_vertex, y_vertex); falls back to the middle point when the
    fit is not concave.
    """
    a, b, c = np.polyfit([xm - x0, 0.0, xp - x0], [ym, y0, yp], 2)
    if a >= 0.0:
        return float(x0), float(y0)
    t = -b / (2.0 * a)
    t = min(xp - x0, max(xm - x0, t))
    return float(x0 + t), float(a * t * t + b * t + c)


def leading_crest(s, eta, threshold_frac=0.2):
    """Sub-cell position and height of the largest-s significant crest.

    Plateaus from piecewise-constant sampling are collapsed, then a crest is
    a strict interior local maximum whose height exceeds threshold_frac
    times the global maximum; the rightmost such crest is refined by a
    parabola through its neighbors.  Returns (s_peak, amplitude).
    """
    s = np.asarray(s, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ok = np.isfinite(eta)
    if ok.sum() < 3:
        raise ValueError("too few samples to locate a crest")
    s, eta = _collapse_plateaus(s[ok], eta[ok])
    if eta.size < 3:
        raise ValueError("too few distinct samples to locate a crest")
    peak = float(np.max(eta))
    if peak <= 0.0:
        raise ValueError("no positive crest present")
    mid = eta[1:-1]
    is_max = (mid > eta[:-2]) & (mid > eta[2:]) & (mid > threshold_frac * peak)
    idx = np.flatnonzero(is_max)
    if idx.size == 0:
        raise ValueError("no crest above threshold")
    i = int(idx[-1]) + 1
    return _refine_parabola(s[i - 1], s[i], s[i + 1],
                            eta[i - 1], eta[i], eta[i + 1])


def transect_error(s_sim, eta_sim, s_ref, eta_ref, lo=None, hi=None):
    """Error norms of a simulated transect against a reference transect.

    Both profiles are resampled by linear interpolation onto a common
    abscissa covering the overlap of their finite-valued ranges, optionally
    clipped to [lo, hi].  Returns a dict with keys l1 (trapezoidal integral
    of |difference|), linf, peak_amplitude_error (relative, signed), and
    peak_location_error (signed, simulated minus reference), the peak being
    the leading crest of each profile.
    """
    def clean(s, eta):
        s = np.asarray(s, dtype=float)
        eta = np.asarray(eta, dtype=float)
        ok = np.isfinite(s) & np.isfinite(eta)
        s, eta = s[ok], eta[ok]
        order = np.argsort(s)
        return s[order], eta[order]

    s_sim, eta_sim = clean(s_sim, eta_sim)
    s_ref, eta_ref = clean(s_ref, eta_ref)
    a = max(s_sim[0] if s_sim.size else np.inf,
            s_ref[0] if s_ref.size else np.inf)
    b = min(s_sim[-1] if s_sim.size else -np.inf,
            s_ref[-1] if s_ref.size else -np.inf)
    if lo is not None:
        a = max(a, lo)
    if hi is not None:
        b = min(b, hi)
    if not b > a:
        raise ValueError("empty comparison window")
    step = min(float(np.median(np.diff(s_sim))), float(np.median(np.diff(s_ref))))
    n = max(3, int(round((b - a) / step)) + 1)
    grid = np.linspace(a, b, n)
    f_sim = np.interp(grid, s_sim, eta_sim)
    f_ref = np.interp(grid, s_ref, eta_ref)
    diff = f_sim - f_ref
    sp_sim, amp_sim = leading_crest(grid, f_sim)
    sp_ref, amp_ref = leading_crest(grid, f_ref)
    return {
        "l1": float(np.trapezoid(np.abs(diff), grid)),
        "linf": float(np.max(np.abs(diff))),
        "peak_amplitude_error": float((amp_sim - amp_ref) / amp_ref),
        "peak_location_error": float(sp_sim - sp_ref),
    }


def transect_values(patches, points, dry_tolerance, sea_level=0.0):
    """Sample eta along given (x, y) points from the finest covering patch.

    points is an (n, 2) array; returns (eta, level) arrays with NaN where no
    patch covers a point.  Uses the cell value containing the point (piecewise
    constant), which is what the conservative scheme actually predicts.
    """
    pts = np.asarray(points, dtype=float)
    eta = np.full(pts.shape[0], np.nan)
    lev = np.zeros(pts.shape[0], dtype=np.int64)
    for p in patches:
        x0 = p.origin[0] + p.i_lo * p.dx
        y0 = p.origin[1] + p.j_lo * p.dy
        ix = np.floor((pts[:, 0] - x0) / p.dx).astype(np.int64)
        iy = np.floor((pts[:, 1] - y0) / p.dy).astype(np.int64)
        inside = ((ix >= 0) & (ix < p.mx) & (iy >= 0) & (iy < p.my)
                  & (p.level >= lev))
        if not inside.any():
            continue
        h = p.h[NGHOST + ix[inside], NGHOST + iy[inside]]
        b = p.B[NGHOST + ix[inside], NGHOST + iy[inside]]
        val = np.where(h < dry_tolerance, np.nan, h + b)
        eta[inside] = val
        lev[inside] = p.level
    return eta, lev


def transect_table(patches, points, dry_tolerance, sea_level=0.0):
    """Sample eta, h, and B along (x, y) points from the finest covering patch.

    Same cell-containing lookup as transect_values; returns a dict of arrays
    keyed eta/h/B/level.  eta is NaN on dry cells, h and B are always filled
    where any patch covers the point.
    """
    pts = np.asarray(points, dtype=float)
    out = {
        "eta": np.full(pts.shape[0], np.nan),
        "h": np.full(pts.shape[0], np.nan),
        "B": np.full(pts.shape[0], np.nan),
        "level": np.zeros(pts.shape[0], dtype=np.int64),
    }
    for p in patches:
        x0 = p.origin[0] + p.i_lo * p.dx
        y0 = p.origin[1] + p.j_lo * p.dy
        ix = np.floor((pts[:, 0] - x0) / p.dx).astype(np.int64)
        iy = np.floor((pts[:, 1] - y0) / p.dy).astype(np.int64)
        inside = ((ix >= 0) & (ix < p.mx) & (iy >= 0) & (iy < p.my)
                  & (p.level >= out["level"]))
        if not inside.any():
            continue
        h = p.h[NGHOST + ix[inside], NGHOST + iy[inside]]
        b = p.B[NGHOST + ix[inside], NGHOST + iy[inside]]
        out["eta"][inside] = np.where(h < dry_tolerance, np.nan, h + b)
        out["h"][inside] = h
        out["B"][inside] = b
        out["level"][inside] = p.level
    return out
