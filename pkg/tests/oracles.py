"""Independent reference implementations used by the test-suite only.

Everything here is deliberately written in the most literal way possible
(scalar loops, textbook formulas) and shares no code with the package.
"""

import math

import numpy as np


def dense_matvec(A_dense, x):
    """Row-by-row matvec accumulating columns in ascending order."""
    n, m = A_dense.shape
    y = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            if A_dense[i, j] != 0.0:
                acc += A_dense[i, j] * x[j]
        y[i] = acc
    return y


def thomas(lower, diag, upper, rhs):
    """Tridiagonal solve by forward elimination / back substitution.

    lower[i] multiplies x[i-1] in row i (lower[0] unused); upper[i]
    multiplies x[i+1] (upper[-1] unused).
    """
    n = len(diag)
    c = np.array(upper, dtype=float)
    d = np.array(diag, dtype=float)
    b = np.array(rhs, dtype=float)
    for i in range(1, n):
        w = lower[i] / d[i - 1]
        d[i] -= w * c[i - 1]
        b[i] -= w * b[i - 1]
    x = np.zeros(n)
    x[-1] = b[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (b[i] - c[i] * x[i + 1]) / d[i]
    return x


# ---------------------------------------------------------------------------
# exact shallow-water Riemann solution (Stoker-type, flat bottom)
# ---------------------------------------------------------------------------

def _phi(h, hk, g):
    """Velocity change across the wave connecting depth hk to depth h."""
    if h > hk:  # shock: Rankine-Hugoniot
        return (h - hk) * math.sqrt(0.5 * g * (h + hk) / (h * hk))
    # rarefaction: Riemann invariant
    return 2.0 * (math.sqrt(g * h) - math.sqrt(g * hk))


def exact_riemann_middle(hL, uL, hR, uR, g=9.81):
    """Middle-state depth and velocity of the exact Riemann solution."""
    if hL <= 0.0 and hR <= 0.0:
        return 0.0, 0.0
    if hR <= 0.0:  # front advancing into dry bed on the right
        return 0.0, uL + 2.0 * math.sqrt(g * hL)
    if hL <= 0.0:
        return 0.0, uR - 2.0 * math.sqrt(g * hR)
    # dry generation check
    if uR - uL >= 2.0 * (math.sqrt(g * hL) + math.sqrt(g * hR)):
        return 0.0, 0.0
    h = 0.5 * (hL + hR)
    for _ in range(100):
        f = _phi(h, hL, g) + _phi(h, hR, g) + uR - uL
        # numerical derivative (robust; accuracy is ample for the tests)
        dh = max(1e-9 * h, 1e-12)
        fp = (_phi(h + dh, hL, g) + _phi(h + dh, hR, g) - _phi(h - dh, hL, g)
              - _phi(h - dh, hR, g)) / (2.0 * dh)
        step = f / fp
        hn = h - step
        if hn <= 0.0:
            hn = 0.5 * h
        if abs(hn - h) <= 1e-14 * max(1.0, h):
            h = hn
            break
        h = hn
    u = 0.5 * (uL + uR) + 0.5 * (_phi(h, hR, g) - _phi(h, hL, g))
    return h, u


def _left_fan(uL, cL, xi, g):
    c = (uL + 2.0 * cL - xi) / 3.0
    return c * c / g, xi + c


def _right_fan(uR, cR, xi, g):
    c = (xi - uR + 2.0 * cR) / 3.0
    return c * c / g, xi - c


def exact_riemann_sample(hL, uL, hR, uR, xi, g=9.81):
    """Sample the exact Riemann solution at similarity coordinate xi = x/t."""
    cL = math.sqrt(g * hL) if hL > 0 else 0.0
    cR = math.sqrt(g * hR) if hR > 0 else 0.0
    if hL <= 0.0 and hR <= 0.0:
        return 0.0, 0.0
    if hR <= 0.0:  # rarefaction onto a dry bed
        if xi < uL - cL:
            return hL, uL
        if xi < uL + 2.0 * cL:
            return _left_fan(uL, cL, xi, g)
        return 0.0, 0.0
    if hL <= 0.0:
        if xi > uR + cR:
            return hR, uR
        if xi > uR - 2.0 * cR:
            return _right_fan(uR, cR, xi, g)
        return 0.0, 0.0
    if uR - uL >= 2.0 * (cL + cR):  # two fans separating, dry in between
        if xi < uL - cL:
            return hL, uL
        if xi < uL + 2.0 * cL:
            return _left_fan(uL, cL, xi, g)
        if xi > uR + cR:
            return hR, uR
        if xi > uR - 2.0 * cR:
            return _right_fan(uR, cR, xi, g)
        return 0.0, 0.0
    hm, um = exact_riemann_middle(hL, uL, hR, uR, g)
    cm = math.sqrt(g * hm) if hm > 0 else 0.0
    # left wave
    if hm > hL:  # shock
        sL = (hm * um - hL * uL) / (hm - hL)
        if xi < sL:
            return hL, uL
        left_done = True
    else:
        head = uL - cL
        tail = um - cm
        if xi < head:
            return hL, uL
        if xi < tail:
            # inside the left rarefaction: u - 2c = uL - 2cL and u - c = xi
            return _left_fan(uL, cL, xi, g)
    # right wave
    if hm > hR:  # shock
        sR = (hm * um - hR * uR) / (hm - hR)
        if xi > sR:
            return hR, uR
    else:
        head = uR + cR
        tail = um + cm
        if xi > head:
            return hR, uR
        if xi > tail:
            return _right_fan(uR, cR, xi, g)
    return hm, um
