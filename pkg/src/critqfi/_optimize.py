"""Golden-section search used by every scalar extremum search in the package."""

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_min(f, a, b, tol=1e-10, max_iter=500):
    """Minimize a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))`` with the final bracket narrower than ``tol``.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    n = min(max_iter, int(math.ceil(math.log(tol / h) / math.log(INV_PHI))))
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(n):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= INV_PHI
            d = a + INV_PHI * h
            yd = f(d)
    if yc < yd:
        return c, yc
    return d, yd


def golden_section_max(f, a, b, tol=1e-10, max_iter=500):
    x, y = golden_section_min(lambda t: -f(t), a, b, tol=tol, max_iter=max_iter)
    return x, -y


def grid_then_golden_max(f, a, b, n_grid=200, tol=1e-10, vectorized=None):
    """Coarse grid scan followed by golden-section refinement around the best node.

    Returns ``(x, f(x), edge)`` where ``edge`` is True when the best grid node
    is an endpoint of ``[a, b]`` (the caller decides whether that is an error).
    """
    xs = [a + (b - a) * i / n_grid for i in range(n_grid + 1)]
    if vectorized is not None:
        ys = list(vectorized(xs))
    else:
        ys = [f(x) for x in xs]
    finite = [(y, i) for i, y in enumerate(ys) if not math.isnan(y)]
    if not finite:
        return math.nan, math.nan, True
    ybest, ibest = max(finite)
    if ibest == 0 or ibest == n_grid:
        return xs[ibest], ybest, True
    x, y = golden_section_max(f, xs[ibest - 1], xs[ibest + 1], tol=tol)
    if y < ybest:
        x, y = xs[ibest], ybest
    return x, y, False
