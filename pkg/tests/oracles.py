"""Slow, obviously-correct reference implementations used by the tests."""

from fractions import Fraction


def point_in_polygon(px, py, polygon):
    """
    Crossing-number test with the library's half-open conventions: an edge
    counts when it straddles ``py`` (top inclusive) and crosses at x <= px.
    """
    inside = False
    n = len(polygon)
    for i in range(n):
        xa, ya = polygon[i]
        xb, yb = polygon[i - 1]
        if (ya >= py) != (yb >= py):
            x_cross = xa + (py - ya) * (xb - xa) / (yb - ya)
            if x_cross <= px:
                inside = not inside
    return inside


def ndvi(nir, red):
    s = nir + red
    if s == 0:
        return None
    v = (nir - red) / s
    return v if -1.0 <= v <= 1.0 else None


def ndwi(green, nir):
    s = green + nir
    if s == 0:
        return None
    v = (green - nir) / s
    return v if -1.0 <= v <= 1.0 else None


def evi(nir, red, blue):
    d = nir + 6.0 * red - 7.5 * blue + 1.0
    if abs(d) < 1e-6:
        return None
    return 2.5 * (nir - red) / d


def is_flood(ndwi_value, ndvi_value, ndwi_t=0.15, ndvi_t=0.2, comparator="less"):
    if ndwi_value is None or ndvi_value is None:
        return False
    if ndwi_value != ndwi_value or ndvi_value != ndvi_value:  # NaN
        return False
    water_test = ndwi_value < ndwi_t if comparator == "less" else ndwi_value >= ndwi_t
    return water_test and ndvi_value < ndvi_t


def weighted_gini(labels_left, labels_right, n_classes):
    n = len(labels_left) + len(labels_right)
    total = Fraction(0)
    for side in (labels_left, labels_right):
        m = len(side)
        g = Fraction(1)
        for c in range(n_classes):
            p = Fraction(side.count(c), m)
            g -= p * p
        total += Fraction(m, n) * g
    return total


def exhaustive_best_split(X, y, n_classes, features, min_leaf=1):
    """Lowest weighted Gini over every feature and midpoint; ties -> lowest feature, then threshold."""
    best = None
    for f in sorted(features):
        values = sorted(set(row[f] for row in X))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2.0
            left = [y[i] for i in range(len(X)) if X[i][f] <= thr]
            right = [y[i] for i in range(len(X)) if X[i][f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            g = weighted_gini(left, right, n_classes)
            if best is None or g < best[2]:
                best = (f, thr, g)
    return best


def scores(cm):
    """Macro accuracy/precision/recall/F1 from a list-of-lists confusion matrix, in Fractions."""
    k = len(cm)
    total = sum(sum(r) for r in cm)
    acc = Fraction(sum(cm[i][i] for i in range(k)), total)
    ps, rs, fs = [], [], []
    for c in range(k):
        tp = cm[c][c]
        pred = sum(cm[r][c] for r in range(k))
        act = sum(cm[c])
        p = Fraction(tp, pred) if pred else Fraction(0)
        r = Fraction(tp, act) if act else Fraction(0)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        ps.append(p)
        rs.append(r)
        fs.append(f)
    return acc, sum(ps) / k, sum(rs) / k, sum(fs) / k
