"""Exhaustive CART oracle in exact rational arithmetic.

Independent of the package's vectorised split search: every feature and
every midpoint is tried with Fraction-valued weighted Gini, and trees are
compared as nested tuples.
"""

from fractions import Fraction

from sigmove.forest import LEAF, Tree


def exact_gini(labels):
    n = len(labels)
    q = Fraction(sum(labels), n)
    return 1 - q * q - (1 - q) * (1 - q)


def oracle_tree(X, y, idx, max_depth=None, depth=0):
    """Nested-tuple CART: ``("leaf", fraction)`` or ``("split", f, t, left, right)``.

    Tries every feature and every midpoint between consecutive distinct
    values, scoring children by exact weighted Gini; keeps the first best
    in (feature, threshold) order.
    """
    labels = [int(y[i]) for i in idx]
    frac = Fraction(sum(labels), len(labels))
    if frac in (0, 1) or len(idx) < 2 or (max_depth is not None and depth >= max_depth):
        return ("leaf", frac)
    parent = exact_gini(labels)
    best = None
    for f in range(X.shape[1]):
        values = sorted({X[i, f] for i in idx})
        for lo, hi in zip(values, values[1:]):
            t = (lo + hi) / 2.0
            left = [i for i in idx if X[i, f] <= t]
            right = [i for i in idx if X[i, f] > t]
            child = (len(left) * exact_gini([int(y[i]) for i in left])
                     + len(right) * exact_gini([int(y[i]) for i in right])) / len(idx)
            gain = parent - child
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, f, t, left, right)
    if best is None:
        return ("leaf", frac)
    _, f, t, left, right = best
    return ("split", f, t, oracle_tree(X, y, left, max_depth, depth + 1),
            oracle_tree(X, y, right, max_depth, depth + 1))


def as_nested(tree: Tree, node=0):
    if tree.feature[node] == LEAF:
        return ("leaf", tree.value[node])
    return ("split", int(tree.feature[node]), float(tree.threshold[node]),
            as_nested(tree, int(tree.left[node])), as_nested(tree, int(tree.right[node])))


def same_tree(a, b):
    if a[0] != b[0]:
        return False
    if a[0] == "leaf":
        return abs(float(a[1]) - float(b[1])) < 1e-12
    return a[1] == b[1] and a[2] == b[2] and same_tree(a[3], b[3]) and same_tree(a[4], b[4])
