"""Quadrature rules on triangles (barycentric) and on edges.

Weights are normalised to sum to one; multiply by the element area (or the
edge length) to integrate.
"""

from collections import namedtuple

import numpy as np

Rule = namedtuple("Rule", ["points", "weights", "degree"])


def _sym3(a, w):
    b = 1.0 - 2.0 * a
    pts = [(a, a, b), (a, b, a), (b, a, a)]
    return pts, [w] * 3


def _edge_midpoints():
    pts = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
    return Rule(pts, np.full(3, 1.0 / 3.0), 2)


def _dunavant4():
    p1, w1 = _sym3(0.445948490915965, 0.223381589678011)
    p2, w2 = _sym3(0.091576213509771, 0.109951743655322)
    return Rule(np.array(p1 + p2), np.array(w1 + w2), 4)


def _dunavant5():
    p1, w1 = _sym3(0.470142064105115, 0.132394152788506)
    p2, w2 = _sym3(0.101286507323456, 0.125939180544827)
    pts = [(1 / 3, 1 / 3, 1 / 3)] + p1 + p2
    return Rule(np.array(pts), np.array([0.225] + w1 + w2), 5)


MIDPOINT = _edge_midpoints()
DEGREE4 = _dunavant4()
DEGREE5 = _dunavant5()

# two-point Gauss on the unit interval: (parameters, weights)
GAUSS2 = Rule(np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]), np.array([0.5, 0.5]), 3)


def map_points(corners, rule):
    """Physical quadrature points for every element.

    ``corners`` has shape (nt, 3, 2); returns x, y of shape (nt, nq).
    """
    xy = np.einsum("qi,tid->tqd", rule.points, corners)
    return xy[..., 0], xy[..., 1]
