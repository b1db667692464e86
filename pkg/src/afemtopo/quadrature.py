"""Fixed quadrature rules on the reference triangle and on edges.

Triangle rules are stored in barycentric coordinates with weights summing
to one, so that ``sum(w * f(x)) * area`` integrates ``f`` over a triangle.
"""
import numpy as np


def _sym3(a, b):
    return [(a, b, b), (b, a, b), (b, b, a)]


def _sym6(a, b, c):
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _rule(groups):
    pts, wts = [], []
    for w, p in groups:
        pts.extend(p)
        wts.extend([w] * len(p))
    return np.array(pts), np.array(wts)


#: 6-point rule, exact for polynomials of degree 4
TRI_ORDER4 = _rule([
    (0.223381589678011, _sym3(0.108103018168070, 0.445948490915965)),
    (0.109951743655322, _sym3(0.816847572980459, 0.091576213509771)),
])

#: 12-point rule, exact for polynomials of degree 6
TRI_ORDER6 = _rule([
    (0.116786275726379, _sym3(0.501426509658179, 0.249286745170910)),
    (0.050844906370207, _sym3(0.873821971016996, 0.063089014491502)),
    (0.082851075618374, _sym6(0.053145049844817, 0.310352451033784, 0.636502499121399)),
])


def gauss_edge(n=3):
    """Gauss-Legendre points on [0, 1] and weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


#: 3-point Gauss rule on an edge, exact to degree 5
EDGE_GAUSS3 = gauss_edge(3)


def tri_points(vertices, elements, rule=TRI_ORDER4):
    """Physical quadrature points, shape (n_elements, n_points, 2)."""
    bary, _ = rule
    corners = vertices[elements]  # (nT, 3, 2)
    return np.einsum("qi,tid->tqd", bary, corners)


def edge_points(vertices, edges, rule=EDGE_GAUSS3):
    """Physical quadrature points on edges, shape (n_edges, n_points, 2)."""
    s, _ = rule
    a = vertices[edges[:, 0]]
    b = vertices[edges[:, 1]]
    return a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
