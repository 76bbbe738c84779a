"""Gauss quadrature rules used by assembly and the error estimator.

Triangle rule: 6-point rule, exact for polynomials up to degree 4.
Square rule: 3x3 tensor Gauss-Legendre, exact up to degree 5 per axis.
Points are given in reference coordinates; callers map them to physical
cells and scale the weights by the cell measure.
"""
import numpy as np

# Degree-4 triangle rule (barycentric symmetric form, weights sum to 1).
_A1 = 0.445948490915965
_A2 = 0.091576213509771
_W1 = 0.223381589678011
_W2 = 0.109951743655322

#: (6, 3) barycentric coordinates of the quadrature points.
TRI_BARY = np.array(
    [
        [1.0 - 2.0 * _A1, _A1, _A1],
        [_A1, 1.0 - 2.0 * _A1, _A1],
        [_A1, _A1, 1.0 - 2.0 * _A1],
        [1.0 - 2.0 * _A2, _A2, _A2],
        [_A2, _A2, 1.0 - 2.0 * _A2],
        [_A2, 1.0 - 2.0 * _A2, _A2],
    ]
)

#: (6,) weights, normalized to unit triangle area.
TRI_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])


def tri_points(vertices):
    """Quadrature points of the degree-4 rule on one or more triangles.

    vertices: (..., 3, 2) array of triangle corners.
    Returns (..., 6, 2) physical coordinates.
    """
    v = np.asarray(vertices, dtype=float)
    return np.einsum("qk,...kd->...qd", TRI_BARY, v)


# 3-point Gauss-Legendre on [0, 1].
_G = 0.5 * np.sqrt(3.0 / 5.0)
GL3_POINTS = np.array([0.5 - _G, 0.5, 0.5 + _G])
GL3_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

#: (9, 2) tensor-product points on the unit square, with (9,) weights.
SQ_POINTS = np.array([(x, y) for y in GL3_POINTS for x in GL3_POINTS])
SQ_WEIGHTS = np.array([wy * wx for wy in GL3_WEIGHTS for wx in GL3_WEIGHTS])

# 2-point Gauss-Legendre on [0, 1] (exact for cubics; enough for products
# of bilinear functions).
_G2 = 0.5 / np.sqrt(3.0)
GL2_POINTS = np.array([0.5 - _G2, 0.5 + _G2])
GL2_WEIGHTS = np.array([0.5, 0.5])
