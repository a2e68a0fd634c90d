"""Independent sympy oracles evaluated on the grid."""

from functools import lru_cache

import numpy as np
import sympy as sp

X = sp.symbols("x y z", real=True)
PAIRS = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
TWO_PI = 2 * sp.pi


def phi_expr():
    x, y, z = X
    return sp.Rational(1, 100) * sp.sin(TWO_PI * x) + sp.Rational(1, 50) * sp.cos(TWO_PI * y) * sp.sin(TWO_PI * z)


def general_metric_expr():
    """A non-diagonal, non-conformal periodic metric."""
    x, y, z = X
    e = sp.Rational(1, 20)
    return sp.Matrix(
        [
            [1 + e * sp.sin(TWO_PI * x), e * sp.cos(TWO_PI * (y + z)), 0],
            [e * sp.cos(TWO_PI * (y + z)), 1 + e * sp.cos(TWO_PI * x) * sp.sin(TWO_PI * y), e * sp.sin(TWO_PI * z)],
            [0, e * sp.sin(TWO_PI * z), 1 - e * sp.sin(TWO_PI * (x + y))],
        ]
    )


def inverse(g):
    # adjugate over determinant: avoids the slow simplifying inverse
    return g.adjugate() / g.det(method="berkowitz")


def christoffel_expr(g):
    gi = inverse(g)
    return [
        [
            [
                sp.Rational(1, 2) * sum(
                    gi[c, d] * (sp.diff(g[d, b], X[a]) + sp.diff(g[d, a], X[b]) - sp.diff(g[a, b], X[d]))
                    for d in range(3)
                )
                for b in range(3)
            ]
            for a in range(3)
        ]
        for c in range(3)
    ]


def ricci_expr(g):
    gam = christoffel_expr(g)
    ric = sp.zeros(3, 3)
    for i in range(3):
        for j in range(3):
            r = 0
            for c in range(3):
                r += sp.diff(gam[c][i][j], X[c]) - sp.diff(gam[c][c][j], X[i])
                for d in range(3):
                    r += gam[c][c][d] * gam[d][i][j] - gam[c][i][d] * gam[d][c][j]
            ric[i, j] = r
    return ric


def momentum_expr(g, k):
    gi = inverse(g)
    gam = christoffel_expr(g)

    def cov(a, i, j):
        return sp.diff(k[i, j], X[a]) - sum(gam[c][a][i] * k[c, j] + gam[c][a][j] * k[i, c] for c in range(3))

    trk = sum(gi[a, b] * k[a, b] for a in range(3) for b in range(3))
    return [
        sum(gi[j, a] * cov(a, i, j) for j in range(3) for a in range(3)) - sp.diff(trk, X[i]) for i in range(3)
    ]


def evaluate(expr, grid):
    x, y, z = grid.mesh()
    f = sp.lambdify(X, expr, "numpy", cse=True)
    return np.broadcast_to(np.asarray(f(x, y, z), dtype=np.float64), grid.shape).copy()


def sym_field(mat, grid):
    return np.stack([evaluate(mat[a, b], grid) for a, b in PAIRS])


@lru_cache(maxsize=None)
def conformal():
    phi = phi_expr()
    g = sp.exp(2 * phi) * sp.eye(3)
    return phi, g


@lru_cache(maxsize=None)
def conformal_scalar_curvature():
    phi, _ = conformal()
    lap = sum(sp.diff(phi, v, 2) for v in X)
    grad2 = sum(sp.diff(phi, v) ** 2 for v in X)
    return sp.exp(-2 * phi) * (-4 * lap - 2 * grad2)


@lru_cache(maxsize=None)
def general():
    g = general_metric_expr()
    return g, christoffel_expr(g), ricci_expr(g)
