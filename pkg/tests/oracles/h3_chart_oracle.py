"""Curvature of left-invariant metrics from explicit coordinate charts.

Christoffel symbols of the coordinate metric are computed symbolically, the
Riemann tensor is evaluated at one point and projected on the orthonormal
frame.  Nil and Sol have global charts; SU(2) and SL(2,R) use Milnor's
closed-form principal Ricci curvatures.  Run as a script to refresh
``h3_chart.json``.
"""

import itertools
import json
from pathlib import Path

import sympy as sp

x, y, z = sp.symbols("x y z", real=True)
X = (x, y, z)
POINT = {x: sp.Rational(3, 10), y: sp.Rational(-1, 5), z: sp.Rational(2, 5)}


def chart(kind, a, b, c):
    """Coordinate metric and orthonormal frame vectors for ``a e1*^2 + b e2*^2 + c e3*^2``."""
    if kind == "nil":  # [e1, e2] = e3
        cof = [sp.Matrix([1, 0, 0]), sp.Matrix([0, 1, 0]), sp.Matrix([0, -x, 1])]
        vec = [sp.Matrix([1, 0, 0]), sp.Matrix([0, 1, x]), sp.Matrix([0, 0, 1])]
    elif kind == "sol":  # [e2, e3] = e1, [e3, e1] = -e2
        ez, emz = sp.exp(z), sp.exp(-z)
        cof = [sp.Matrix([emz, ez, 0]) / 2, sp.Matrix([-emz, ez, 0]) / 2, sp.Matrix([0, 0, 1])]
        vec = [sp.Matrix([ez, emz, 0]), sp.Matrix([-ez, emz, 0]), sp.Matrix([0, 0, 1])]
    else:
        raise ValueError(kind)
    coeffs = (a, b, c)
    G = sp.zeros(3, 3)
    for w, th in zip(coeffs, cof):
        G += w * th * th.T
    frame = [v / sp.sqrt(w) for v, w in zip(vec, coeffs)]
    return G, frame


def curvature_at_point(G, frame):
    Ginv = G.inv()
    Gam = [[[sp.simplify(sum(Ginv[k, l] * (sp.diff(G[l, i], X[j]) + sp.diff(G[l, j], X[i]) - sp.diff(G[i, j], X[l]))
                             for l in range(3)) / 2) for j in range(3)] for i in range(3)] for k in range(3)]

    # R^l_{ijk} with R(d_i, d_j) d_k = R^l_{ijk} d_l
    def Rup(l, i, j, k):
        expr = sp.diff(Gam[l][j][k], X[i]) - sp.diff(Gam[l][i][k], X[j])
        expr += sum(Gam[l][i][m] * Gam[m][j][k] - Gam[l][j][m] * Gam[m][i][k] for m in range(3))
        return expr

    Gp = G.subs(POINT)
    Rnum = {}
    for l, i, j, k in itertools.product(range(3), repeat=4):
        Rnum[l, i, j, k] = sp.N(Rup(l, i, j, k).subs(POINT), 30)
    # lower: R_{ijkm} = <R(d_i, d_j) d_k, d_m>
    Rlow = {(i, j, k, m): sum(Rnum[l, i, j, k] * Gp[l, m] for l in range(3))
            for i, j, k, m in itertools.product(range(3), repeat=4)}
    E = [sp.N(f.subs(POINT), 30) for f in frame]

    def frame_R(a, b, c, e):
        return sum(Rlow[i, j, k, m] * E[a][i] * E[b][j] * E[c][k] * E[e][m]
                   for i, j, k, m in itertools.product(range(3), repeat=4))

    Rf = {(a, b, c, e): frame_R(a, b, c, e) for a, b, c, e in itertools.product(range(3), repeat=4)}
    ric = [float(sum(Rf[i, j, k, i] for i in range(3))) for j, k in ((0, 0), (1, 1), (2, 2))]
    rm2 = [float(sum(Rf[i, k, l, m] ** 2 for k, l, m in itertools.product(range(3), repeat=3))) for i in range(3)]
    sec = {f"{a}{b}": float(Rf[a, b, b, a]) for a, b in ((0, 1), (0, 2), (1, 2))}
    return {"ric": ric, "rm2": rm2, "scalar": float(sum(ric)),
            "rm_norm2": float(sum(v**2 for v in Rf.values())), "sectional": sec}


def milnor_ricci(structure, coeffs):
    """Principal Ricci curvatures ``2 mu_j mu_k`` with ``mu_i = (nu_1+nu_2+nu_3)/2 - nu_i``."""
    a = [sp.Rational(v) for v in coeffs]
    lam = [sp.Rational(v) for v in structure]
    vol = sp.sqrt(a[0] * a[1] * a[2])
    nu = [lam[i] * a[i] / vol for i in range(3)]
    half = sum(nu) / 2
    mu = [half - v for v in nu]
    return [float(2 * mu[1] * mu[2]), float(2 * mu[2] * mu[0]), float(2 * mu[0] * mu[1])]


CHART_CASES = [
    ("nil", [0, 0, 1], [1, 1, 1]),
    ("nil", [0, 0, 1], ["3/2", "1/2", 2]),
    ("sol", [1, -1, 0], [1, 1, 1]),
    ("sol", [1, -1, 0], [2, "1/2", "3/4"]),
]
MILNOR_CASES = [
    ([2, 2, 2], [1, 1, 1]),
    ([2, 2, 2], [1, 1, "3/2"]),
    ([2, 2, 2], [1, "13/10", 2]),
    ([1, 1, -1], [1, 2, 3]),
    ([1, -1, 0], ["1/2", 3, 1]),
    ([0, 0, 1], [2, 1, "1/3"]),
]


def main():
    out = {"chart": [], "milnor": []}
    for kind, lam, abc in CHART_CASES:
        vals = [sp.Rational(v) for v in abc]
        G, frame = chart(kind, *vals)
        res = curvature_at_point(G, frame)
        out["chart"].append({"kind": kind, "structure": lam, "coeffs": [float(v) for v in vals], **res})
    for lam, abc in MILNOR_CASES:
        out["milnor"].append({"structure": lam, "coeffs": [float(sp.Rational(v)) for v in abc],
                              "ric": milnor_ricci(lam, abc)})
    path = Path(__file__).with_name("h3_chart.json")
    path.write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
