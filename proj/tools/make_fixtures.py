#!/usr/bin/env python3
"""Regenerates the bundled plane-graph fixtures and noisy curves under data/.

Output is deterministic (fixed seed, fixed float formatting)."""

import json
import math
import pathlib

import numpy as np

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def dense(fn, n):
    return [fn(t) for t in np.linspace(0.0, 1.0, n)]


def line(a, b, n=41):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return dense(lambda t: (1 - t) * a + t * b, n)


def bumped(a, b, amp, n=41):
    """Straight segment with a sine bump of relative height `amp` to its left."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = b - a
    nrm = np.array([-d[1], d[0]])
    return dense(lambda t: a + t * d + amp * math.sin(math.pi * t) * nrm, n)


def arc(c, r, th0, th1, n=41):
    c = np.asarray(c, float)
    return dense(lambda t: c + r * np.array([math.cos(th0 + t * (th1 - th0)), math.sin(th0 + t * (th1 - th0))]), n)


def polyline(pts, per_unit=40):
    out = [np.asarray(pts[0], float)]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(3, int(round(per_unit * np.linalg.norm(np.subtract(b, a)))) + 1)
        out += line(a, b, n)[1:]
    return out


class Graph:
    def __init__(self):
        self.vertices, self.edges, self.faces = [], [], []

    def vertex(self, p):
        self.vertices.append([float(p[0]), float(p[1])])
        return len(self.vertices) - 1

    def edge(self, v0, v1, pts):
        pts = [list(map(float, p)) for p in pts]
        pts[0], pts[-1] = self.vertices[v0], self.vertices[v1]
        self.edges.append({"v": [v0, v1], "points": pts})
        return len(self.edges)  # 1-based id

    def face(self, ids):
        self.faces.append(ids)

    def save(self, name):
        DATA.mkdir(exist_ok=True)
        j = {"vertices": self.vertices, "edges": self.edges, "faces": self.faces}
        (DATA / f"{name}.json").write_text(json.dumps(j, indent=None, separators=(",", ":")) + "\n")


def polygon_face(name, corners, make_edge=None):
    g = Graph()
    vs = [g.vertex(c) for c in corners]
    ids = []
    for i, v in enumerate(vs):
        w = vs[(i + 1) % len(vs)]
        pts = make_edge(i, corners[i], corners[(i + 1) % len(vs)]) if make_edge else line(corners[i], corners[(i + 1) % len(vs)])
        ids.append(g.edge(v, w, pts))
    g.face(ids)
    g.save(name)


def unit_square():
    polygon_face("unit_square", [(0, 0), (1, 0), (1, 1), (0, 1)])


def disc():
    g = Graph()
    vs = [g.vertex((math.cos(k * math.pi / 2), math.sin(k * math.pi / 2))) for k in range(4)]
    ids = [g.edge(vs[k], vs[(k + 1) % 4], arc((0, 0), 1, k * math.pi / 2, (k + 1) * math.pi / 2, 61)) for k in range(4)]
    g.face(ids)
    g.save("disc")


def teardrop():
    # cubic Bezier loop with a right-angle corner at the origin, traversed CCW
    P = [np.array(p, float) for p in [(0, 0), (3, -3), (3, 3), (0, 0)]]

    def bez(t):
        s = 1 - t
        return s**3 * P[0] + 3 * s * s * t * P[1] + 3 * s * t * t * P[2] + t**3 * P[3]

    ts = [0.0, 0.25, 0.5, 0.75, 1.0]
    g = Graph()
    vs = [g.vertex(bez(t)) for t in ts[:4]]
    ids = []
    for k in range(4):
        pts = [bez(t) for t in np.linspace(ts[k], ts[k + 1], 61)]
        ids.append(g.edge(vs[k], vs[(k + 1) % 4], pts))
    g.face(ids)
    g.save("teardrop")


def halfdisc():
    g = Graph()
    a, b = g.vertex((-1, 0)), g.vertex((1, 0))
    c = g.vertex((math.cos(math.pi / 3), math.sin(math.pi / 3)))
    d = g.vertex((math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)))
    ids = [
        g.edge(a, b, line((-1, 0), (1, 0), 61)),
        g.edge(b, c, arc((0, 0), 1, 0, math.pi / 3)),
        g.edge(c, d, arc((0, 0), 1, math.pi / 3, 2 * math.pi / 3)),
        g.edge(d, a, arc((0, 0), 1, 2 * math.pi / 3, math.pi)),
    ]
    g.face(ids)
    g.save("halfdisc")


def lens(name, per_arc):
    # two circular arcs through (-1, 0) and (1, 0), each split into `per_arc` edges
    c = 0.5
    r = math.hypot(1, c)
    g = Graph()
    left, right = g.vertex((-1, 0)), g.vertex((1, 0))
    # lower arc: circle centred at (0, c), left to right
    l0, l1 = math.atan2(-c, -1), math.atan2(-c, 1)
    l0 = l0 if l0 < l1 else l0 - 2 * math.pi
    # upper arc: circle centred at (0, -c), right to left
    u0, u1 = math.atan2(c, 1), math.atan2(c, -1)
    ids = []
    for centre, t0, t1, start, end in [((0, c), l0, l1, left, right), ((0, -c), u0, u1, right, left)]:
        prev = start
        for k in range(per_arc):
            a0 = t0 + (t1 - t0) * k / per_arc
            a1 = t0 + (t1 - t0) * (k + 1) / per_arc
            nxt = end if k == per_arc - 1 else g.vertex(np.asarray(centre) + r * np.array([math.cos(a1), math.sin(a1)]))
            ids.append(g.edge(prev, nxt, arc(centre, r, a0, a1, 61)))
            prev = nxt
    g.face(ids)
    g.save(name)


def five_face():
    g = Graph()
    P = {
        0: (0, 0), 1: (2, 0), 2: (4, 0), 3: (4, 1.5), 4: (4, 3),
        5: (2, 3), 6: (0, 3), 7: (0, 1.5), 8: (2.1, 1.6), 9: (0, 0.75),
    }
    v = {k: g.vertex(p) for k, p in P.items()}
    E = {}

    def e(a, b, amp=0.0):
        E[(a, b)] = g.edge(v[a], v[b], bumped(P[a], P[b], amp) if amp else line(P[a], P[b]))

    e(0, 1); e(1, 2); e(2, 3); e(3, 4); e(4, 5); e(5, 6); e(6, 7); e(7, 9); e(9, 0)
    e(1, 8, 0.06); e(8, 7, 0.05); e(8, 3, -0.05); e(8, 5, 0.04); e(1, 3, 0.05)

    def f(*path):
        ids = []
        for a, b in zip(path[:-1], path[1:]):
            ids.append(E[(a, b)] if (a, b) in E else -E[(b, a)])
        g.face(ids)

    f(0, 1, 8, 7, 9, 0)  # pentagon
    f(1, 2, 3, 1)        # triangle
    f(1, 3, 8, 1)        # triangle
    f(7, 8, 5, 6, 7)     # quad
    f(8, 3, 4, 5, 8)     # quad
    g.save("five_face")


def lshape():
    g = Graph()
    corners = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
    vs = [g.vertex(c) for c in corners]
    g.face([g.edge(vs[i], vs[(i + 1) % 6], line(corners[i], corners[(i + 1) % 6], 61)) for i in range(6)])
    g.save("lshape")


def star():
    corners = []
    for k in range(6):
        r = 2.0 if k % 2 == 0 else 0.9
        th = math.pi / 2 + k * math.pi / 3
        corners.append((r * math.cos(th), r * math.sin(th)))
    polygon_face("star", corners, lambda i, a, b: line(a, b, 61))


def slit():
    g = Graph()
    A, B, C = g.vertex((0, 0)), g.vertex((4, 0)), g.vertex((2.05, 1))
    ids = [
        g.edge(A, B, polyline([(0, 0), (4, 0)])),
        g.edge(B, C, polyline([(4, 0), (4, 4), (2.05, 4), (2.05, 1)])),
        g.edge(C, A, polyline([(2.05, 1), (1.95, 1), (1.95, 4), (0, 4), (0, 0)])),
    ]
    g.face(ids)
    g.save("slit")


def horseshoe():
    g = Graph()
    a, b, c, d = g.vertex((1, 0)), g.vertex((2, 0)), g.vertex((-2, 0)), g.vertex((-1, 0))
    ids = [
        g.edge(a, b, line((1, 0), (2, 0))),
        g.edge(b, c, arc((0, 0), 2, 0, math.pi, 121)),
        g.edge(c, d, line((-2, 0), (-1, 0))),
        g.edge(d, a, arc((0, 0), 1, math.pi, 0, 81)),
    ]
    g.face(ids)
    g.save("horseshoe")


def noisy_curves():
    rng = np.random.default_rng(20240611)
    out = DATA / "curves"
    out.mkdir(parents=True, exist_ok=True)
    for k in range(10):
        n = 200 + 30 * k
        t = np.linspace(0, 1, n)
        a = 0.2 + 0.05 * k
        w = 1.0 + 0.3 * k
        x = 3 * t
        y = a * np.sin(2 * math.pi * w * t / 2) + 0.1 * np.cos(5 * t + k)
        pts = np.stack([x, y], axis=1)
        length = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
        noise = rng.normal(scale=1e-4 * length, size=pts.shape)
        noise[0] = noise[-1] = 0
        pts = pts + noise
        (out / f"noisy_{k:02d}.json").write_text(json.dumps({"points": pts.tolist()}) + "\n")


if __name__ == "__main__":
    unit_square()
    disc()
    teardrop()
    halfdisc()
    lens("lens", 2)
    lens("lens_ir", 3)
    five_face()
    lshape()
    star()
    slit()
    horseshoe()
    noisy_curves()
