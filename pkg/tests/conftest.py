import cmath
import math

import numpy as np
import pytest


def stereo(z):
    """Independent stereographic projection (north pole = infinity)."""
    if z == complex("inf") or abs(z) == math.inf:
        return np.array([0.0, 0.0, 1.0])
    d = 1 + abs(z) ** 2
    return np.array([2 * z.real / d, 2 * z.imag / d, (abs(z) ** 2 - 1) / d])


def inv_stereo(p):
    if p[2] > 1 - 1e-15:
        return complex("inf")
    return complex(p[0], p[1]) / (1 - p[2])


def haar_su2(rng):
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    a, b = complex(v[0], v[1]), complex(v[2], v[3])
    return np.array([[a, -b.conjugate()], [b, a.conjugate()]])


def random_conjugator(rng, kmax=2.0):
    k = rng.uniform(1.0, kmax)
    return haar_su2(rng) @ np.diag([k, 1 / k]) @ haar_su2(rng)


def mobius_fixed_points(M):
    """Fixed points of z -> (az+b)/(cz+d) from the coefficients, as sphere points."""
    (a, b), (c, d) = M
    if abs(c) < 1e-14:
        pts = [complex("inf")]
        if abs(a - d) > 1e-14:
            pts.append(b / (d - a))
        return [stereo(z) for z in pts]
    disc = cmath.sqrt((a - d) ** 2 + 4 * b * c)
    return [stereo(((a - d) + s * disc) / (2 * c)) for s in (1, -1)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion


_criteria = {}


def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, title = m.args
    entry = _criteria.setdefault(n, {"title": title, "ok": True, "detail": ""})
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry["ok"] = False
    if call.when == "call":
        entry["detail"] = "; ".join(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        line = f"criterion {n:2d} {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        if e["detail"]:
            line += f"  [{e['detail']}]"
        terminalreporter.write_line(line)
