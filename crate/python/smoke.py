"""Smoke test for the pychyper extension.

    pip install --no-build-isolation -e crates/python
    python3 python/smoke.py
"""

import math

import pychyper as ch


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    m = ch.ModelSpace(3, -4.0)
    b, z = [1.0] + [0.0] * 5, [0.0, 1.0] + [0.0] * 4
    assert m.bracket(b, z) == [0.0, 2.0, 0.0, 0.0, 0.0, 0.0]
    assert m.j(b) == z
    assert close(m.sectional_curvature(b, z), -4.0, 1e-12)
    report = m.verify_curvature(seed=3, samples=50)
    assert report["max_residual"] < 1e-10, report

    w = ch.Submanifold(3, 2, c=-4.0, phi=math.pi / 3)
    assert len(w.tangent) == 4 and len(w.normal) == 2
    assert w.closure_residual() < 1e-12
    assert w.rigidity()["pass"]

    l1, l2, b1sq, b2sq = ch.catalog_values(0.5, -4.0)
    assert l1 < l2 and close(b1sq + b2sq, 1.0, 1e-12)
    r_star = ch.special_radius(-4.0)
    assert close(r_star, math.atanh(1 / math.sqrt(3)), 1e-12)

    tube = ch.Submanifold(3, 2).tube(0.7)
    result = tube.classify()
    assert result["model"] == "tube" and result["g"] == 4, result
    again = ch.Germ.from_json(tube.to_json())
    assert again.shape == tube.shape

    scan = ch.nonexistence_scan(1.0, grid=200)
    assert scan["feasible"] == 0 and scan["certificate"]

    csv = ch.sweep_csv(3, 2, rows=5)
    assert csv.splitlines()[0].startswith("r,lambda1")
    assert len(csv.strip().splitlines()) == 6

    try:
        ch.Submanifold(3, 3)
    except ValueError:
        pass
    else:
        raise AssertionError("k = n accepted")

    print("pychyper smoke test ok")


if __name__ == "__main__":
    main()
