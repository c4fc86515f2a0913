"""Rotations of R^3 as a Lie-Rinehart algebra: axioms, flows and leaves.

Run with ``python demos/so3_walkthrough.py``.
"""

import math

import numpy as np
from _fixtures import fixture_path

from lrkit.expr import parse_expr
from lrkit.fileformat import load_structure
from lrkit.flows import (
    IntegratorConfig,
    adjoint_flow_at_point,
    adjoint_property_report,
    flow_point,
    leaf_dimension,
    leaf_sample,
    same_leaf,
    time_section,
)
from lrkit.presentation import anchor_of, verify_presentation


def main():
    P = load_structure(fixture_path("so3.lrs"))
    report = verify_presentation(P)
    print(f"axioms hold: {report.ok}, residuals per family: {report.data['families']}")

    broken = verify_presentation(load_structure(fixture_path("so3_broken.lrs")))
    first = broken.failures()[0]
    print(f"broken bracket caught in family {first.family!r} at point {np.round(first.point, 3).tolist()}")

    cfg = IntegratorConfig(step=1e-3)
    e3 = time_section(P, ["0", "0", "1"])
    end = flow_point(anchor_of(P, P.gen("e3")), [1, 0, 0], math.pi / 2, cfg)
    print(f"rotating (1,0,0) by a quarter turn about the z axis: {np.round(end, 9).tolist()}")

    _, coeffs = adjoint_flow_at_point(e3, P.gen("e1"), [1, 0, 0], math.pi / 2, cfg)
    print(f"e1 transported along the same flow: {np.round(coeffs, 9).tolist()} in the basis e1, e2, e3")
    props = adjoint_property_report(e3, P.gen("e1"), P.gen("e2"), parse_expr("x", P.chart), [1, 0, 0], 1.0, cfg)
    print(f"transport respects anchor, bracket and module structure: {props.ok}")

    cloud = leaf_sample(P, [1, 0, 0], 200, seed=3)
    radii = np.linalg.norm(np.array(cloud.points), axis=1)
    print(f"200 leaf samples from (1,0,0) have radius in [{radii.min():.9f}, {radii.max():.9f}]")
    print(f"leaf dimension at (1,0,0): {leaf_dimension(P, [1, 0, 0])}, at the origin: {leaf_dimension(P, [0, 0, 0])}")
    print(f"(1,0,0) and (0,0,1): {same_leaf(P, [1, 0, 0], [0, 0, 1], tol=1e-4).verdict}")
    print(f"(1,0,0) and (2,0,0): {same_leaf(P, [1, 0, 0], [2, 0, 0], tol=1e-4).verdict}")


if __name__ == "__main__":
    main()
