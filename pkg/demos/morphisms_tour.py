"""Maps between Lie-Rinehart algebras: morphisms, comorphisms and base change.

Run with ``python demos/morphisms_tour.py``.
"""

from _fixtures import fixture_path

from lrkit.expr import ZeroTestConfig
from lrkit.fileformat import load_map_file, print_structure
from lrkit.morphisms import (
    base_change_bracket,
    base_change_element,
    base_change_jacobi_report,
    base_map,
    check_lr_comorphism,
    check_lr_morphism,
    factor_comorphism,
    factor_morphism,
    lr_comorphism,
    lr_morphism,
)


def morphism_demo():
    mf = load_map_file(fixture_path("tangent_chain.lrm"), "morphism")
    A, B = mf.source, mf.target
    F = lr_morphism(A, B, base_map(A.chart, B.chart, mf.base), [mf.images[g] for g in A.gens])
    print(f"tangent map of t -> (t, t^2) is a morphism: {check_lr_morphism(F, A, B).ok}")
    fac = factor_morphism(F, A, B)
    for g, el in zip(A.gens, fac.elements):
        print(f"  {g} factors through the base change as {el}")
    print(f"  projecting back recovers the images: {fac.report.ok}")


def comorphism_demo():
    mf = load_map_file(fixture_path("so3_action.lrc"), "comorphism")
    A, B = mf.source, mf.target
    G = lr_comorphism(A, B, base_map(A.chart, B.chart, mf.base), [mf.images[g] for g in B.gens])
    print(f"rotation action of so(3) on R^3 is a comorphism: {check_lr_comorphism(G, A, B).ok}")
    fac = factor_comorphism(G, A, B)
    print("  induced action algebroid:")
    for line in print_structure(fac.induced).splitlines():
        print(f"    {line}")
    print(f"  unit followed by the induced map recovers the comorphism: {fac.report.ok}")


def base_change_demo():
    cfg = ZeroTestConfig(tol=1e-9, samples=64)
    mf = load_map_file(fixture_path("line_in_plane.lrb"), "basechange")
    B = mf.target
    f = base_map(mf.chart, B.chart, mf.base)
    p, q = (base_change_element(f, B, *mf.elements[k]) for k in ("p", "q"))
    print(f"base change of the plane's tangent algebra along t -> (t, 0): [p, q] = {base_change_bracket(p, q, f, B, cfg)}")
    extra = [base_change_element(f, B, [c], [c, "0"]) for c in ("t^2", "sin(t)")]
    report = base_change_jacobi_report([p, q, *extra], f, B, cfg)
    print(f"  Jacobi holds on {len(report.family('jacobi'))} triples of members: {report.ok}")


if __name__ == "__main__":
    morphism_demo()
    comorphism_demo()
    base_change_demo()
