"""Smoke test for the `sbe` extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""
import math
import tempfile

import sbe


def main():
    sys1 = sbe.BlockSystem.builtin("example1")
    assert sys1.dims == (5, 3, 2)
    assert sys1.validate_case("I")
    w = sbe.reference_solution("example1")

    eta = sbe.unstructured_be(sys1, w)
    eta_s = sbe.structured_be(sys1, w, "I")
    eta_sps, pert = sbe.minimal_perturbation(sys1, w, "I", sparsity=True)
    print(f"example1: eta={eta:.4e} eta_S={eta_s:.4e} eta_S_sps={eta_sps:.4e}")
    assert 0 < eta < eta_s < eta_sps
    assert pert.sparsity_preserving
    assert math.isclose(pert.weighted_norm(sbe.Weights.unit()), eta_sps, rel_tol=1e-10)
    assert pert.verify(sys1, w) < 1e-12
    da = pert.block("A")
    assert all(math.isclose(da[i][j], da[j][i]) for i in range(5) for j in range(5))

    # the extra GMRES criterion stops at or before the residual-based one
    sys6 = sbe.BlockSystem.builtin("example6", r=4)
    wts = sbe.Weights.normalized(sys6)
    _, ok2, hist2 = sbe.gmres(sys6, "term2", 1e-14)
    _, oks, hists = sbe.gmres(sys6, "seta", 1e-14, case="I", weights=wts)
    print(f"example6(r=4): term2 {len(hist2)} iterations, seta {len(hists)} iterations")
    assert ok2 and oks and len(hists) <= len(hist2)

    # round trip through MatrixMarket files
    with tempfile.TemporaryDirectory() as d:
        sys1.store("I", "example1", d)
        back = sbe.BlockSystem.load(f"{d}/manifest.json")
        assert back.block("A") == sys1.block("A")

    # a tiny hand-built system solved exactly
    tiny = sbe.BlockSystem([[2.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]], [[3.0]], [1.0], [2.0], [3.0])
    x = sbe.gep_solve(tiny)
    assert sbe.structured_be(tiny, x, "I") < 1e-15

    try:
        sbe.structured_be(sys1, w[:-1], "I")
    except sbe.SbeError as e:
        print(f"expected error: {e}")
    else:
        raise AssertionError("length mismatch not reported")
    print("ok")


if __name__ == "__main__":
    main()
