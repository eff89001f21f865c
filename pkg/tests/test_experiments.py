import numpy as np
import pytest

from plaplace import experiments as ex
from plaplace import mesh as pm, problem as pb


def test_hat_source_sides_inverted():
    # the hump on the top boundary is the negative of the one on the left
    # under swapping the parametrization
    ts = np.linspace(0.0, 1.0, 33)
    left = ex.hat_source(np.column_stack([np.zeros_like(ts), ts]))
    top = ex.hat_source(np.column_stack([ts, np.ones_like(ts)]))
    np.testing.assert_allclose(top, -left, atol=1e-12)


def test_boundary_normals():
    mesh = pm.unit_square(4, free_boundary=("left", "top"))
    normals = ex.boundary_normals(mesh)

    def node_at(x, y):
        return int(np.argmin(np.linalg.norm(mesh.nodes - [x, y], axis=1)))

    np.testing.assert_allclose(normals[node_at(0.0, 0.5)], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(normals[node_at(0.5, 1.0)], [0.0, 1.0], atol=1e-12)
    # corner between the two Neumann sides: averaged and normalized
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(normals[node_at(0.0, 1.0)], [-s, s], atol=1e-12)
    # junction corners use the single adjacent Neumann edge
    np.testing.assert_allclose(normals[node_at(0.0, 0.0)], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(normals[node_at(1.0, 1.0)], [0.0, 1.0], atol=1e-12)
    # Dirichlet-only nodes carry no normal
    np.testing.assert_allclose(normals[node_at(0.5, 0.0)], [0.0, 0.0])


def test_case_registry():
    assert set(ex.case_names()) == {
        "scalar-hat", "hat-normal", "hat-ones", "manufactured",
        "oned-const", "oned-sign",
    }
    with pytest.raises(KeyError, match="known cases"):
        ex.get_case("bogus")


def test_k_for_nodes():
    assert ex.k_for_nodes(2500) == 49
    assert ex.k_for_nodes(10000) == 99
    assert ex.k_for_nodes(625) == 24
    assert ex.k_for_nodes(40000) == 199


def test_run_validation_small():
    res = ex.run_validation(81, 2.0, eps=1e-6)
    assert res.n == 81
    assert res.component_asymmetry <= 1e-10
    assert res.max_error.shape == (2,)
    assert res.max_error.max() < 0.05  # coarse-mesh discretization error


def test_run_table_records_cells_and_failures(tmp_path):
    result = ex.run_table(["scalar-hat"], [2.0], [25, 36], eps=1e-4)
    assert result.counts("scalar-hat", 2.0, 25) > 0
    assert result.counts("scalar-hat", 2.0, 36) > 0

    # a failing cell is recorded, not raised
    bad = ex.run_table(["scalar-hat"], [1.5], [25], eps=1e-4)
    assert bad.counts("scalar-hat", 1.5, 25) is None
    assert "ValueError" in bad.cells[("scalar-hat", 1.5, 25)]

    p1 = tmp_path / "t1.csv"
    p2 = tmp_path / "t2.csv"
    result.write_counts_csv(p1)
    result.write_counts_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "p,scalar-hat:n=25,scalar-hat:n=36"
    result.write_details_csv(tmp_path / "details.csv")
    text = (tmp_path / "details.csv").read_text()
    assert text.splitlines()[0].startswith("case,p,n,aux,main,total")


def test_run_table_parallel_matches_serial():
    serial = ex.run_table(["scalar-hat"], [2.0, 3.0], [25], eps=1e-4, jobs=1)
    parallel = ex.run_table(["scalar-hat"], [2.0, 3.0], [25], eps=1e-4, jobs=2)
    for key in serial.cells:
        assert serial.counts(*key) == parallel.counts(*key)


def test_deformation_node_arithmetic():
    results = ex.run_deformation("hat-normal", [2.0], t=0.5, k=5, eps=1e-4)
    res = results[0]
    v = res.report.u.reshape(res.mesh.n_nodes, 2)
    np.testing.assert_allclose(res.deformed.nodes, res.mesh.nodes + 0.5 * v, rtol=1e-14)
    assert res.max_displacement == pytest.approx(np.linalg.norm(v, axis=1).max())
    # the undeformed mesh is untouched
    assert res.quality_before.min_angle == pytest.approx(45.0)


def test_deformation_zero_field_is_identity():
    zero_case = ex.ExperimentCase(
        "zero-vec", 2, 2, ("left",),
        lambda mesh, p: pb.ContinuousData(p=p, d_prime=2),
    )
    ex.CASES["zero-vec"] = zero_case
    try:
        res = ex.run_deformation("zero-vec", [2.0], t=1.0, k=4, eps=1e-6)[0]
        np.testing.assert_allclose(res.deformed.nodes, res.mesh.nodes, atol=1e-5)
        assert res.quality_after.min_angle == pytest.approx(
            res.quality_before.min_angle, abs=1e-2
        )
    finally:
        del ex.CASES["zero-vec"]


def test_deformation_rejects_scalar_case_and_bad_t():
    with pytest.raises(ValueError):
        ex.run_deformation("scalar-hat", [2.0], k=4)
    with pytest.raises(ValueError):
        ex.run_deformation("hat-normal", [2.0], t=0.0, k=4)


def test_free_boundary_endpoints():
    mesh = pm.unit_square(4, free_boundary=("left", "top"))
    ends = ex.free_boundary_endpoints(mesh)
    coords = mesh.nodes[ends]
    expected = {(0.0, 0.0), (1.0, 1.0)}
    assert {tuple(c) for c in coords} == expected


def test_oned_limit_basics():
    res = ex.oned_limit(lambda pts: np.ones(len(pts)), [2.0, 5.0], k=40, eps=1e-6)
    assert res.sign == 1.0
    d2, d5 = res.tent_distance[2.0], res.tent_distance[5.0]
    assert d5 < d2  # closer to the tent as p grows
    # p = 2 closed form: u = x (1 - x) / 2, sup distance to tent 3/8
    assert d2 == pytest.approx(0.375, abs=1e-3)


def test_oned_limit_odd_symmetry():
    plus = ex.oned_limit(lambda pts: np.ones(len(pts)), [3.0], k=40, eps=1e-8)
    minus = ex.oned_limit(lambda pts: -np.ones(len(pts)), [3.0], k=40, eps=1e-8)
    assert minus.sign == -1.0
    np.testing.assert_allclose(minus.solutions[3.0], -plus.solutions[3.0], atol=1e-6)
    assert minus.tent_distance[3.0] == pytest.approx(plus.tent_distance[3.0], abs=1e-6)


def test_oned_limit_sign_changing_qualitative():
    res = ex.oned_limit(
        lambda pts: np.where(pts[:, 0] > 0.15, 1.0, -1.0), [2.0], k=40, eps=1e-6
    )
    assert res.sign is None
    assert res.tent_distance[2.0] is None
    assert np.max(np.abs(res.solutions[2.0])) > 0.0


def test_csv_writers_deterministic(tmp_path):
    res = ex.oned_limit(lambda pts: np.ones(len(pts)), [2.0], k=10, eps=1e-4)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ex.write_oned_csv(res, a)
    ex.write_oned_csv(res, b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "x,p=2,tent"
