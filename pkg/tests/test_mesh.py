import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphwave import mesh as msh
from sphwave.sphere import angular_distance


def test_level_zero_is_octahedron():
    m = msh.build_mesh(0)
    lv = m[0]
    assert (lv.n_vertices, lv.n_edges, lv.n_faces) == (6, 12, 8)


@pytest.mark.parametrize("levels, counts", [(0, [6]), (2, [6, 18, 66]), (3, [6, 18, 66, 258])])
def test_vertex_counts(levels, counts):
    assert msh.build_mesh(levels).vertex_counts() == counts


def test_counts_follow_edge_recursion(mesh3):
    for j in range(3):
        assert mesh3[j + 1].n_vertices == mesh3[j].n_vertices + mesh3[j].n_edges
        assert mesh3[j].euler_characteristic == 2
    assert mesh3[3].euler_characteristic == 2


def test_vertices_unit_and_even_indices_stable(mesh3):
    for j in range(4):
        assert np.abs(np.linalg.norm(mesh3[j].vertices, axis=1) - 1).max() < 1e-12
    for j in range(3):
        n = mesh3[j].n_vertices
        assert np.array_equal(mesh3[j + 1].vertices[:n], mesh3[j].vertices)


def test_odd_vertices_are_normalised_midpoints(mesh2):
    for j in (1, 2):
        coarse, fine = mesh2[j - 1], mesh2[j]
        for i, (a, b) in enumerate(fine.parent_edge):
            mid = coarse.vertices[a] + coarse.vertices[b]
            np.testing.assert_allclose(fine.vertices[coarse.n_vertices + i],
                                       mid / np.linalg.norm(mid), atol=1e-15)


def test_negative_levels_rejected():
    with pytest.raises(ValueError):
        msh.build_mesh(-1)


def test_neighbor_set_sizes(mesh2):
    nb = msh.neighbor_sets(mesh2, 1)
    assert nb.v.shape == (12, 2) and nb.f.shape == (12, 2) and nb.e.shape == (12, 4)
    assert all(nb.valence(k) == 4 for k in range(6))
    nb2 = msh.neighbor_sets(mesh2, 2)
    assert all(nb2.valence(k) == 6 for k in range(6, 18))
    assert all(nb2.valence(k) == 4 for k in range(6))


def test_neighbor_sets_disjoint_and_parented(mesh3):
    for level in (1, 2, 3):
        nb = msh.neighbor_sets(mesh3, level)
        fine = mesh3[level]
        for i in range(len(nb.v)):
            assert sorted(nb.v[i]) == sorted(fine.parent_edge[i])
            v, f, e = set(nb.v[i]), set(nb.f[i]), set(nb.e[i])
            assert not (v & f) and not (v & e) and not (f & e)


def test_neighbor_distance_ordering(mesh3):
    for level in (1, 2, 3):
        nb = msh.neighbor_sets(mesh3, level)
        verts = mesh3[level].vertices
        nc = mesh3[level - 1].n_vertices
        for i in range(len(nb.v)):
            origin = verts[nc + i][None]
            dv = angular_distance(origin, verts[nb.v[i]])[0]
            df = angular_distance(origin, verts[nb.f[i]])[0]
            assert dv.max() < df.min()
            assert np.all(np.diff(df) >= -1e-12)


def test_edge_wings_repeat_only_next_to_valence_four(mesh3):
    for level in (1, 2, 3):
        nb = msh.neighbor_sets(mesh3, level)
        for v, e in zip(nb.v, nb.e):
            if len(set(e)) < 4:
                assert min(v) < 6


def test_class_matrix_codes(mesh2):
    code = msh.neighbor_class_matrix(mesh2, 1)
    assert code.shape == (6, 18)
    assert np.all(np.diag(code[:, :6]) == 0)
    odd = code[:, 6:]
    for cls, count in ((1, 2), (2, 2)):
        assert np.all((odd == cls).sum(axis=0) == count)


def test_octahedral_group():
    group = msh.octahedral_group()
    assert len(group) == 48
    for g in group:
        np.testing.assert_allclose(g @ g.T, np.eye(3))
    assert len({tuple(g.ravel()) for g in group}) == 48


@pytest.mark.parametrize("level, sizes", [(1, [6]), (2, [6, 12])])
def test_orbit_sizes(mesh2, level, sizes):
    orb = msh.symmetry_orbits(mesh2, level)
    got = sorted(len(o) for o in orb.orbits)
    assert got == sizes
    assert all(48 % s == 0 for s in got)
    covered = np.sort(np.concatenate(orb.orbits))
    assert np.array_equal(covered, np.arange(mesh2[level - 1].n_vertices))


def test_orbit_permutations_are_geometric(mesh3):
    group = msh.octahedral_group()
    for level in (1, 2, 3):
        orb = msh.symmetry_orbits(mesh3, level)
        fine = mesh3[level].vertices
        for k in range(mesh3[level - 1].n_vertices):
            p = orb.perm[k]
            assert np.array_equal(np.sort(p), np.arange(len(fine)))
            g = group[orb.group_element[k]]
            np.testing.assert_allclose(fine[p], fine @ g.T, atol=1e-9)


def test_orbit_permutation_maps_symmetric_rows(mesh2):
    orb = msh.symmetry_orbits(mesh2, 2)
    code = msh.neighbor_class_matrix(mesh2, 2)
    for k in range(18):
        r = orb.representative[k]
        assert np.array_equal(code[k, orb.perm[k]], code[r])
    const = np.ones((18, 66))
    for k in range(18):
        assert np.array_equal(const[k, orb.perm[k]], const[orb.representative[k]])


def test_mirror_permutation(mesh2):
    for j in range(3):
        p = msh.mirror_permutation(mesh2, j)
        verts = mesh2[j].vertices
        np.testing.assert_allclose(verts[p], verts * [1, -1, 1], atol=1e-12)
        assert np.array_equal(p[p], np.arange(len(p)))


@pytest.mark.parametrize("method", ["voronoi", "barycentric"])
def test_areas_partition_sphere(mesh3, method):
    for j in range(4):
        a = msh.vertex_areas(mesh3, j, method)
        assert np.all(a > 0)
        assert a.sum() == pytest.approx(4 * np.pi, abs=1e-6)


def test_level_zero_areas_equal(mesh2):
    np.testing.assert_allclose(msh.vertex_areas(mesh2, 0), 4 * np.pi / 6, rtol=1e-9)


def test_areas_constant_on_orbits(mesh3):
    for level in (1, 2, 3):
        areas = msh.vertex_areas(mesh3, level - 1)
        for orbit in msh.symmetry_orbits(mesh3, level).orbits:
            assert np.ptp(areas[orbit]) < 1e-9


def test_unknown_area_method(mesh2):
    with pytest.raises(ValueError):
        msh.vertex_areas(mesh2, 0, "hexagonal")


def test_export_and_read(tmp_path, mesh2):
    paths = msh.export_mesh(mesh2, tmp_path)
    assert [p.name for p in paths] == ["level_0.txt", "level_1.txt", "level_2.txt"]
    text = paths[2].read_text().splitlines()
    assert sum(line.startswith("v ") for line in text) == 66
    assert sum(line.startswith("f ") for line in text) == 128
    assert msh.read_mesh_levels(tmp_path) == 2


def test_read_rejects_foreign_mesh(tmp_path, mesh2):
    paths = msh.export_mesh(mesh2, tmp_path)
    paths[1].write_text(paths[1].read_text().replace("v 1 0 0", "v 0.9 0 0", 1))
    with pytest.raises(ValueError):
        msh.read_mesh_levels(tmp_path)


@given(st.integers(0, 47), st.sampled_from([1, 2]))
def test_group_elements_permute_vertices(gi, level):
    m = msh.build_mesh(2)
    perm = msh.vertex_permutations(m, level)[gi]
    assert np.array_equal(np.sort(perm), np.arange(m[level].n_vertices))
    areas = msh.vertex_areas(m, level)
    np.testing.assert_allclose(areas[perm], areas, atol=1e-9)
