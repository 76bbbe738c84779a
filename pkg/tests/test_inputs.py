import numpy as np
import pytest

from certseg.errors import InputError
from certseg.fdgrid import Lattice
from certseg.inputs import AnalyticInput, ImageInput, make_two_gaussian
from certseg.model import ModelParams
from certseg.quadmesh import QuadMesh

PARAMS = ModelParams(c1=0.9, c2=0.1, nu=0.1)


class TestImageInput:
    def test_size_validation(self):
        with pytest.raises(InputError):
            ImageInput.from_array(np.zeros((8, 8)))  # 8 != 2^L + 1
        with pytest.raises(InputError):
            ImageInput.from_array(np.zeros((9, 8)))
        img = ImageInput.from_array(np.zeros((9, 9)))
        assert img.level == 3

    def test_node_values_on_uniform_mesh(self):
        rng = np.random.default_rng(0)
        values = rng.random((9, 9))
        img = ImageInput.from_array(values)
        mesh = QuadMesh.uniform(3, max_level=3)
        nodal = img.node_values(mesh)
        pos = mesh.dof_positions()
        # lattice corners reproduce pixels, centers average 4 neighbors
        for k, (x, y) in enumerate(pos):
            jx, iy = x * 8, y * 8
            if jx == int(jx) and iy == int(iy):
                assert nodal[k] == values[int(iy), int(jx)]
            else:
                i0, j0 = int(iy - 0.5), int(jx - 0.5)
                avg = values[i0 : i0 + 2, j0 : j0 + 2].mean()
                assert nodal[k] == pytest.approx(avg, abs=1e-15)

    def test_node_values_on_adaptive_mesh(self):
        rng = np.random.default_rng(1)
        values = rng.random((9, 9))
        img = ImageInput.from_array(values)
        mesh = QuadMesh.uniform(2, max_level=3).refine([(2, 0, 0)])
        nodal = img.node_values(mesh)
        assert nodal.shape == (mesh.n_dof,)

    def test_mesh_level_mismatch_rejected(self):
        img = ImageInput.from_array(np.zeros((9, 9)))
        mesh = QuadMesh.uniform(2, max_level=2)
        with pytest.raises(InputError):
            img.node_values(mesh)

    def test_theta_source_floor(self):
        rng = np.random.default_rng(2)
        img = ImageInput.from_array(rng.random((5, 5)))
        src = img.theta_source(PARAMS)
        assert (src.theta1 + src.theta2).min() >= PARAMS.theta_sum_floor - 1e-12
        assert (src.theta1_c + src.theta2_c).min() >= PARAMS.theta_sum_floor - 1e-12


class TestTwoGaussian:
    def test_peak_value_at_center(self):
        src = make_two_gaussian(
            centers=((0.3, 0.3), (0.7, 0.7)), weights=(0.5, 0.4), widths=(0.05, 0.05)
        )
        at_center = src.fn(np.array([[0.3, 0.3]]))[0]
        # the other bump contributes essentially nothing at distance 0.57
        assert at_center == pytest.approx(0.5, abs=1e-6)

    def test_mirror_symmetry(self):
        src = make_two_gaussian()
        pts = np.array([[0.2, 0.3], [0.8, 0.1]])
        mirrored = make_two_gaussian(
            centers=[(1 - x, y) for x, y in [(0.32, 0.36), (0.68, 0.62)]][::-1],
            weights=(0.5, 0.5)[::-1],
            widths=(0.05, 0.06)[::-1],
        )
        lhs = src.fn(pts)
        rhs = mirrored.fn(np.stack([1 - pts[:, 0], pts[:, 1]], axis=1))
        assert np.allclose(lhs, rhs, atol=1e-14)

    def test_lattice_and_mesh_sampling_agree(self):
        src = make_two_gaussian()
        lat = Lattice.from_level(3)
        mesh = QuadMesh.uniform(3, max_level=3)
        lv = src.lattice_values(lat)
        nv = src.node_values(mesh)
        # corner nodes of the mesh are lattice points
        pos = mesh.dof_positions()
        corner = [k for k, (x, y) in enumerate(pos) if (x * 8) % 1 == 0 and (y * 8) % 1 == 0]
        for k in corner:
            x, y = pos[k]
            assert nv[k] == pytest.approx(lv[int(y * 8), int(x * 8)], abs=1e-15)

    def test_parameter_validation(self):
        with pytest.raises(InputError):
            make_two_gaussian(widths=(0.1, 0.0))
        with pytest.raises(InputError):
            make_two_gaussian(centers=((0, 0),))
