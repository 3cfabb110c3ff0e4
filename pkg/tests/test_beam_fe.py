import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from femupdate import (
    ElementSection,
    FrameElement,
    GeometryError,
    Node,
    StructureModel,
    apply_parameters,
    assemble,
    element_matrices,
    load_structure,
)
from femupdate.beam_fe import rigid_body_vectors

from conftest import random_frame


def unit_element(modulus=1.0, area=1.0, second_moment=1.0, length=1.0, density=1.0):
    nodes = {0: Node(0, 0.0, 0.0), 1: Node(1, length, 0.0)}
    element = FrameElement(
        0, 0, 1, ElementSection(area=area, second_moment=second_moment, density=density), modulus
    )
    return element, nodes


class TestElementMatrices:
    def test_axial_unit_bar(self):
        element, nodes = unit_element()
        k, _ = element_matrices(element, nodes)
        # EA/L = 1 on the (u_a, u_b) sub-block
        assert k[0, 0] == pytest.approx(1.0)
        assert k[0, 3] == pytest.approx(-1.0)
        assert k[3, 3] == pytest.approx(1.0)

    def test_stiffness_linear_in_modulus(self):
        element, nodes = unit_element(modulus=3.7e10, area=2e-4, second_moment=4e-9, length=0.83)
        k1, m1 = element_matrices(element, nodes)
        element2 = FrameElement(0, 0, 1, element.section, 2.0 * element.modulus)
        k2, m2 = element_matrices(element2, nodes)
        np.testing.assert_array_equal(k2, 2.0 * k1)
        np.testing.assert_array_equal(m2, m1)

    def test_bending_block_against_hermite_quadrature(self):
        # oracle: k_ij = int_0^L EI N_i'' N_j'' dx with cubic Hermite shapes
        length = 1.0
        element, nodes = unit_element(length=length)

        def second_derivatives(x):
            xi = x / length
            return np.array(
                [
                    (-6.0 + 12.0 * xi) / length**2,
                    length * (-4.0 + 6.0 * xi) / length**2,
                    (6.0 - 12.0 * xi) / length**2,
                    length * (-2.0 + 6.0 * xi) / length**2,
                ]
            )

        oracle = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                oracle[i, j] = quad(
                    lambda x: second_derivatives(x)[i] * second_derivatives(x)[j], 0, length
                )[0]
        k, _ = element_matrices(element, nodes)
        bending = np.ix_([1, 2, 4, 5], [1, 2, 4, 5])
        np.testing.assert_allclose(k[bending], oracle, rtol=1e-9, atol=1e-12)
        assert k[1, 1] == pytest.approx(12.0)
        assert k[1, 2] == pytest.approx(6.0)
        assert k[2, 2] == pytest.approx(4.0)

    def test_mass_block_against_shape_function_quadrature(self):
        # oracle: m_ij = int_0^L rho A N_i N_j dx over Hermite shapes
        length, rho, area = 0.7, 2700.0, 3e-4
        element, nodes = unit_element(length=length, density=rho, area=area)

        def shapes(x):
            xi = x / length
            return np.array(
                [
                    1.0 - 3.0 * xi**2 + 2.0 * xi**3,
                    length * (xi - 2.0 * xi**2 + xi**3),
                    3.0 * xi**2 - 2.0 * xi**3,
                    length * (-(xi**2) + xi**3),
                ]
            )

        oracle = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                oracle[i, j] = rho * area * quad(
                    lambda x: shapes(x)[i] * shapes(x)[j], 0, length
                )[0]
        _, m = element_matrices(element, nodes)
        bending = np.ix_([1, 2, 4, 5], [1, 2, 4, 5])
        np.testing.assert_allclose(m[bending], oracle, rtol=1e-9)

    def test_local_stiffness_rank_and_mass_definiteness(self):
        element, nodes = unit_element(modulus=7e10, area=3e-4, second_moment=2.5e-9, length=0.4)
        k, m = element_matrices(element, nodes)
        eigenvalues = np.linalg.eigvalsh(k)
        assert np.sum(np.abs(eigenvalues) < 1e-8 * np.abs(eigenvalues).max()) == 3
        assert np.all(np.linalg.eigvalsh(m) > 0)

    def test_zero_length_element(self):
        nodes = {0: Node(0, 0.2, 0.1), 1: Node(1, 0.2, 0.1)}
        element = FrameElement(0, 0, 1, ElementSection(1.0, 1.0, 1.0), 1.0)
        with pytest.raises(GeometryError):
            element_matrices(element, nodes)


class TestAssemble:
    def test_two_collinear_elements_share_middle_node(self):
        section = ElementSection(area=2e-4, second_moment=3e-9, density=2700.0)
        single = StructureModel(
            nodes=(Node(0, 0.0, 0.0), Node(1, 0.5, 0.0)),
            elements=(FrameElement(0, 0, 1, section, 7e10),),
            measured_dofs=(0,),
        )
        double = StructureModel(
            nodes=(Node(0, 0.0, 0.0), Node(1, 0.5, 0.0), Node(2, 1.0, 0.0)),
            elements=(
                FrameElement(0, 0, 1, section, 7e10),
                FrameElement(1, 1, 2, section, 7e10),
            ),
            measured_dofs=(0,),
        )
        k_single = assemble(single).stiffness
        k_double = assemble(double).stiffness
        assert k_double.shape == (9, 9)
        np.testing.assert_allclose(
            k_double[3:6, 3:6], k_single[3:6, 3:6] + k_single[0:3, 0:3], rtol=1e-15
        )

    def test_default_h_structure_is_39_dofs(self, h_structure):
        matrices = assemble(h_structure)
        assert matrices.stiffness.shape == (39, 39)
        assert matrices.mass.shape == (39, 39)

    def test_rigid_modes_in_null_space(self, h_structure):
        matrices = assemble(h_structure)
        k_norm = np.linalg.norm(matrices.stiffness)
        for r in rigid_body_vectors(h_structure).T:
            assert np.linalg.norm(matrices.stiffness @ r) <= 1e-9 * k_norm * np.linalg.norm(r)

    def test_disconnected_mesh_rejected(self):
        section = ElementSection(1e-4, 1e-8, 2700.0)
        with pytest.raises(GeometryError, match="disconnected"):
            StructureModel(
                nodes=(Node(0, 0, 0), Node(1, 1, 0), Node(2, 0, 1), Node(3, 1, 1)),
                elements=(
                    FrameElement(0, 0, 1, section, 7e10),
                    FrameElement(1, 2, 3, section, 7e10),
                ),
                measured_dofs=(0,),
            )


class TestApplyParameters:
    def test_identity_update(self, h_structure):
        same = apply_parameters(h_structure, h_structure.moduli())
        np.testing.assert_array_equal(
            assemble(same).stiffness, assemble(h_structure).stiffness
        )

    def test_doubling_moduli_doubles_stiffness_only(self, h_structure):
        base = assemble(h_structure)
        doubled = assemble(apply_parameters(h_structure, 2.0 * h_structure.moduli()))
        np.testing.assert_array_equal(doubled.stiffness, 2.0 * base.stiffness)
        np.testing.assert_array_equal(doubled.mass, base.mass)

    def test_is_pure(self, h_structure):
        before = h_structure.moduli()
        apply_parameters(h_structure, 1.3 * before)
        np.testing.assert_array_equal(h_structure.moduli(), before)

    def test_baseline_is_70_gpa_aluminum(self, h_structure):
        np.testing.assert_array_equal(h_structure.moduli(), np.full(12, 7.0e10))

    def test_length_mismatch(self, h_structure):
        with pytest.raises(ValueError):
            apply_parameters(h_structure, np.full(11, 7e10))

    def test_nonpositive_modulus(self, h_structure):
        bad = h_structure.moduli()
        bad[4] = 0.0
        with pytest.raises(ValueError):
            apply_parameters(h_structure, bad)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_assembled_matrices_symmetric(seed):
    model = random_frame(np.random.default_rng(seed))
    matrices = assemble(model)
    for matrix in (matrices.stiffness, matrices.mass):
        assert np.linalg.norm(matrix - matrix.T) <= 1e-12 * np.linalg.norm(matrix)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_rigid_body_null_space(seed):
    model = random_frame(np.random.default_rng(seed))
    stiffness = assemble(model).stiffness
    k_norm = np.linalg.norm(stiffness)
    for r in rigid_body_vectors(model).T:
        assert np.linalg.norm(stiffness @ r) <= 1e-9 * k_norm * np.linalg.norm(r)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.floats(0.1, 10.0))
def test_stiffness_linear_in_modulus_vector(seed, alpha):
    model = random_frame(np.random.default_rng(seed))
    base = assemble(model).stiffness
    scaled = assemble(apply_parameters(model, alpha * model.moduli())).stiffness
    np.testing.assert_allclose(scaled, alpha * base, rtol=1e-12, atol=1e-12 * np.abs(base).max())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_stiffness_sparsity_pattern(seed):
    # entries are exactly zero wherever two DOFs share no element
    model = random_frame(np.random.default_rng(seed))
    stiffness = assemble(model).stiffness
    n = model.n_dofs
    shares = np.zeros((n, n), dtype=bool)
    for element in model.elements:
        dofs = [3 * element.node_a + i for i in range(3)] + [
            3 * element.node_b + i for i in range(3)
        ]
        shares[np.ix_(dofs, dofs)] = True
    assert np.all(stiffness[~shares] == 0.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_mass_positive_definite_stiffness_rank_deficiency_3(seed):
    model = random_frame(np.random.default_rng(seed))
    matrices = assemble(model)
    np.linalg.cholesky(matrices.mass)  # raises if not PD
    eigenvalues = np.linalg.eigvalsh(matrices.stiffness)
    near_zero = np.sum(np.abs(eigenvalues) < 1e-9 * eigenvalues.max())
    assert near_zero == 3


class TestStructureConfig:
    def test_bundled_default(self, h_structure):
        assert len(h_structure.nodes) == 13
        assert len(h_structure.elements) == 12
        assert h_structure.n_dofs == 39
        assert len(h_structure.measured_dofs) == 15
        assert h_structure.n_dofs - len(h_structure.measured_dofs) == 24

    def test_load_from_path(self, tmp_path, h_structure):
        import json
        from importlib import resources

        text = resources.files("femupdate.data").joinpath("h_structure.default.json").read_text()
        path = tmp_path / "structure.json"
        path.write_text(text)
        model = load_structure(path)
        assert model == h_structure

    def test_missing_config(self):
        with pytest.raises(FileNotFoundError):
            load_structure("no_such_structure")

    def test_bad_schema_version(self, tmp_path):
        path = tmp_path / "structure.json"
        path.write_text('{"schema_version": 99, "nodes": [], "elements": [], "measured_dofs": []}')
        with pytest.raises(ValueError, match="schema_version"):
            load_structure(path)

    def test_node_ids_must_be_contiguous(self):
        section = ElementSection(1e-4, 1e-8, 2700.0)
        with pytest.raises(GeometryError, match="contiguous"):
            StructureModel(
                nodes=(Node(0, 0, 0), Node(2, 1, 0)),
                elements=(FrameElement(0, 0, 2, section, 7e10),),
                measured_dofs=(0,),
            )

    def test_measured_dofs_validated(self):
        section = ElementSection(1e-4, 1e-8, 2700.0)
        nodes = (Node(0, 0, 0), Node(1, 1, 0))
        elements = (FrameElement(0, 0, 1, section, 7e10),)
        with pytest.raises(ValueError, match="distinct"):
            StructureModel(nodes, elements, (0, 0))
        with pytest.raises(ValueError, match="range"):
            StructureModel(nodes, elements, (6,))
