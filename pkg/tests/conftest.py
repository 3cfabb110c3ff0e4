import numpy as np
import pytest

from femupdate import ElementSection, FrameElement, Node, StructureModel, default_h_structure


def random_frame(rng: np.random.Generator, n_nodes: int | None = None) -> StructureModel:
    """Random connected 2-D frame: a tree mesh with sane section properties.

    Property ranges are chosen to keep the (M, K) pencil well conditioned so
    eigen-residual tolerances are meaningful.
    """
    if n_nodes is None:
        n_nodes = int(rng.integers(3, 9))
    positions = [np.zeros(2)]
    parents = []
    for i in range(1, n_nodes):
        parent = int(rng.integers(i))
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(0.3, 1.0)
        positions.append(positions[parent] + length * np.array([np.cos(angle), np.sin(angle)]))
        parents.append(parent)
    nodes = tuple(Node(i, float(p[0]), float(p[1])) for i, p in enumerate(positions))
    elements = []
    for child, parent in enumerate(parents, start=1):
        section = ElementSection(
            area=float(rng.uniform(1e-4, 1e-3)),
            second_moment=float(rng.uniform(1e-8, 1e-6)),
            density=float(rng.uniform(1500.0, 8000.0)),
        )
        elements.append(
            FrameElement(
                id=len(elements),
                node_a=parent,
                node_b=child,
                section=section,
                modulus=float(rng.uniform(2e10, 2e11)),
            )
        )
    n_dofs = 3 * n_nodes
    measured = tuple(
        int(d) for d in rng.choice(n_dofs, size=min(5, n_dofs), replace=False)
    )
    return StructureModel(nodes=nodes, elements=tuple(elements), measured_dofs=measured)


def straight_beam(
    n_elements: int = 12,
    length: float = 1.0,
    width: float = 0.03,
    thickness: float = 0.01,
    modulus: float = 7.0e10,
    density: float = 2700.0,
) -> StructureModel:
    """Uniform free-free beam along x, meshed into equal frame elements."""
    area = width * thickness
    second_moment = width * thickness**3 / 12.0
    nodes = tuple(
        Node(i, i * length / n_elements, 0.0) for i in range(n_elements + 1)
    )
    section = ElementSection(area=area, second_moment=second_moment, density=density)
    elements = tuple(
        FrameElement(i, i, i + 1, section, modulus) for i in range(n_elements)
    )
    return StructureModel(nodes=nodes, elements=elements, measured_dofs=(1,))


@pytest.fixture(scope="session")
def h_structure() -> StructureModel:
    return default_h_structure()
