"""2-D Euler-Bernoulli frame elements and global mass/stiffness assembly.

Every node carries three degrees of freedom (u, v, theta), so node ``i``
owns global DOFs ``3i``, ``3i + 1`` and ``3i + 2``.  Structures are
free-free: no boundary conditions are applied, and a connected mesh
yields a stiffness matrix with exactly three rigid-body modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

DOF_PER_NODE = 3
STRUCTURE_SCHEMA_VERSION = 1


class GeometryError(ValueError):
    """Degenerate or inconsistent structural geometry."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class ElementSection:
    """Cross-section and material data; the modulus lives on the element.

    Parameters
    ----------
    area : float
        Cross-sectional area, m^2.
    second_moment : float
        Second moment of area about the out-of-plane axis, m^4.
    density : float
        Mass density, kg/m^3.
    """

    area: float
    second_moment: float
    density: float

    def __post_init__(self):
        for name in ("area", "second_moment", "density"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"section {name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class FrameElement:
    id: int
    node_a: int
    node_b: int
    section: ElementSection
    modulus: float

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise GeometryError(f"element {self.id} connects node {self.node_a} to itself")
        if not self.modulus > 0:
            raise ValueError(f"element {self.id} modulus must be strictly positive")


@dataclass(frozen=True)
class StructureModel:
    """A free-free 2-D frame: nodes, elements and the measured-DOF map."""

    nodes: tuple[Node, ...]
    elements: tuple[FrameElement, ...]
    measured_dofs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "measured_dofs", tuple(int(d) for d in self.measured_dofs))
        ids = [node.id for node in self.nodes]
        if sorted(ids) != list(range(len(self.nodes))):
            raise GeometryError("node ids must be unique and contiguous from 0")
        lookup = self.node_lookup()
        for element in self.elements:
            if element.node_a not in lookup or element.node_b not in lookup:
                raise GeometryError(f"element {element.id} references an unknown node")
            if element_length(element, lookup) <= 0.0:
                raise GeometryError(f"element {element.id} has zero length")
        _check_connected(self.nodes, self.elements)
        n_dofs = self.n_dofs
        if len(set(self.measured_dofs)) != len(self.measured_dofs):
            raise ValueError("measured_dofs must be distinct")
        for dof in self.measured_dofs:
            if not 0 <= dof < n_dofs:
                raise ValueError(f"measured DOF {dof} out of range 0..{n_dofs - 1}")

    @property
    def n_dofs(self) -> int:
        return DOF_PER_NODE * len(self.nodes)

    def node_lookup(self) -> dict[int, Node]:
        return {node.id: node for node in self.nodes}

    def moduli(self) -> np.ndarray:
        """Per-element modulus vector, ordered by element position."""
        return np.array([element.modulus for element in self.elements])


@dataclass(frozen=True)
class GlobalMatrices:
    """Assembled global mass and stiffness matrices."""

    mass: np.ndarray
    stiffness: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        stiffness = np.asarray(self.stiffness, dtype=float)
        if mass.shape != stiffness.shape or mass.ndim != 2 or mass.shape[0] != mass.shape[1]:
            raise ValueError("mass and stiffness must be square matrices of equal size")
        for name, matrix in (("mass", mass), ("stiffness", stiffness)):
            scale = np.abs(matrix).max()
            if scale > 0 and np.abs(matrix - matrix.T).max() > 1e-10 * scale:
                raise ValueError(f"{name} matrix is not symmetric")
        mass.flags.writeable = False
        stiffness.flags.writeable = False
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "stiffness", stiffness)

    @property
    def n_dofs(self) -> int:
        return self.mass.shape[0]


def element_length(element: FrameElement, nodes: Mapping[int, Node]) -> float:
    a, b = nodes[element.node_a], nodes[element.node_b]
    return float(np.hypot(b.x - a.x, b.y - a.y))


def element_matrices(
    element: FrameElement, nodes: Mapping[int, Node]
) -> tuple[np.ndarray, np.ndarray]:
    """Local 6x6 stiffness and consistent-mass matrices of one element.

    Local DOF order is ``(u_a, v_a, theta_a, u_b, v_b, theta_b)`` with the
    local x axis running from node ``a`` to node ``b``.  Stiffness combines
    an axial bar with cubic-Hermite bending and scales linearly in the
    element modulus; the consistent mass matrix does not depend on it.
    """
    length = element_length(element, nodes)
    if length <= 0.0:
        raise GeometryError(f"element {element.id} has zero length")
    E = element.modulus
    A = element.section.area
    I = element.section.second_moment
    rho = element.section.density
    L = length

    ax = E * A / L
    b1 = 12.0 * E * I / L**3
    b2 = 6.0 * E * I / L**2
    b3 = 4.0 * E * I / L
    b4 = 2.0 * E * I / L
    k = np.array(
        [
            [ax, 0.0, 0.0, -ax, 0.0, 0.0],
            [0.0, b1, b2, 0.0, -b1, b2],
            [0.0, b2, b3, 0.0, -b2, b4],
            [-ax, 0.0, 0.0, ax, 0.0, 0.0],
            [0.0, -b1, -b2, 0.0, b1, -b2],
            [0.0, b2, b4, 0.0, -b2, b3],
        ]
    )

    m0 = rho * A * L
    m = np.array(
        [
            [m0 / 3, 0.0, 0.0, m0 / 6, 0.0, 0.0],
            [0.0, 13 * m0 / 35, 11 * m0 * L / 210, 0.0, 9 * m0 / 70, -13 * m0 * L / 420],
            [0.0, 11 * m0 * L / 210, m0 * L**2 / 105, 0.0, 13 * m0 * L / 420, -m0 * L**2 / 140],
            [m0 / 6, 0.0, 0.0, m0 / 3, 0.0, 0.0],
            [0.0, 9 * m0 / 70, 13 * m0 * L / 420, 0.0, 13 * m0 / 35, -11 * m0 * L / 210],
            [0.0, -13 * m0 * L / 420, -m0 * L**2 / 140, 0.0, -11 * m0 * L / 210, m0 * L**2 / 105],
        ]
    )
    return k, m


def _transformation(element: FrameElement, nodes: Mapping[int, Node]) -> np.ndarray:
    a, b = nodes[element.node_a], nodes[element.node_b]
    length = element_length(element, nodes)
    c = (b.x - a.x) / length
    s = (b.y - a.y) / length
    rot = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    T = np.zeros((6, 6))
    T[:3, :3] = rot
    T[3:, 3:] = rot
    return T


def _check_connected(nodes: Sequence[Node], elements: Sequence[FrameElement]) -> None:
    if not nodes:
        raise GeometryError("model has no nodes")
    if not elements:
        raise GeometryError("model has no elements")
    adjacency: dict[int, set[int]] = {node.id: set() for node in nodes}
    for element in elements:
        adjacency[element.node_a].add(element.node_b)
        adjacency[element.node_b].add(element.node_a)
    seen = {nodes[0].id}
    stack = [nodes[0].id]
    while stack:
        current = stack.pop()
        for neighbour in adjacency[current]:
            if neighbour not in seen:
                seen.add(neighbour)
                stack.append(neighbour)
    if len(seen) != len(nodes):
        missing = sorted(set(adjacency) - seen)
        raise GeometryError(f"mesh is disconnected; nodes {missing} unreachable from node {nodes[0].id}")


def assemble(model: StructureModel) -> GlobalMatrices:
    """Assemble global mass and stiffness for a structure model.

    Each element is rotated into global coordinates before scatter-add.
    """
    lookup = model.node_lookup()
    n = model.n_dofs
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for element in model.elements:
        k_local, m_local = element_matrices(element, lookup)
        T = _transformation(element, lookup)
        k_global = T.T @ k_local @ T
        m_global = T.T @ m_local @ T
        # symmetrize away the last-bit asymmetry of the triple products
        k_global = 0.5 * (k_global + k_global.T)
        m_global = 0.5 * (m_global + m_global.T)
        dofs = np.array(
            [
                DOF_PER_NODE * element.node_a,
                DOF_PER_NODE * element.node_a + 1,
                DOF_PER_NODE * element.node_a + 2,
                DOF_PER_NODE * element.node_b,
                DOF_PER_NODE * element.node_b + 1,
                DOF_PER_NODE * element.node_b + 2,
            ]
        )
        K[np.ix_(dofs, dofs)] += k_global
        M[np.ix_(dofs, dofs)] += m_global
    return GlobalMatrices(mass=M, stiffness=K)


def apply_parameters(model: StructureModel, moduli: Sequence[float]) -> StructureModel:
    """Return a copy of ``model`` with the per-element moduli replaced."""
    values = np.asarray(moduli, dtype=float)
    if values.shape != (len(model.elements),):
        raise ValueError(
            f"expected {len(model.elements)} moduli, got shape {values.shape}"
        )
    if not np.all(values > 0):
        raise ValueError("all moduli must be strictly positive")
    elements = tuple(
        replace(element, modulus=float(value))
        for element, value in zip(model.elements, values)
    )
    return StructureModel(nodes=model.nodes, elements=elements, measured_dofs=model.measured_dofs)


def rigid_body_vectors(model: StructureModel) -> np.ndarray:
    """The three 2-D rigid-body motions as columns: x/y translation, rotation."""
    n = model.n_dofs
    vectors = np.zeros((n, 3))
    for node in model.nodes:
        base = DOF_PER_NODE * node.id
        vectors[base, 0] = 1.0
        vectors[base + 1, 1] = 1.0
        vectors[base, 2] = -node.y
        vectors[base + 1, 2] = node.x
        vectors[base + 2, 2] = 1.0
    return vectors


def _structure_from_dict(data: dict, source: str) -> StructureModel:
    version = data.get("schema_version")
    if version != STRUCTURE_SCHEMA_VERSION:
        raise ValueError(
            f"{source}: unsupported structure schema_version {version!r} "
            f"(expected {STRUCTURE_SCHEMA_VERSION})"
        )
    try:
        nodes = tuple(
            Node(id=int(n["id"]), x=float(n["x"]), y=float(n["y"])) for n in data["nodes"]
        )
        elements = tuple(
            FrameElement(
                id=int(e["id"]),
                node_a=int(e["node_a"]),
                node_b=int(e["node_b"]),
                section=ElementSection(
                    area=float(e["area"]),
                    second_moment=float(e["second_moment"]),
                    density=float(e["density"]),
                ),
                modulus=float(e["modulus"]),
            )
            for e in data["elements"]
        )
        measured = tuple(int(d) for d in data["measured_dofs"])
    except KeyError as exc:
        raise ValueError(f"{source}: missing structure field {exc}") from exc
    return StructureModel(nodes=nodes, elements=elements, measured_dofs=measured)


def load_structure(source: str | Path) -> StructureModel:
    """Load a structure from a JSON config file or a bundled config name.

    ``source`` is either a filesystem path or the name of a bundled
    config such as ``"h_structure.default"``.
    """
    text, label = _read_config_text(source)
    return _structure_from_dict(json.loads(text), label)


def _read_config_text(source: str | Path) -> tuple[str, str]:
    path = Path(source)
    if path.exists():
        return path.read_text(), str(path)
    name = str(source)
    candidate = resources.files("femupdate.data").joinpath(f"{name}.json")
    if candidate.is_file():
        return candidate.read_text(), name
    raise FileNotFoundError(f"no such config file or bundled config: {source}")


def default_h_structure() -> StructureModel:
    """The bundled 12-element, 13-node H-frame with 15 measured DOFs."""
    return load_structure("h_structure.default")
