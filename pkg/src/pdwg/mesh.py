"""Structured tetrahedral meshes of voxel-union domains.

Every lattice cube is split into six equal-volume tetrahedra sharing the
(0,0,0)-(1,1,1) diagonal. The split is the same in every cube, which keeps
neighbouring cubes face-conforming.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "VoxelDomainSpec",
    "Mesh",
    "BoundaryComponent",
    "build_mesh",
    "boundary_components",
    "face_frame",
    "face_frames",
]

Box = tuple[tuple[int, int, int], tuple[int, int, int]]


@dataclass(frozen=True)
class VoxelDomainSpec:
    """Axis-aligned box minus axis-aligned boxes, in integer lattice units.

    Physical coordinates are lattice coordinates times ``unit``.
    """

    bbox: Box
    excluded: tuple[Box, ...] = ()
    unit: float = 1.0

    def __post_init__(self):
        lo, hi = (tuple(int(v) for v in c) for c in self.bbox)
        object.__setattr__(self, "bbox", (lo, hi))
        object.__setattr__(
            self,
            "excluded",
            tuple((tuple(int(v) for v in a), tuple(int(v) for v in b)) for a, b in self.excluded),
        )
        if not self.unit > 0:
            raise ValueError("unit length must be positive")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"empty bounding box {self.bbox}")
        for a, b in self.excluded:
            if any(x < l or y > h or y <= x for x, y, l, h in zip(a, b, lo, hi)):
                raise ValueError(f"excluded box {(a, b)} is not inside the bounding box")

    @property
    def shape(self) -> tuple[int, int, int]:
        lo, hi = self.bbox
        return tuple(h - l for l, h in zip(lo, hi))

    def voxel_mask(self) -> np.ndarray:
        lo, _ = self.bbox
        mask = np.ones(self.shape, dtype=bool)
        for a, b in self.excluded:
            sl = tuple(slice(x - l, y - l) for x, y, l in zip(a, b, lo))
            mask[sl] = False
        return mask

    @property
    def volume(self) -> float:
        return float(self.voxel_mask().sum()) * self.unit**3

    def refinement_for(self, inv_h: int) -> int:
        """Cubes per voxel edge giving a cube side of ``1/inv_h``."""
        n = inv_h * self.unit
        if n < 1 - 1e-12 or abs(n - round(n)) > 1e-9:
            raise ValueError(f"1/h={inv_h} is not compatible with voxel unit {self.unit}")
        return int(round(n))

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelDomainSpec":
        return cls(
            bbox=(tuple(d["bbox"][0]), tuple(d["bbox"][1])),
            excluded=tuple((tuple(a), tuple(b)) for a, b in d.get("excluded", [])),
            unit=float(d.get("unit", 1.0)),
        )

    def to_dict(self) -> dict:
        return {
            "bbox": [list(self.bbox[0]), list(self.bbox[1])],
            "excluded": [[list(a), list(b)] for a, b in self.excluded],
            "unit": self.unit,
        }


@dataclass(frozen=True)
class BoundaryComponent:
    id: int
    faces: np.ndarray

    @property
    def exterior(self) -> bool:
        return self.id == 0


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (NV, 3)
    elements: np.ndarray  # (NE, 4) vertex ids, positively oriented
    volumes: np.ndarray  # (NE,)
    diameters: np.ndarray  # (NE,) longest edge
    elem_faces: np.ndarray  # (NE, 4) face i is opposite local vertex i
    elem_face_sign: np.ndarray  # (NE, 4) +1 if the global face normal points out of the element
    faces: np.ndarray  # (NF, 3) sorted vertex ids
    face_area: np.ndarray
    face_normal: np.ndarray  # (NF, 3) global orientation
    face_tangents: np.ndarray  # (NF, 2, 3) frame from face_frame
    face_centroid: np.ndarray
    face_elems: np.ndarray  # (NF, 2), -1 where absent
    face_local: np.ndarray  # (NF, 2) local face index inside face_elems
    face_component: np.ndarray  # (NF,) boundary component id, -1 for interior faces
    n_components: int
    spec: VoxelDomainSpec | None = None
    refinement: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.face_elems[:, 1] < 0

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    def element_vertices(self, elems=None) -> np.ndarray:
        idx = self.elements if elems is None else self.elements[elems]
        return self.vertices[idx]

    def face_vertices(self, faces=None) -> np.ndarray:
        idx = self.faces if faces is None else self.faces[faces]
        return self.vertices[idx]

    def outward_normals(self) -> np.ndarray:
        """(NE, 4, 3) element-outward unit normals."""
        return self.face_normal[self.elem_faces] * self.elem_face_sign[..., None]


def _kuhn_tets() -> np.ndarray:
    """Corner indices (bit pattern x + 2y + 4z) of the six Kuhn tetrahedra."""
    corner = np.array([[(c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)], dtype=float)
    tets = []
    for perm in itertools.permutations(range(3)):
        bits = [0]
        cur = 0
        for ax in perm[:2]:
            cur |= 1 << ax
            bits.append(cur)
        bits.append(7)
        p = corner[bits]
        if np.linalg.det(p[1:] - p[0]) < 0:
            bits[1], bits[2] = bits[2], bits[1]
        tets.append(bits)
    return np.array(tets, dtype=np.int64)


KUHN_TETS = _kuhn_tets()


def face_frames(normals: np.ndarray) -> np.ndarray:
    """Tangent pairs (N, 2, 3) so that (n, t1, t2) is right-handed orthonormal.

    t1 is the unit projection of the coordinate axis least aligned with n
    (lowest index on ties), t2 = n x t1.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    k = np.argmin(np.abs(normals), axis=1)
    a = np.zeros_like(normals)
    a[np.arange(len(normals)), k] = 1.0
    t1 = a - np.sum(a * normals, axis=1)[:, None] * normals
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(normals, t1)
    return np.stack([t1, t2], axis=1)


def face_frame(vertices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n, t1, t2) for a triangle given by three points in the stored vertex order."""
    v = np.asarray(vertices, dtype=float)
    c = np.cross(v[1] - v[0], v[2] - v[0])
    nrm = np.linalg.norm(c)
    scale = max(np.linalg.norm(v[1] - v[0]), np.linalg.norm(v[2] - v[0]), 1e-300)
    if nrm <= 1e-14 * scale**2:
        raise ValueError("zero-area face")
    n = c / nrm
    t = face_frames(n[None])[0]
    return n, t[0], t[1]


def build_mesh(spec: VoxelDomainSpec, n: int = 1) -> Mesh:
    """Kuhn-subdivided mesh with ``n`` cubes per voxel edge."""
    if n < 1:
        raise ValueError("refinement level must be >= 1")
    mask = spec.voxel_mask()
    if not mask.any():
        raise ValueError("domain is empty")
    _, ncomp = ndimage.label(mask)  # default structure is face connectivity
    if ncomp != 1:
        raise ValueError(f"voxel set is not face-connected ({ncomp} pieces)")

    fine = mask.repeat(n, 0).repeat(n, 1).repeat(n, 2)
    h = spec.unit / n
    origin = np.array(spec.bbox[0], dtype=float) * spec.unit
    cubes = np.argwhere(fine)  # (NC, 3), C order

    offs = np.array([[(c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)])
    corners = cubes[:, None, :] + offs[None, :, :]  # (NC, 8, 3)
    shp = np.array(fine.shape) + 1
    lin = np.ravel_multi_index(corners.reshape(-1, 3).T, shp)
    used, inv = np.unique(lin, return_inverse=True)
    vertices = origin + h * np.stack(np.unravel_index(used, shp), axis=1).astype(float)
    corner_ids = inv.reshape(-1, 8)
    elements = corner_ids[:, KUHN_TETS].reshape(-1, 4)
    return _finish(vertices, elements, spec, n)


def _finish(vertices, elements, spec=None, n=1) -> Mesh:
    X = vertices[elements]  # (NE, 4, 3)
    d = X[:, 1:] - X[:, :1]
    det = np.linalg.det(d)
    if np.any(det <= 0):
        raise ValueError("non-positive element volume")
    volumes = det / 6.0
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    diam = np.max(np.stack([np.linalg.norm(X[:, i] - X[:, j], axis=1) for i, j in pairs], axis=1), axis=1)

    local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    tri = np.sort(elements[:, local], axis=2).reshape(-1, 3)
    faces, finv, counts = np.unique(tri, axis=0, return_inverse=True, return_counts=True)
    finv = finv.ravel()
    if np.any(counts > 2):
        raise ValueError("non-conforming mesh: face shared by more than two elements")
    ne = elements.shape[0]
    nf = faces.shape[0]
    elem_faces = finv.reshape(ne, 4)

    P = vertices[faces]
    cr = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    area = 0.5 * np.linalg.norm(cr, axis=1)
    normal = cr / (2.0 * area)[:, None]
    centroid = P.mean(axis=1)
    tangents = face_frames(normal)

    opp = X  # local vertex i is opposite face i
    outward = centroid[elem_faces] - opp
    elem_face_sign = np.where(np.sum(normal[elem_faces] * outward, axis=2) > 0, 1, -1).astype(np.int8)

    order = np.argsort(finv, kind="stable")
    e_of = order // 4
    l_of = order % 4
    start = np.concatenate([[0], np.cumsum(counts)])
    face_elems = -np.ones((nf, 2), dtype=np.int64)
    face_local = -np.ones((nf, 2), dtype=np.int64)
    face_elems[:, 0] = e_of[start[:-1]]
    face_local[:, 0] = l_of[start[:-1]]
    two = counts == 2
    face_elems[two, 1] = e_of[start[:-1][two] + 1]
    face_local[two, 1] = l_of[start[:-1][two] + 1]

    comp = -np.ones(nf, dtype=np.int64)
    bfaces = np.flatnonzero(~two)
    labels = _label_boundary(faces, centroid, bfaces)
    comp[bfaces] = labels
    ncomp = int(labels.max()) + 1 if labels.size else 0

    arrays = dict(
        vertices=vertices,
        elements=elements,
        volumes=volumes,
        diameters=diam,
        elem_faces=elem_faces,
        elem_face_sign=elem_face_sign,
        faces=faces,
        face_area=area,
        face_normal=normal,
        face_tangents=tangents,
        face_centroid=centroid,
        face_elems=face_elems,
        face_local=face_local,
        face_component=comp,
    )
    for a in arrays.values():
        a.setflags(write=False)
    return Mesh(**arrays, n_components=ncomp, spec=spec, refinement=n)


def _label_boundary(faces, centroid, bfaces) -> np.ndarray:
    """Flood-fill boundary faces over shared edges; exterior component gets 0."""
    if bfaces.size == 0:
        return np.zeros(0, dtype=np.int64)
    bf = faces[bfaces]
    edges = np.concatenate([bf[:, [0, 1]], bf[:, [0, 2]], bf[:, [1, 2]]])
    owner = np.tile(np.arange(len(bfaces)), 3)
    _, einv = np.unique(edges, axis=0, return_inverse=True)
    einv = einv.ravel()
    # face-edge incidence; faces sharing an edge are connected
    inc = coo_matrix((np.ones_like(owner), (owner, einv))).tocsr()
    adj = inc @ inc.T
    _, raw = connected_components(adj, directed=False)
    # exterior: component holding the face with the smallest centroid x
    ext = raw[np.argmin(centroid[bfaces, 0])]
    order = [ext] + [c for c in dict.fromkeys(raw.tolist()) if c != ext]
    remap = np.empty(raw.max() + 1, dtype=np.int64)
    remap[order] = np.arange(len(order))
    return remap[raw]


def boundary_components(mesh: Mesh) -> list[BoundaryComponent]:
    return [
        BoundaryComponent(i, np.flatnonzero(mesh.face_component == i))
        for i in range(mesh.n_components)
    ]


def mesh_from_arrays(vertices, elements) -> Mesh:
    """Mesh from explicit arrays (used for single elements and tests).

    Elements with negative orientation are flipped.
    """
    vertices = np.array(vertices, dtype=float)
    elements = np.array(elements, dtype=np.int64).copy()
    X = vertices[elements]
    det = np.linalg.det(X[:, 1:] - X[:, :1])
    flip = det < 0
    elements[flip, 1], elements[flip, 2] = elements[flip, 2].copy(), elements[flip, 1].copy()
    return _finish(vertices, elements)
