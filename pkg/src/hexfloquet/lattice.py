"""Heavy-hexagon lattices, color-code patches, and structural validation.

Everything lives on an integer grid.  Data (vertex) qubits sit at
even-even coordinates, edge ancillas at odd-coordinate positions between
them.  A hexagonal plaquette is named by its center, which has odd ``cy``
and even ``cx``; centers exist where ``cx % 4 == 2`` on rows with
``cy % 4 == 1`` and where ``cx % 4 == 0`` on rows with ``cy % 4 == 3``.

Plaquettes are 3-colored by ``plaquette_color`` and every edge carries the
third color distinct from its two flanking plaquettes.  Open patches are
truncated so that every boundary vertex stays trivalent by adding dangling
edges; the four corner plaquettes removed by a :class:`PatchSpec` corner
choice split the boundary into disjoint horizontal (Z) and vertical (X)
segments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Literal, Mapping, Sequence

Coord = tuple[int, int]
Color = Literal["red", "green", "blue"]
Basis = Literal["X", "Z"]

COLORS: tuple[Color, ...] = ("red", "green", "blue")

# Ring offsets around a hexagon center.  Ancilla slot k sits between
# ring vertices k and k+1 (cyclically).
VERTEX_OFFSETS: tuple[Coord, ...] = ((-2, -1), (0, -1), (2, -1), (2, 1), (0, 1), (-2, 1))
ANCILLA_OFFSETS: tuple[Coord, ...] = ((-1, -1), (1, -1), (2, 0), (1, 1), (-1, 1), (-2, 0))


def is_center(coord: Coord) -> bool:
    """True if ``coord`` is a valid hexagon-center position."""
    cx, cy = coord
    if cy % 2 == 0 or cx % 2 != 0:
        return False
    return cx % 4 == (2 if cy % 4 == 1 else 0)


def plaquette_color(center: Coord) -> Color:
    """3-coloring of hexagon centers: constant along (6, 2) and (12, 0) steps."""
    cx, cy = center
    return ("blue", "red", "green")[((cx - 3 * (cy - 1) - 2) % 12) // 4]


def edge_flanks(pos: Coord) -> tuple[Coord, Coord]:
    """The two hexagon centers flanking an edge slot (as formal positions)."""
    x, y = pos
    if x % 2 == 1:  # horizontal edge: one center above, one below
        flanks = []
        for cy in (y - 1, y + 1):
            want = 2 if cy % 4 == 1 else 0
            cx = x - 1 if (x - 1) % 4 == want else x + 1
            flanks.append((cx, cy))
        return flanks[0], flanks[1]
    return ((x - 2, y), (x + 2, y))  # vertical edge: centers left and right


def edge_color(pos: Coord) -> Color:
    """Edge color: the third color not carried by either flanking plaquette."""
    a, b = (plaquette_color(c) for c in edge_flanks(pos))
    (third,) = set(COLORS) - {a, b}
    return third


def edge_endpoints(pos: Coord) -> tuple[Coord, Coord]:
    """The two vertex positions an edge slot connects."""
    x, y = pos
    if x % 2 == 1:
        return ((x - 1, y), (x + 1, y))
    return ((x, y - 1), (x, y + 1))


def vertex_parity(coord: Coord) -> Literal["up", "down"]:
    """Checkerboard bipartition of data vertices; every edge joins up to down."""
    x, y = coord
    return "up" if ((x + y) // 2) % 2 == 0 else "down"


@dataclass(frozen=True)
class Edge:
    """One edge slot: an interior two-qubit check site or a dangling edge.

    ``endpoints`` holds the existing vertex coordinates (two for interior
    edges, one for dangling edges).  ``basis`` is the fixed single-qubit
    measurement basis of a dangling edge, or None for interior edges and
    for dangling slots that no boundary plaquette uses.
    """

    pos: Coord
    color: Color
    endpoints: tuple[Coord, ...]
    role: Literal["interior", "dangling"]
    basis: Basis | None = None

    @property
    def horizontal(self) -> bool:
        return self.pos[0] % 2 == 1


@dataclass(frozen=True)
class Plaquette:
    """A (possibly truncated) plaquette with its existing ring vertices.

    ``vertices`` is in ring order; for truncated plaquettes it starts at
    the beginning of the surviving open path.  ``boundary`` is "Z" for
    horizontally truncated plaquettes, "X" for vertically truncated ones
    and "none" in the bulk.
    """

    center: Coord
    color: Color
    vertices: tuple[Coord, ...]
    truncated: bool
    boundary: Literal["X", "Z", "none"]


@dataclass(frozen=True)
class PatchSpec:
    """Shape request for an open heavy-hex patch.

    ``width`` counts plaquette columns (multiple of 3), ``height``
    plaquette rows (multiple of 2).  ``corner`` picks one of the three
    corner-plaquette removal choices; "A" additionally drops the
    top-right and bottom-left corner vertices.
    """

    protocol: str = "css-floquet"
    width: int = 3
    height: int = 2
    corner: Literal["A", "B", "C"] = "A"
    include_dangling: bool = False
    distance: int | None = None

    @classmethod
    def from_distance(cls, d: int, **kwargs) -> "PatchSpec":
        if d < 4 or (d - 1) % 3 != 0:
            raise ValueError(f"patch distances follow d = 3k + 1 with k >= 1, got {d}")
        return cls(width=d - 1, height=2 * (d - 1) // 3, distance=d, **kwargs)


@dataclass
class Lattice:
    """A built lattice with its qubit layout.

    ``vertices`` are data-qubit coordinates sorted by (y, x); the index of
    a coordinate in this tuple is its qubit id.  Interior-edge ancillas
    are numbered next, then (only when ``include_dangling``) one physical
    qubit per dangling edge.  ``qubit_map`` maps each allocated coordinate
    to its qubit index.
    """

    kind: str
    vertices: tuple[Coord, ...]
    edges: tuple[Edge, ...]
    plaquettes: tuple[Plaquette, ...]
    qubit_map: dict[Coord, int]
    shape: tuple[int, int] | None = None
    corner: str | None = None
    removed_corners: tuple[Coord, ...] = ()
    grey: tuple[Coord, ...] = ()
    include_dangling: bool = False
    periodic: bool = False

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_map)

    @property
    def data_qubits(self) -> tuple[int, ...]:
        return tuple(self.qubit_map[v] for v in self.vertices)

    def interior_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.role == "interior")

    def dangling_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.role == "dangling")

    def ancilla(self, edge: Edge) -> int:
        """Qubit index of the ancilla (interior) or physical qubit (dangling)."""
        return self.qubit_map[edge.pos]

    def plaquette_at(self, center: Coord) -> Plaquette:
        for p in self.plaquettes:
            if p.center == center:
                return p
        raise KeyError(center)

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "corner": self.corner,
            "shape": list(self.shape) if self.shape else None,
            "periodic": self.periodic,
            "include_dangling": self.include_dangling,
            "vertices": [list(v) for v in self.vertices],
            "edges": [
                {
                    "pos": list(e.pos),
                    "color": e.color,
                    "endpoints": [list(p) for p in e.endpoints],
                    "role": e.role,
                    "basis": e.basis,
                }
                for e in self.edges
            ],
            "plaquettes": [
                {
                    "center": list(p.center),
                    "color": p.color,
                    "vertices": [list(v) for v in p.vertices],
                    "truncated": p.truncated,
                    "boundary": p.boundary,
                }
                for p in self.plaquettes
            ],
            "removed_corners": [list(c) for c in self.removed_corners],
            "grey": [list(g) for g in self.grey],
            "qubit_map": [[x, y, i] for (x, y), i in sorted(self.qubit_map.items(), key=lambda kv: kv[1])],
        }
        return json.dumps(doc, sort_keys=True, indent=1)


def _assign_qubits(
    vertices: Sequence[Coord], edges: Sequence[Edge], include_dangling: bool
) -> dict[Coord, int]:
    qubit_map: dict[Coord, int] = {}
    for v in sorted(vertices, key=lambda c: (c[1], c[0])):
        qubit_map[v] = len(qubit_map)
    for e in sorted(edges, key=lambda e: (e.pos[1], e.pos[0])):
        if e.role == "interior":
            qubit_map[e.pos] = len(qubit_map)
    if include_dangling:
        for e in sorted(edges, key=lambda e: (e.pos[1], e.pos[0])):
            if e.role == "dangling":
                qubit_map[e.pos] = len(qubit_map)
    return qubit_map


def _ring(center: Coord) -> tuple[Coord, ...]:
    cx, cy = center
    return tuple((cx + dx, cy + dy) for dx, dy in VERTEX_OFFSETS)


def _ring_order(live: Sequence[Coord], center: Coord) -> tuple[Coord, ...]:
    """Live ring vertices in cyclic order, rotated to start an open path."""
    ring = _ring(center)
    present = [v in live for v in ring]
    if all(present):
        return ring
    # rotate so position 0 follows a missing vertex: the result walks the
    # surviving path in order
    start = next(i for i in range(6) if present[i] and not present[i - 1])
    ordered = [ring[(start + k) % 6] for k in range(6)]
    return tuple(v for v in ordered if v in live)


def _corner_removals(xmax: int, ymax: int, corner: str) -> tuple[set[Coord], list[Coord]]:
    """Vertices and plaquette centers dropped by a corner choice.

    Each choice removes one corner plaquette per corner so the truncated
    boundary splits into disjoint horizontal and vertical groups:

    - "A" removes the top-right and bottom-left corner vertices, dropping
      the horizontal corner plaquettes at top-left/bottom-right and the
      vertical ones at top-right/bottom-left.
    - "B" keeps all vertices and drops the complementary plaquette at
      every corner.
    - "C" keeps all vertices and drops the horizontal plaquette at the
      top corners and the vertical plaquette at the bottom corners.
    """
    if corner == "A":
        removed_vertices = {(xmax, 0), (0, ymax)}
        removed_centers = [(0, -1), (xmax, 1), (0, ymax - 1), (xmax, ymax + 1)]
    elif corner == "B":
        removed_vertices = set()
        removed_centers = [(-2, 1), (xmax - 2, -1), (2, ymax + 1), (xmax + 2, ymax - 1)]
    elif corner == "C":
        removed_vertices = set()
        removed_centers = [(0, -1), (xmax - 2, -1), (0, ymax - 1), (xmax + 2, ymax - 1)]
    else:
        raise ValueError(f"corner choice must be A, B or C, got {corner!r}")
    return removed_vertices, removed_centers


def build_hh_patch(spec: PatchSpec) -> Lattice:
    """Build an open heavy-hex patch for the given :class:`PatchSpec`."""
    if spec.height < 2 or spec.height % 2 != 0:
        raise ValueError(f"patch height must be a positive multiple of 2, got {spec.height}")
    if spec.width < 3 or spec.width % 3 != 0:
        raise ValueError(f"patch width must be a positive multiple of 3, got {spec.width}")
    xmax = 4 * spec.width + 2
    ymax = 2 * spec.height
    removed_vertices, removed_centers = _corner_removals(xmax, ymax, spec.corner)

    vertices = [
        (x, y)
        for y in range(0, ymax + 1, 2)
        for x in range(0, xmax + 1, 2)
        if (x, y) not in removed_vertices
    ]
    vertex_set = set(vertices)

    # plaquettes: all centers with at least two existing ring vertices,
    # minus the removed corner plaquettes
    plaquettes: list[Plaquette] = []
    kept_centers: dict[Coord, Plaquette] = {}
    for cy in range(-1, ymax + 2, 2):
        for cx in range(-2, xmax + 3, 2):
            if not is_center((cx, cy)):
                continue
            live = [v for v in _ring((cx, cy)) if v in vertex_set]
            if len(live) < 2 or (cx, cy) in removed_centers:
                continue
            missing = [v for v in _ring((cx, cy)) if v not in vertex_set]
            if not missing:
                boundary: Literal["X", "Z", "none"] = "none"
            else:
                # horizontal truncation (missing rows, or a removed corner
                # vertex on the top/bottom row) votes Z; vertical votes X
                z_votes = sum(1 for (x, y) in missing if y < 0 or y > ymax or (x, y) in removed_vertices)
                x_votes = len(missing) - z_votes
                if z_votes == x_votes:
                    raise AssertionError(f"ambiguous truncation at {(cx, cy)}")
                boundary = "Z" if z_votes > x_votes else "X"
            plq = Plaquette(
                center=(cx, cy),
                color=plaquette_color((cx, cy)),
                vertices=_ring_order(live, (cx, cy)),
                truncated=bool(missing),
                boundary=boundary,
            )
            plaquettes.append(plq)
            kept_centers[(cx, cy)] = plq

    # edge slots with at least one existing endpoint
    edges: list[Edge] = []
    h_slots = [(x, y) for y in range(0, ymax + 1, 2) for x in range(-1, xmax + 2, 2)]
    v_slots = [
        (x, y)
        for y in range(-1, ymax + 2, 2)
        for x in range(0, xmax + 1, 2)
        if x % 4 == (0 if y % 4 == 1 else 2)
    ]
    for pos in h_slots + v_slots:
        existing = tuple(v for v in edge_endpoints(pos) if v in vertex_set)
        if not existing:
            continue
        basis: Basis | None = None
        if len(existing) == 1:
            # a dangling edge serves the boundary segment of the unique kept
            # truncated plaquette beside it, and inherits that segment's basis
            labels = {
                kept_centers[c].boundary
                for c in edge_flanks(pos)
                if c in kept_centers and kept_centers[c].truncated
            }
            if len(labels) > 1:
                raise AssertionError(f"dangling edge {pos} flanks mixed boundaries {labels}")
            basis = labels.pop() if labels else None  # type: ignore[assignment]
        edges.append(
            Edge(
                pos=pos,
                color=edge_color(pos),
                endpoints=existing,
                role="interior" if len(existing) == 2 else "dangling",
                basis=basis,
            )
        )

    qubit_map = _assign_qubits(vertices, edges, spec.include_dangling)
    return Lattice(
        kind="hh-patch",
        vertices=tuple(sorted(vertices, key=lambda c: (c[1], c[0]))),
        edges=tuple(edges),
        plaquettes=tuple(plaquettes),
        qubit_map=qubit_map,
        shape=(xmax, ymax),
        corner=spec.corner,
        removed_corners=tuple(removed_centers),
        include_dangling=spec.include_dangling,
    )


def build_hh_torus(lx: int, ly: int) -> Lattice:
    """Heavy-hex lattice on a torus with periods ``lx`` (mult. of 12) and ``ly`` (mult. of 4)."""
    if lx % 12 != 0 or lx <= 0:
        raise ValueError(f"torus x-period must be a positive multiple of 12, got {lx}")
    if ly % 4 != 0 or ly <= 0:
        raise ValueError(f"torus y-period must be a positive multiple of 4, got {ly}")

    def wrap(c: Coord) -> Coord:
        return (c[0] % lx, c[1] % ly)

    vertices = [(x, y) for y in range(0, ly, 2) for x in range(0, lx, 2)]
    vertex_set = set(vertices)

    edges = []
    h_slots = [(x, y) for y in range(0, ly, 2) for x in range(1, lx, 2)]
    v_slots = [
        (x, y)
        for y in range(1, ly, 2)
        for x in range(0, lx, 2)
        if x % 4 == (0 if y % 4 == 1 else 2)
    ]
    for pos in h_slots + v_slots:
        endpoints = tuple(wrap(v) for v in edge_endpoints(pos))
        assert all(v in vertex_set for v in endpoints)
        edges.append(Edge(pos=pos, color=edge_color(pos), endpoints=endpoints, role="interior"))

    plaquettes = []
    for cy in range(1, ly, 2):
        for cx in range(0, lx, 2):
            if not is_center((cx, cy)):
                continue
            ring = tuple(wrap(v) for v in _ring((cx, cy)))
            plaquettes.append(
                Plaquette(
                    center=(cx, cy),
                    color=plaquette_color((cx, cy)),
                    vertices=ring,
                    truncated=False,
                    boundary="none",
                )
            )

    qubit_map = _assign_qubits(vertices, edges, include_dangling=False)
    return Lattice(
        kind="hh-torus",
        vertices=tuple(sorted(vertices, key=lambda c: (c[1], c[0]))),
        edges=tuple(edges),
        plaquettes=tuple(plaquettes),
        qubit_map=qubit_map,
        shape=(lx, ly),
        periodic=True,
    )


def hexagon_cell() -> Lattice:
    """A single closed hexagon: 6 vertices, 6 edges, 1 plaquette."""
    center = (2, 1)
    vertices = _ring(center)
    vertex_set = set(vertices)
    edges = []
    for k, (dx, dy) in enumerate(ANCILLA_OFFSETS):
        pos = (center[0] + dx, center[1] + dy)
        endpoints = tuple(v for v in edge_endpoints(pos) if v in vertex_set)
        assert len(endpoints) == 2
        edges.append(Edge(pos=pos, color=edge_color(pos), endpoints=endpoints, role="interior"))
    plaquettes = (
        Plaquette(
            center=center,
            color=plaquette_color(center),
            vertices=vertices,
            truncated=False,
            boundary="none",
        ),
    )
    qubit_map = _assign_qubits(vertices, edges, include_dangling=False)
    return Lattice(
        kind="hex-cell",
        vertices=tuple(sorted(vertices, key=lambda c: (c[1], c[0]))),
        edges=tuple(edges),
        plaquettes=plaquettes,
        qubit_map=qubit_map,
    )


# --------------------------------------------------------------------------
# color-code patches


def _triangle_row_widths(d: int) -> list[int]:
    """Rightmost live x per data row of the distance-d triangle."""
    turn = (d - 1) // 2
    widths = []
    for m in range(d):
        if m < turn:
            widths.append(4 + 6 * m)
        elif m == turn:
            widths.append(6 * turn + 2)
        else:
            widths.append(6 * turn + 2 - 6 * (m - turn))
    return widths


def _triangle_live(d: int) -> set[Coord]:
    live = set()
    for m, w in enumerate(_triangle_row_widths(d)):
        for x in range(2, w + 1, 2):
            live.add((x, 2 * m))
    return live


def _color_faces(live: set[Coord]) -> list[tuple[Coord, tuple[Coord, ...]]]:
    """Plaquette centers with at least four live ring vertices."""
    xs = [x for x, _ in live]
    ys = [y for _, y in live]
    faces = []
    for cy in range(min(ys) - 1, max(ys) + 2, 2):
        for cx in range(min(xs) - 2, max(xs) + 3, 2):
            if not is_center((cx, cy)):
                continue
            kept = [v for v in _ring((cx, cy)) if v in live]
            if len(kept) >= 4:
                faces.append(((cx, cy), _ring_order(kept, (cx, cy))))
    return faces


def _color_lattice(kind: str, live: set[Coord], grey: set[Coord], expect_k: int) -> Lattice:
    faces = _color_faces(live)
    covered = set()
    for _, kept in faces:
        if len(kept) % 2 != 0:
            raise AssertionError(f"odd face at {faces}")
        covered |= set(kept)
    assert covered == live, "live qubits must all sit on some face"

    # ancilla slots: ring positions whose two neighbouring data qubits are live
    edge_pos = {}
    for (cx, cy), _ in faces:
        ring = _ring((cx, cy))
        for k, (dx, dy) in enumerate(ANCILLA_OFFSETS):
            pos = (cx + dx, cy + dy)
            if ring[k] in live and ring[(k + 1) % 6] in live:
                edge_pos[pos] = (ring[k], ring[(k + 1) % 6])
    edges = tuple(
        Edge(pos=pos, color=edge_color(pos), endpoints=pair, role="interior")
        for pos, pair in sorted(edge_pos.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    )
    plaquettes = tuple(
        Plaquette(
            center=center,
            color=plaquette_color(center),
            vertices=kept,
            truncated=len(kept) < 6,
            boundary="none",
        )
        for center, kept in faces
    )
    qubit_map = _assign_qubits(sorted(live), edges, include_dangling=False)
    lattice = Lattice(
        kind=kind,
        vertices=tuple(sorted(live, key=lambda c: (c[1], c[0]))),
        edges=edges,
        plaquettes=plaquettes,
        qubit_map=qubit_map,
        grey=tuple(sorted(grey)),
    )
    k = len(live) - 2 * _face_rank(lattice)
    if k != expect_k:
        raise AssertionError(f"{kind} patch encodes k={k}, expected {expect_k}")
    return lattice


def _face_rank(lattice: Lattice) -> int:
    """GF(2) rank of the face-support matrix."""
    index = {v: i for i, v in enumerate(lattice.vertices)}
    rows = []
    for p in lattice.plaquettes:
        row = 0
        for v in p.vertices:
            row |= 1 << index[v]
        rows.append(row)
    rank = 0
    for col in range(len(index)):
        pivot = next((i for i in range(rank, len(rows)) if (rows[i] >> col) & 1), None)
        if pivot is None:
            continue
        rows[pivot], rows[rank] = rows[rank], rows[pivot]
        for i, r in enumerate(rows):
            if i != rank and (r >> col) & 1:
                rows[i] = r ^ rows[rank]
        rank += 1
    return rank


def _square_live(size: int) -> tuple[set[Coord], set[Coord]]:
    """Live/grey data sets for the square color patch (see build_color_patch).

    The patch is a 24-qubit [[24, 2, 4]] block: four full-width rows flanked
    by two-qubit rows under the right-hand green column.  Its transversal
    gates act as Hadamard+SWAP (transversal H) and CZ (sublattice XS/XSDG)
    on the two encoded qubits, which pins the layout; only this size exists.
    """
    if size != 4:
        raise ValueError(f"the square patch comes in one size (distance 4), got {size}")
    live = {(x, 0) for x in (8, 10)}
    for y in (2, 4, 6, 8):
        live |= {(x, y) for x in (2, 4, 6, 8, 10)}
    live |= {(x, 10) for x in (8, 10)}
    grey = {
        (x, y)
        for x in range(2, 11, 2)
        for y in range(0, 11, 2)
        if x % 2 == 0 and y % 2 == 0
    } - live
    return live, grey


def build_color_patch(kind: str, size: int = 3) -> Lattice:
    """Color-code patches on the heavy-hex grid.

    ``triangle`` (and its smallest instance ``steane``) keeps one red, one
    green and one blue boundary and encodes a single logical qubit;
    ``square`` keeps green vertical and red horizontal boundaries, adds an
    extra corner qubit and encodes two logical qubits.  Grey positions of
    the ambient grid are never allocated.
    """
    if kind == "steane":
        return build_color_patch("triangle", 3)
    if kind == "triangle":
        if size < 3 or size % 2 == 0:
            raise ValueError(f"triangle distance must be odd and >= 3, got {size}")
        live = _triangle_live(size)
        xs = range(0, max(x for x, _ in live) + 3)
        ys = range(0, max(y for _, y in live) + 1)
        grey = {(x, y) for x in xs for y in ys if x % 2 == 0 and y % 2 == 0} - live
        return _color_lattice("triangle", live, grey, expect_k=1)
    if kind == "square":
        live, grey = _square_live(4 if size == 3 else size)
        return _color_lattice("square", live, grey, expect_k=2)
    raise ValueError(f"unknown color patch kind {kind!r}")


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    invariant: str
    offenders: tuple
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, invariant: str, offenders: tuple, detail: str) -> None:
        self.violations.append(Violation(invariant, offenders, detail))


def validate_lattice(lattice: Lattice) -> ValidationReport:
    """Check the structural invariants of a built lattice.

    The report lists each violated invariant with the offending element
    ids; an empty report means the lattice is valid.
    """
    report = ValidationReport()
    vertex_set = set(lattice.vertices)

    # qubit map: a contiguous bijection starting at 0
    indices = sorted(lattice.qubit_map.values())
    if indices != list(range(len(indices))):
        report.add("qubit-map", (), "qubit indices are not contiguous from 0")

    hh = lattice.kind in ("hh-patch", "hh-torus")

    # vertex degree (counting dangling slots) and edge coloring at vertices
    incident: dict[Coord, list[Edge]] = {v: [] for v in lattice.vertices}
    for e in lattice.edges:
        for v in e.endpoints:
            incident[v].append(e)
    for v, edges in incident.items():
        if hh and len(edges) != 3:
            report.add("trivalence", (v,), f"vertex {v} has degree {len(edges)}")
        colors = [e.color for e in edges]
        if len(set(colors)) != len(colors):
            report.add("edge-coloring", (v,), f"repeated edge color at vertex {v}")

    # plaquette coloring: both plaquettes beside an interior edge must have
    # the two colors the edge does not carry
    centers = {p.center: p for p in lattice.plaquettes}
    if hh:
        for e in lattice.interior_edges():
            flanks = [centers[c] for c in _wrapped_flanks(lattice, e.pos) if c in centers]
            for p in flanks:
                if p.color == e.color:
                    report.add(
                        "plaquette-coloring",
                        (e.pos, p.center),
                        f"edge {e.pos} carries the color of adjacent plaquette {p.center}",
                    )
            if len(flanks) == 2 and flanks[0].color == flanks[1].color:
                report.add(
                    "plaquette-coloring",
                    (e.pos, flanks[0].center, flanks[1].center),
                    f"edge {e.pos} separates same-colored plaquettes",
                )

    if lattice.kind == "hh-patch":
        if len(lattice.removed_corners) != 4:
            report.add(
                "corner-removal",
                tuple(lattice.removed_corners),
                f"{len(lattice.removed_corners)} corner plaquettes removed, expected 4",
            )
        xmax, ymax = lattice.shape  # type: ignore[misc]
        rect_corners = {(0, 0), (xmax, 0), (0, ymax), (xmax, ymax)}
        for c in lattice.removed_corners:
            if not rect_corners & set(_ring(c)):
                report.add("corner-removal", (c,), f"removed plaquette {c} is not at a corner")
        for p in lattice.plaquettes:
            label = _expected_boundary(lattice, p)
            if label != p.boundary:
                report.add(
                    "boundary-label",
                    (p.center,),
                    f"plaquette {p.center} labeled {p.boundary}, geometry says {label}",
                )
        n_int = len(lattice.interior_edges())
        n_dang = len(lattice.dangling_edges())
        if 2 * n_int + n_dang != 3 * len(lattice.vertices):
            report.add(
                "trivalence",
                (),
                f"2*{n_int} interior + {n_dang} dangling != 3*{len(lattice.vertices)} vertices",
            )
        n_full = sum(1 for p in lattice.plaquettes if not p.truncated)
        if n_int - len(lattice.vertices) + 1 != n_full:
            report.add(
                "euler",
                (),
                f"E - V + 1 = {n_int - len(lattice.vertices) + 1} but {n_full} full plaquettes",
            )

    if lattice.kind in ("triangle", "square", "hex-cell"):
        for p in lattice.plaquettes:
            if len(p.vertices) % 2 != 0 or len(p.vertices) < 4:
                report.add("face-weight", (p.center,), f"face {p.center} has {len(p.vertices)} vertices")
        for i, p in enumerate(lattice.plaquettes):
            for q in lattice.plaquettes[i + 1 :]:
                overlap = set(p.vertices) & set(q.vertices)
                if len(overlap) % 2 != 0:
                    report.add(
                        "face-overlap",
                        (p.center, q.center),
                        f"faces {p.center} and {q.center} share {len(overlap)} qubits",
                    )
        if set(lattice.grey) & set(lattice.qubit_map):
            report.add("grey", (), "grey positions must not be allocated")

    # every edge endpoint must exist, and edge colors follow the formula
    for e in lattice.edges:
        if any(v not in vertex_set for v in e.endpoints):
            report.add("edge-endpoints", (e.pos,), f"edge {e.pos} touches a missing vertex")
        if not lattice.periodic and e.color != edge_color(e.pos):
            report.add("edge-coloring", (e.pos,), f"edge {e.pos} mis-colored {e.color}")

    return report


def _wrapped_flanks(lattice: Lattice, pos: Coord) -> tuple[Coord, ...]:
    flanks = edge_flanks(pos)
    if not lattice.periodic:
        return flanks
    lx, ly = lattice.shape  # type: ignore[misc]
    return tuple((cx % lx, cy % ly) for cx, cy in flanks)


def _expected_boundary(lattice: Lattice, p: Plaquette) -> str:
    if not p.truncated:
        return "none"
    xmax, ymax = lattice.shape  # type: ignore[misc]
    removed = set()
    if lattice.corner == "A":
        removed = {(xmax, 0), (0, ymax)}
    z_votes = x_votes = 0
    for x, y in _ring(p.center):
        if (x, y) in set(p.vertices):
            continue
        if y < 0 or y > ymax or (x, y) in removed:
            z_votes += 1
        else:
            x_votes += 1
    return "Z" if z_votes > x_votes else "X"
