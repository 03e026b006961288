"""Clifford circuit IR: gates, measurements, annotations, noise, and a line-oriented text format.

The instruction set is deliberately small — single-qubit Cliffords, CX/CZ/SWAP,
basis measurements, basis resets, Pauli noise channels, and the bookkeeping
instructions (DETECTOR, OBSERVABLE_INCLUDE, QUBIT_COORDS, TICK, REPEAT) needed
to annotate memory experiments.  Measurement records are addressed relative to
the instruction that mentions them: ``rec[-1]`` is the most recent record.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

GATES_1Q = frozenset(["I", "X", "Y", "Z", "H", "S", "SDG", "XS", "XSDG"])
GATES_2Q = frozenset(["CX", "CZ", "SWAP"])
MEASUREMENTS = frozenset(["MX", "MY", "MZ"])
RESETS = frozenset(["RX", "RZ"])
NOISE_1Q = frozenset(["DEPOLARIZE1", "X_ERROR", "Z_ERROR"])
NOISE_2Q = frozenset(["DEPOLARIZE2"])
NOISE = NOISE_1Q | NOISE_2Q | frozenset(["FLIP_MEAS"])
ANNOTATIONS = frozenset(["DETECTOR", "OBSERVABLE_INCLUDE", "QUBIT_COORDS", "TICK"])
ALL_NAMES = GATES_1Q | GATES_2Q | MEASUREMENTS | RESETS | NOISE | ANNOTATIONS


@dataclass(frozen=True)
class Instruction:
    """One circuit instruction: a name, parenthesised float args, qubit targets, record targets."""

    name: str
    targets: tuple[int, ...] = ()
    args: tuple[float, ...] = ()
    rec: tuple[int, ...] = ()  # negative offsets into the measurement record

    def __str__(self) -> str:
        out = self.name
        if self.args:
            out += "(" + ", ".join(_fmt(a) for a in self.args) + ")"
        for t in self.targets:
            out += f" {t}"
        for r in self.rec:
            out += f" rec[{r}]"
        return out


@dataclass(frozen=True)
class Repeat:
    """A repeated block of instructions."""

    count: int
    body: tuple["Instruction | Repeat", ...]


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


class Circuit:
    """A sequence of instructions plus derived counts.

    Built by appending; treated as immutable once a builder hands it over.
    """

    def __init__(self, instructions=()):
        self.instructions: list[Instruction | Repeat] = list(instructions)

    # -- construction -----------------------------------------------------
    def append(self, name, targets=(), args=(), rec=()):
        if isinstance(targets, int):
            targets = (targets,)
        self.instructions.append(
            Instruction(name, tuple(targets), tuple(args), tuple(rec))
        )
        return self

    def append_repeat(self, count: int, body: "Circuit"):
        self.instructions.append(Repeat(count, tuple(body.instructions)))
        return self

    def tick(self):
        return self.append("TICK")

    # -- iteration --------------------------------------------------------
    def iter_flat(self):
        """Yield instructions with REPEAT blocks unrolled."""
        return _iter_flat(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __len__(self):
        return len(self.instructions)

    def __eq__(self, other):
        return isinstance(other, Circuit) and self.instructions == other.instructions

    def copy(self) -> "Circuit":
        return Circuit(self.instructions)

    # -- derived counts ---------------------------------------------------
    @property
    def num_measurements(self) -> int:
        return sum(
            len(i.targets) for i in self.iter_flat() if i.name in MEASUREMENTS
        )

    @property
    def num_qubits(self) -> int:
        n = 0
        for i in self.iter_flat():
            if i.name != "QUBIT_COORDS" and i.targets:
                n = max(n, max(i.targets) + 1)
            elif i.name == "QUBIT_COORDS":
                n = max(n, i.targets[0] + 1)
        return n

    @property
    def num_detectors(self) -> int:
        return sum(1 for i in self.iter_flat() if i.name == "DETECTOR")

    @property
    def num_observables(self) -> int:
        ks = {int(i.args[0]) for i in self.iter_flat() if i.name == "OBSERVABLE_INCLUDE"}
        return (max(ks) + 1) if ks else 0

    def qubit_coords(self) -> dict[int, tuple[float, ...]]:
        return {
            i.targets[0]: i.args
            for i in self.iter_flat()
            if i.name == "QUBIT_COORDS"
        }

    def __str__(self) -> str:
        return serialize_circuit(self)

    def __repr__(self) -> str:
        return (
            f"<Circuit {len(self.instructions)} instructions, "
            f"{self.num_measurements} measurements, {self.num_detectors} detectors>"
        )


def _iter_flat(items):
    for item in items:
        if isinstance(item, Repeat):
            for _ in range(item.count):
                yield from _iter_flat(item.body)
        else:
            yield item


# ---------------------------------------------------------------------------
# validation


class CircuitError(ValueError):
    pass


def validate(circuit: Circuit) -> None:
    """Raise CircuitError on malformed instructions or dangling record references."""
    nrec = 0
    for ins in circuit.iter_flat():
        name = ins.name
        if name not in ALL_NAMES:
            raise CircuitError(f"unknown instruction {name!r}")
        if name == "TICK":
            if ins.targets or ins.args or ins.rec:
                raise CircuitError("TICK takes no targets")
            continue
        if name in GATES_2Q or name in NOISE_2Q:
            if len(ins.targets) % 2:
                raise CircuitError(f"{name} needs an even number of targets")
        if name in GATES_1Q | GATES_2Q | MEASUREMENTS | RESETS:
            if ins.args:
                raise CircuitError(f"{name} takes no args")
        if name in NOISE:
            if len(ins.args) != 1 or not (0.0 <= ins.args[0] <= 1.0):
                raise CircuitError(f"{name} needs a probability in [0, 1]")
        if name == "QUBIT_COORDS" and (len(ins.targets) != 1 or len(ins.args) != 2):
            raise CircuitError("QUBIT_COORDS takes two args and one target")
        if name == "OBSERVABLE_INCLUDE":
            if len(ins.args) != 1 or ins.args[0] != int(ins.args[0]) or ins.args[0] < 0:
                raise CircuitError("OBSERVABLE_INCLUDE needs one nonnegative index arg")
        if name in ("DETECTOR", "OBSERVABLE_INCLUDE", "FLIP_MEAS"):
            for r in ins.rec:
                if r >= 0 or -r > nrec:
                    raise CircuitError(
                        f"{name} references rec[{r}] with only {nrec} records"
                    )
        elif ins.rec:
            raise CircuitError(f"{name} cannot take record targets")
        if ins.targets and name != "QUBIT_COORDS":
            if len(set(ins.targets)) != len(ins.targets):
                raise CircuitError(f"duplicate qubit in one {name} instruction")
        if any(t < 0 for t in ins.targets):
            raise CircuitError("negative qubit target")
        if name in MEASUREMENTS:
            nrec += len(ins.targets)


# ---------------------------------------------------------------------------
# text format


def serialize_circuit(circuit: Circuit) -> str:
    """Render to the line-oriented text form; parse(serialize(c)) == c."""
    lines: list[str] = []
    _serialize_into(circuit.instructions, lines, 0)
    return "\n".join(lines) + "\n"


def _serialize_into(items, lines, depth):
    pad = "    " * depth
    for item in items:
        if isinstance(item, Repeat):
            lines.append(f"{pad}REPEAT {item.count} {{")
            _serialize_into(item.body, lines, depth + 1)
            lines.append(f"{pad}}}")
        else:
            lines.append(pad + str(item))


_REC_RE = re.compile(r"rec\[(-\d+)\]")
_NAME_RE = re.compile(r"([A-Z_0-9]+)\s*(?:\(([^)]*)\))?\s*(.*)")


def parse_circuit(text: str) -> Circuit:
    """Parse the text format produced by serialize_circuit."""
    stack: list[list] = [[]]
    counts: list[int] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("REPEAT"):
            m = re.match(r"REPEAT\s+(\d+)\s*\{$", line)
            if not m:
                raise CircuitError(f"bad REPEAT line: {raw!r}")
            counts.append(int(m.group(1)))
            stack.append([])
            continue
        if line == "}":
            if len(stack) == 1:
                raise CircuitError("unmatched closing brace")
            body = stack.pop()
            stack[-1].append(Repeat(counts.pop(), tuple(body)))
            continue
        m = _NAME_RE.fullmatch(line)
        if not m:
            raise CircuitError(f"cannot parse line: {raw!r}")
        name, argstr, tail = m.group(1), m.group(2), m.group(3)
        args = tuple(float(a) for a in argstr.split(",")) if argstr else ()
        rec = tuple(int(r) for r in _REC_RE.findall(tail))
        tail = _REC_RE.sub(" ", tail)
        targets = tuple(int(t) for t in tail.split())
        stack[-1].append(Instruction(name, targets, args, rec))
    if len(stack) != 1:
        raise CircuitError("unclosed REPEAT block")
    return Circuit(stack[0])


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    """Uniform circuit-level noise of strength p.

    Channels (all togglable): depolarizing after every 1- and 2-qubit gate,
    record flips on measurements, a basis flip after every reset, and
    depolarizing on idle qubits in any layer that contains a measurement.
    """

    p: float
    after_gate: bool = True
    measurement_flip: bool = True
    reset_flip: bool = True
    idle_during_measurement: bool = True

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"noise strength {self.p} outside [0, 1]")


def apply_noise(circuit: Circuit, model: NoiseModel) -> Circuit:
    """Return a copy of `circuit` with noise channels inserted.

    p=0 returns an identical circuit.  Idle depolarizing targets every known
    qubit (QUBIT_COORDS universe, else max index) untouched by the layer.
    """
    if model.p == 0.0:
        return circuit.copy()
    coords = circuit.qubit_coords()
    universe = sorted(coords) if coords else list(range(circuit.num_qubits))
    out = _noisy_block(circuit.instructions, model, universe)
    return Circuit(out)


def _noisy_block(items, model, universe):
    out: list = []
    layer: list = []

    def flush():
        nonlocal layer
        if not layer:
            return
        touched: set[int] = set()
        has_meas = False
        p = model.p
        for ins in layer:
            out.append(ins)
            if ins.name != "QUBIT_COORDS":
                touched.update(ins.targets)
            if ins.name in GATES_1Q and model.after_gate:
                out.append(Instruction("DEPOLARIZE1", ins.targets, (p,)))
            elif ins.name in GATES_2Q and model.after_gate:
                out.append(Instruction("DEPOLARIZE2", ins.targets, (p,)))
            elif ins.name in MEASUREMENTS:
                has_meas = True
                if model.measurement_flip:
                    k = len(ins.targets)
                    out.append(
                        Instruction("FLIP_MEAS", (), (p,), tuple(range(-k, 0)))
                    )
            elif ins.name == "RZ" and model.reset_flip:
                out.append(Instruction("X_ERROR", ins.targets, (p,)))
            elif ins.name == "RX" and model.reset_flip:
                out.append(Instruction("Z_ERROR", ins.targets, (p,)))
        if has_meas and model.idle_during_measurement:
            idle = tuple(q for q in universe if q not in touched)
            if idle:
                out.append(Instruction("DEPOLARIZE1", idle, (model.p,)))
        layer = []

    for item in items:
        if isinstance(item, Repeat):
            flush()
            out.append(Repeat(item.count, tuple(_noisy_block(item.body, model, universe))))
        elif item.name == "TICK":
            flush()
            out.append(item)
        else:
            layer.append(item)
    flush()
    return out


# ---------------------------------------------------------------------------
# measurement gadgets
#
# Templates return (layers, meta): `layers` is an ordered list of op layers,
# each a list of (name, targets) tuples; `meta` names the role of each local
# measurement (in emission order) so builders can wire records into detectors,
# observables and the Pauli frame.


@dataclass
class GadgetMeta:
    parity: list[int] = field(default_factory=list)  # local recs whose XOR is the 2-body outcome
    frames: list[tuple[str, int, int]] = field(default_factory=list)  # (pauli, qubit, local rec)
    n_meas: int = 0


def _conj(basis: str, qubits):
    """Pre/post layers conjugating an X-basis gadget into `basis` on data qubits."""
    if basis == "X":
        return [], []
    if basis == "Z":
        ops = [("H", q) for q in qubits]
        return ops, list(ops)
    if basis == "Y":
        return [("XS", q) for q in qubits], [("XSDG", q) for q in qubits]
    raise ValueError(f"bad basis {basis!r}")


def parity_gadget(q0: int, q1: int, anc: int, basis: str, style: str):
    """Layered ops + meta for a two-body parity measurement of `basis` ⊗ `basis`.

    Styles: `standard` keeps the data in place and consumes only the edge
    ancilla; `measure_in` moves the state onto the edge qubit, measuring and
    re-preparing the vertex qubits; `reset_out` moves it back (vertices must
    already hold the re-preparation state); `leakage_reducing` composes the
    two so the vertices are measured and reset within one step.
    """
    meta = GadgetMeta()
    if style == "standard":
        if basis == "Z":
            layers = [
                [("RZ", anc)],
                [("CX", (q0, anc))],
                [("CX", (q1, anc))],
                [("MZ", anc)],
            ]
            meta.parity = [0]
            meta.n_meas = 1
            return layers, meta
        pre, post = _conj(basis, (q0, q1))
        layers = [
            [("RZ", anc)],
            [("H", anc)] + pre,
            [("CX", (anc, q0))],
            [("CX", (anc, q1))],
            [("H", anc)] + post,
            [("MZ", anc)],
        ]
        meta.parity = [0]
        meta.n_meas = 1
        return layers, meta

    if style == "measure_in":
        layers, meta = _measure_in(q0, q1, anc, basis)
        return layers, meta
    if style == "reset_out":
        layers, meta = _reset_out(q0, q1, anc, basis)
        return layers, meta
    if style == "leakage_reducing":
        lin, min_ = _measure_in(q0, q1, anc, basis)
        lout, mout = _reset_out(q0, q1, anc, basis)
        meta = GadgetMeta(
            parity=min_.parity,
            frames=min_.frames
            + [(p, q, r + min_.n_meas) for (p, q, r) in mout.frames],
            n_meas=min_.n_meas + mout.n_meas,
        )
        return lin + lout, meta
    raise ValueError(f"bad style {style!r}")


def _measure_in(q0, q1, anc, basis):
    """Parity outcome = XOR of the two vertex records; post-state on the edge qubit."""
    meta = GadgetMeta(parity=[0, 1], n_meas=2)
    if basis == "X":
        layers = [
            [("RZ", anc)],
            [("CX", (q0, anc))],
            [("CX", (q1, anc))],
            [("MX", q0), ("MX", q1)],
            [("RX", q0), ("RX", q1)],
        ]
        meta.frames = [("Z", q0, 0), ("Z", q1, 1)]
    elif basis == "Z":
        layers = [
            [("RX", anc)],
            [("CX", (anc, q0))],
            [("CX", (anc, q1))],
            [("MZ", q0), ("MZ", q1)],
            [("RZ", q0), ("RZ", q1)],
        ]
        meta.frames = [("X", q0, 0), ("X", q1, 1)]
    else:
        raise ValueError("measure_in supports X and Z bases")
    return layers, meta


def _reset_out(q0, q1, anc, basis):
    """Expand the edge-qubit state back onto freshly prepared vertices; one sign record."""
    meta = GadgetMeta(n_meas=1)
    if basis == "X":
        layers = [
            [("CX", (q0, anc))],
            [("CX", (q1, anc))],
            [("MZ", anc)],
        ]
        meta.frames = [("X", q0, 0)]
    elif basis == "Z":
        layers = [
            [("CX", (anc, q0))],
            [("CX", (anc, q1))],
            [("MX", anc)],
        ]
        meta.frames = [("Z", q0, 0)]
    else:
        raise ValueError("reset_out supports X and Z bases")
    return layers, meta


@dataclass
class ParityRecords:
    """Absolute record indices emitted by a parity gadget, with role annotations."""

    records: list[int]
    parity: list[int]  # subset of `records` whose XOR is the two-body outcome
    frames: list[tuple[str, int, int]]  # (pauli, qubit, absolute record)


def emit_parity_measurement(circuit: Circuit, edge, basis: str, style: str = "standard") -> ParityRecords:
    """Append a two-body parity measurement of `edge` to `circuit`.

    `edge` is (q0, q1, ancilla) qubit indices.  Returns the emitted record
    indices; the parity of `.parity` records is the measured two-body outcome.
    """
    q0, q1, anc = edge
    base = circuit.num_measurements
    layers, meta = parity_gadget(q0, q1, anc, basis, style)
    for layer in layers:
        for name, tgt in layer:
            circuit.append(name, tgt)
    recs = list(range(base, base + meta.n_meas))
    return ParityRecords(
        records=recs,
        parity=[base + i for i in meta.parity],
        frames=[(p, q, base + r) for (p, q, r) in meta.frames],
    )


def plaquette_gadget(vertices, ancillas, basis: str, closed: bool):
    """Layered ops + meta for one plaquette stabilizer measurement.

    `vertices` in cyclic order; `ancillas[i]` sits between vertices i and i+1
    (wrapping only when `closed`).  The inner circuit expands the plaquette
    onto its edge qubits with a depth-two CX layer pair, measures every
    vertex (the plaquette value is the XOR of those records), re-prepares
    the vertices, and contracts back; the trailing ancilla records are the
    pair bridges that re-entangle the fresh vertices with the pre-measurement
    state.  All outcome-conditioned reinitialization and restoration signs
    live in `meta.frames` as deferred Pauli corrections — entries sharing a
    qubit compose by XOR of their records:

      * one reinit frame per vertex, conditioned on that vertex's record,
      * one restoration frame per (vertex j, bridge i<j) pair, so vertex j's
        correction is the running parity of the bridges before it.

    On a closed ring the XOR of all bridge records is deterministic (the
    bridge operators multiply to the ancilla preparation parity) — callers
    may emit it as a consistency detector.
    """
    k = len(vertices)
    ne = len(ancillas)
    assert ne == (k if closed else k - 1)
    edge_pairs = [(vertices[i], vertices[(i + 1) % k]) for i in range(ne)]
    # The inner circuit measures X⊗k; the Z version is its conjugate by
    # Hadamards on the data qubits (the ancilla wiring is unchanged), so
    # frame letters swap along with the measurement basis.
    pre, post = _conj(basis, vertices)
    flip, restore = ("Z", "X") if basis == "X" else ("X", "Z")
    layers = []
    if pre:
        layers.append(pre)
    layers.append([("RZ", a) for a in ancillas])
    layers.append([("CX", (u, a)) for (u, _), a in zip(edge_pairs, ancillas)])
    layers.append([("CX", (v, a)) for (_, v), a in zip(edge_pairs, ancillas)])
    layers.append([("MX", q) for q in vertices])
    layers.append([("RX", q) for q in vertices])
    layers.append([("CX", (u, a)) for (u, _), a in zip(edge_pairs, ancillas)])
    layers.append([("CX", (v, a)) for (_, v), a in zip(edge_pairs, ancillas)])
    layers.append([("MZ", a) for a in ancillas])
    if post:
        layers.append(post)
    frames = [(flip, vertices[i], i) for i in range(k)]
    for j in range(1, k):
        frames.extend((restore, vertices[j], k + i) for i in range(min(j, ne)))
    meta = GadgetMeta(parity=list(range(k)), frames=frames, n_meas=k + ne)
    return layers, meta


@dataclass
class PlaquetteRecords:
    records: list[int]
    vertex: list[int]  # plaquette value = XOR of these records
    bridge: list[int]  # per-ancilla pair-bridge records, in edge order
    frames: list[tuple[str, int, int]]  # (pauli, qubit, absolute record)


def emit_plaquette_measurement(circuit: Circuit, plaquette, basis: str) -> PlaquetteRecords:
    """Append one plaquette stabilizer measurement (X or Z) to `circuit`.

    `plaquette` is (vertex_qubits, ancilla_qubits, closed); the measured value
    is the parity of the vertex records, and the vertices come out re-prepared
    with the deferred sign corrections listed in `.frames` (same-qubit entries
    compose by XOR).
    """
    vertices, ancillas, closed = plaquette
    if len(vertices) not in (4, 6):
        raise ValueError(f"plaquette arity {len(vertices)} unsupported")
    base = circuit.num_measurements
    layers, meta = plaquette_gadget(vertices, ancillas, basis, closed)
    for layer in layers:
        for name, tgt in layer:
            circuit.append(name, tgt)
    k = len(vertices)
    return PlaquetteRecords(
        records=list(range(base, base + meta.n_meas)),
        vertex=list(range(base, base + k)),
        bridge=list(range(base + k, base + meta.n_meas)),
        frames=[(p, q, base + r) for (p, q, r) in meta.frames],
    )
