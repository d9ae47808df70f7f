"""A combinational BLIF subset: .model/.inputs/.outputs/.names/.end.

Each ``.names`` block lists its fan-in gates and the output gate, followed by
cover rows over {0,1,-} that all share one output value (1 for an on-set, 0
for an off-set).  Sequential and hierarchical constructs are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..errors import PreconditionError


class BlifError(PreconditionError):
    def __init__(self, msg: str, line: int | None = None, path: str | None = None):
        where = ""
        if path or line:
            where = f"{path or '<blif>'}:{line}: " if line else f"{path}: "
        super().__init__(where + msg)
        self.line = line


@dataclass
class Gate:
    name: str
    fanins: list[str]
    rows: list[str]            # input parts of the cover rows
    value: str = "1"           # shared output column ("1" on-set, "0" off-set)

    def evaluate(self, vals: list[bool]) -> bool:
        hit = any(all(c == "-" or (c == "1") == v for c, v in zip(r, vals)) for r in self.rows)
        return hit if self.value == "1" else not hit


@dataclass
class BlifNetlist:
    model: str
    inputs: list[str]
    outputs: list[str]
    gates: dict[str, Gate] = field(default_factory=dict)

    def topological(self) -> list[str]:
        """Gate names with every gate after its fan-ins."""
        order: list[str] = []
        state: dict[str, int] = {}
        inputs = set(self.inputs)
        for root in list(self.outputs) + list(self.gates):
            if root in inputs or state.get(root) == 2:
                continue
            stack = [(root, 0)]
            while stack:
                g, i = stack.pop()
                gate = self.gates[g]
                if i == 0:
                    state[g] = 1
                if i < len(gate.fanins):
                    stack.append((g, i + 1))
                    f = gate.fanins[i]
                    if f in inputs or state.get(f) == 2:
                        continue
                    if state.get(f) == 1:
                        raise BlifError(f"combinational cycle through gate {f!r}")
                    stack.append((f, 0))
                else:
                    state[g] = 2
                    order.append(g)
        return order

    def validate(self) -> None:
        inputs = set(self.inputs)
        if len(inputs) != len(self.inputs):
            raise BlifError("duplicate input name")
        for g in self.gates.values():
            if g.name in inputs:
                raise BlifError(f"gate {g.name!r} redefines an input")
            for f in g.fanins:
                if f not in inputs and f not in self.gates:
                    raise BlifError(f"gate {g.name!r} references undefined {f!r}")
        for o in self.outputs:
            if o not in inputs and o not in self.gates:
                raise BlifError(f"output {o!r} is never defined")
        self.topological()

    def simulate(self, assignment: Mapping[str, bool]) -> dict[str, bool]:
        """Output values under an assignment to all inputs."""
        vals = {i: bool(assignment[i]) for i in self.inputs}
        for g in self.topological():
            gate = self.gates[g]
            vals[g] = gate.evaluate([vals[f] for f in gate.fanins])
        return {o: vals[o] for o in self.outputs}

    def depths(self) -> dict[str, int]:
        """Longest distance from an input (inputs have depth 0)."""
        d = {i: 0 for i in self.inputs}
        for g in self.topological():
            fi = self.gates[g].fanins
            d[g] = 1 + max((d[f] for f in fi), default=0)
        return d


def _logical_lines(text: str):
    """Yield (line number, tokens), joining backslash continuations."""
    buf: list[str] = []
    start = 0
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not buf:
            start = no
        if line.endswith("\\"):
            buf.append(line[:-1])
            continue
        buf.append(line)
        toks = " ".join(buf).split()
        buf = []
        if toks:
            yield start, toks
    if buf:
        toks = " ".join(buf).split()
        if toks:
            yield start, toks


def parse_blif(text: str, path: str | None = None) -> BlifNetlist:
    model = None
    inputs: list[str] = []
    outputs: list[str] = []
    gates: dict[str, Gate] = {}
    cur: Gate | None = None
    ended = False
    for no, toks in _logical_lines(text):
        if ended:
            raise BlifError("content after .end", no, path)
        head = toks[0]
        if head.startswith("."):
            cur = None
            if head == ".model":
                if model is not None:
                    raise BlifError("only one .model per file is supported", no, path)
                model = toks[1] if len(toks) > 1 else ""
            elif head == ".inputs":
                inputs.extend(toks[1:])
            elif head == ".outputs":
                outputs.extend(toks[1:])
            elif head == ".names":
                if len(toks) < 2:
                    raise BlifError(".names without an output", no, path)
                name = toks[-1]
                if name in gates:
                    raise BlifError(f"gate {name!r} defined twice", no, path)
                cur = gates[name] = Gate(name, toks[1:-1], [], "1")
                cur._value_set = False  # type: ignore[attr-defined]
            elif head == ".end":
                ended = True
            elif head in (".latch", ".subckt", ".gate", ".mlatch", ".clock", ".search",
                          ".exdc", ".start_kiss", ".wire_load_slope"):
                raise BlifError(f"{head} is not supported (combinational .names only)", no, path)
            else:
                raise BlifError(f"unknown directive {head}", no, path)
            continue
        if cur is None:
            raise BlifError(f"cover row outside a .names block: {' '.join(toks)}", no, path)
        k = len(cur.fanins)
        if k == 0:
            if len(toks) != 1 or toks[0] not in ("0", "1"):
                raise BlifError("constant gate rows must be a single 0 or 1", no, path)
            part, val = "", toks[0]
        else:
            if len(toks) != 2:
                raise BlifError("cover row must be '<inputs> <output>'", no, path)
            part, val = toks
            if len(part) != k or set(part) - set("01-"):
                raise BlifError(f"cover row {part!r} does not match {k} fan-ins", no, path)
            if val not in ("0", "1"):
                raise BlifError(f"output value {val!r} is not 0 or 1", no, path)
        if cur._value_set and val != cur.value:  # type: ignore[attr-defined]
            raise BlifError("mixed on-set and off-set rows in one cover", no, path)
        cur.value = val
        cur._value_set = True  # type: ignore[attr-defined]
        cur.rows.append(part)
    if model is None:
        raise BlifError("missing .model", None, path)
    for g in gates.values():
        for a in ("_value_set",):
            g.__dict__.pop(a, None)
    net = BlifNetlist(model, inputs, outputs, gates)
    try:
        net.validate()
    except BlifError as e:
        raise BlifError(str(e), None, path) from None
    return net


def read_blif(path: str) -> BlifNetlist:
    with open(path) as fh:
        return parse_blif(fh.read(), path)


def print_blif(net: BlifNetlist) -> str:
    out = [f".model {net.model}"]
    if net.inputs:
        out.append(".inputs " + " ".join(net.inputs))
    if net.outputs:
        out.append(".outputs " + " ".join(net.outputs))
    for g in net.gates.values():
        out.append(".names " + " ".join(g.fanins + [g.name]))
        for r in g.rows:
            out.append(f"{r} {g.value}" if r else g.value)
    out.append(".end")
    return "\n".join(out) + "\n"
