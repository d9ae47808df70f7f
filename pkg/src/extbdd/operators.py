"""Binary boolean operators as truth tables with shortcut predicates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BooleanOperator:
    """An operator given by its truth table ``table[2*a + b] = a op b``.

    ``left_forces[a]`` is true when ``a op x`` is the same for both x, and
    ``right_forces[b]`` when ``x op b`` is; such a leaf decides the result
    of a request on its own.
    """

    name: str
    table: tuple[int, int, int, int]
    left_forces: tuple[bool, bool] = field(init=False)
    right_forces: tuple[bool, bool] = field(init=False)

    def __post_init__(self):
        t = tuple(int(bool(v)) for v in self.table)
        if len(t) != 4:
            raise ValueError("a binary operator needs a 4-entry truth table")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "left_forces", (t[0] == t[1], t[2] == t[3]))
        object.__setattr__(self, "right_forces", (t[0] == t[2], t[1] == t[3]))

    def __call__(self, a: bool, b: bool) -> bool:
        return bool(self.table[2 * int(bool(a)) + int(bool(b))])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.uint8)

    def flipped(self) -> "BooleanOperator":
        """The operator with its arguments swapped."""
        t = self.table
        return BooleanOperator(f"flip({self.name})", (t[0], t[2], t[1], t[3]))

    def __repr__(self):
        return f"BooleanOperator({self.name!r}, {self.table})"


def from_function(name: str, fn) -> BooleanOperator:
    return BooleanOperator(name, tuple(int(bool(fn(a, b))) for a in (0, 1) for b in (0, 1)))


FALSE_OP = BooleanOperator("false", (0, 0, 0, 0))
AND = BooleanOperator("and", (0, 0, 0, 1))
DIFF = BooleanOperator("diff", (0, 0, 1, 0))        # a and not b
LEFT = BooleanOperator("left", (0, 0, 1, 1))
LESS = BooleanOperator("less", (0, 1, 0, 0))        # not a and b
RIGHT = BooleanOperator("right", (0, 1, 0, 1))
XOR = BooleanOperator("xor", (0, 1, 1, 0))
OR = BooleanOperator("or", (0, 1, 1, 1))
NOR = BooleanOperator("nor", (1, 0, 0, 0))
XNOR = BooleanOperator("xnor", (1, 0, 0, 1))
NOT_RIGHT = BooleanOperator("not_right", (1, 0, 1, 0))
IMP_REV = BooleanOperator("imp_rev", (1, 0, 1, 1))   # b implies a
NOT_LEFT = BooleanOperator("not_left", (1, 1, 0, 0))
IMP = BooleanOperator("imp", (1, 1, 0, 1))
NAND = BooleanOperator("nand", (1, 1, 1, 0))
TRUE_OP = BooleanOperator("true", (1, 1, 1, 1))

ALL = (FALSE_OP, AND, DIFF, LEFT, LESS, RIGHT, XOR, OR,
       NOR, XNOR, NOT_RIGHT, IMP_REV, NOT_LEFT, IMP, NAND, TRUE_OP)

BY_NAME = {op.name: op for op in ALL}
BY_NAME.update({"equiv": XNOR, "nimp": DIFF})


def by_table(table) -> BooleanOperator:
    t = tuple(int(bool(v)) for v in table)
    for op in ALL:
        if op.table == t:
            return op
    return BooleanOperator("custom", t)
