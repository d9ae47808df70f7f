"""Unique identifiers, record types and the node ordering.

A unique identifier (UID) is a single unsigned 64-bit integer.  Leaves carry
bit 63 = 1, the value in bits 62..1 and a flag in bit 0.  Internal nodes carry
bit 63 = 0, a 24-bit label in bits 62..39, a 38-bit identifier in bits 38..1
and the flag in bit 0.

With the flag cleared, plain unsigned comparison of UIDs orders internal nodes
by (label, identifier) and puts every internal node before the false leaf,
which in turn precedes the true leaf.  Every sort and merge in the package
relies on this.
"""
from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np

LABEL_BITS = 24
ID_BITS = 38

MAX_LABEL = (1 << LABEL_BITS) - 1
MAX_ID = (1 << ID_BITS) - 1

LEAF_BIT = 1 << 63
FLAG_BIT = 1
ID_SHIFT = 1
LABEL_SHIFT = ID_BITS + 1
VALUE_MASK = (1 << 62) - 1

#: Marker for "no source" (the root request) and for unused tuple slots.
#: It decodes as a leaf with an out-of-range value, so it never collides with
#: a real UID.
NIL = (1 << 64) - 1

UID_DTYPE = np.dtype("<u8")


class Leaf(NamedTuple):
    value: int
    flag: bool = False


class Node(NamedTuple):
    label: int
    id: int
    flag: bool = False


class NodeRecord(NamedTuple):
    uid: int
    low: int
    high: int


class ArcRecord(NamedTuple):
    """Arc with ``is_high`` kept in the flag bit of ``source``."""

    source: int
    target: int

    @property
    def is_high(self) -> bool:
        return bool(self.source & FLAG_BIT)


class LevelInfo(NamedTuple):
    label: int
    count: int


def encode_node(label: int, id: int, flag: bool = False) -> int:
    if not 0 <= label <= MAX_LABEL:
        raise ValueError(f"label {label} outside [0, {MAX_LABEL}]")
    if not 0 <= id <= MAX_ID:
        raise ValueError(f"identifier {id} outside [0, {MAX_ID}]")
    return (label << LABEL_SHIFT) | (id << ID_SHIFT) | int(bool(flag))


def encode_leaf(value: bool, flag: bool = False) -> int:
    value = int(value)
    if value not in (0, 1):
        raise ValueError(f"only boolean leaves are supported, got {value}")
    return LEAF_BIT | (value << 1) | int(bool(flag))


TRUE = encode_leaf(True)
FALSE = encode_leaf(False)


def decode(u: int) -> Union[Leaf, Node]:
    u = int(u)
    flag = bool(u & FLAG_BIT)
    if u & LEAF_BIT:
        return Leaf((u >> 1) & VALUE_MASK, flag)
    return Node((u >> LABEL_SHIFT) & MAX_LABEL, (u >> ID_SHIFT) & MAX_ID, flag)


def is_leaf(u: int) -> bool:
    return bool(int(u) & LEAF_BIT)


def label_of(u: int) -> int:
    return (int(u) >> LABEL_SHIFT) & MAX_LABEL


def id_of(u: int) -> int:
    return (int(u) >> ID_SHIFT) & MAX_ID


def value_of(u: int) -> bool:
    return bool((int(u) >> 1) & 1)


def flag_of(u: int) -> bool:
    return bool(int(u) & FLAG_BIT)


def with_flag(u: int, flag: bool) -> int:
    return (int(u) & ~FLAG_BIT) | int(bool(flag))


def strip_flag(u: int) -> int:
    return int(u) & ~FLAG_BIT


def negate_leaf(u: int) -> int:
    return int(u) ^ 0b10


def compare(a: int, b: int) -> int:
    """Three-way comparison under the node ordering; the flag is ignored."""
    a, b = strip_flag(a), strip_flag(b)
    return (a > b) - (a < b)


# -- vectorised helpers over uint64 arrays ----------------------------------

_U_LABEL_SHIFT = np.uint64(LABEL_SHIFT)
_U_ID_SHIFT = np.uint64(ID_SHIFT)
_U_LABEL_MASK = np.uint64(MAX_LABEL)
_U_ID_MASK = np.uint64(MAX_ID)
_U_LEAF = np.uint64(LEAF_BIT)
_U_FLAG = np.uint64(FLAG_BIT)
_U_VALUE = np.uint64(0b10)


def labels(arr: np.ndarray) -> np.ndarray:
    """Labels of an array of internal-node UIDs (garbage for leaves)."""
    return (arr >> _U_LABEL_SHIFT) & _U_LABEL_MASK


def ids(arr: np.ndarray) -> np.ndarray:
    return (arr >> _U_ID_SHIFT) & _U_ID_MASK


def leaf_mask(arr: np.ndarray) -> np.ndarray:
    return (arr & _U_LEAF) != 0


def strip_flags(arr: np.ndarray) -> np.ndarray:
    return arr & ~_U_FLAG


def negate_leaves(arr: np.ndarray) -> np.ndarray:
    """Flip the value of every leaf UID in ``arr``; internal UIDs pass through."""
    return np.where(leaf_mask(arr), arr ^ _U_VALUE, arr)


def encode_nodes(label: int, id_arr: np.ndarray) -> np.ndarray:
    """Vectorised :func:`encode_node` for one label and many identifiers."""
    if not 0 <= label <= MAX_LABEL:
        raise ValueError(f"label {label} outside [0, {MAX_LABEL}]")
    return (np.uint64(label) << _U_LABEL_SHIFT) | (id_arr.astype(np.uint64) << _U_ID_SHIFT)
