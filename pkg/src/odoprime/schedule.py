"""Alphabet schedules and exact mixed-radix arithmetic.

A schedule fixes the digit alphabet sizes ``a_1, a_2, ...`` of the product
space ``X = prod {0, ..., a_i - 1}``.  Every position carries the non-E base
except the positions of the perturbation set E, whose sizes and types
(``"W"`` or ``"empty"``) are configured explicitly.

Positions are 1-based throughout the package.  Digit vectors are plain
tuples whose entry ``k`` holds the digit at position ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

EMPTY = "empty"
WTYPE = "W"
KINDS = (EMPTY, WTYPE)


class ScheduleError(ValueError):
    """Invalid schedule configuration or out-of-range index."""


class DepthError(ValueError):
    """An operation needs digits beyond the configured depth."""


@dataclass(frozen=True)
class EPosition:
    pos: int
    kind: str
    size: int

    def as_dict(self) -> dict:
        return {"pos": self.pos, "kind": self.kind, "size": self.size}


class AlphabetSchedule:
    """Digit sizes of ``X`` up to ``depth`` positions.

    Parameters
    ----------
    base : int
        Alphabet size at every position outside E (at least 8).
    E : iterable of EPosition or (pos, kind, size) triples
        The perturbation positions.
    depth : int
        Largest position the instance may touch.
    """

    def __init__(self, base: int = 8, E: Iterable = (), depth: int = 12, name: str | None = None):
        if base < 8:
            raise ScheduleError(f"non-E base must be at least 8, got {base}")
        if depth < 1:
            raise ScheduleError("depth must be positive")
        eps = []
        for e in E:
            if not isinstance(e, EPosition):
                if isinstance(e, dict):
                    e = EPosition(int(e["pos"]), str(e["kind"]), int(e["size"]))
                else:
                    e = EPosition(int(e[0]), str(e[1]), int(e[2]))
            eps.append(e)
        positions = [e.pos for e in eps]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ScheduleError("E positions must be strictly increasing")
        for e in eps:
            if e.kind not in KINDS:
                raise ScheduleError(f"unknown E kind {e.kind!r}")
            if e.size < 2:
                raise ScheduleError(f"E size at {e.pos} must be at least 2")
            if e.pos < 1:
                raise ScheduleError("E positions are 1-based")
        self.base = int(base)
        self.E = tuple(e for e in eps if e.pos <= depth)
        self.depth = int(depth)
        self.name = name
        self._E_by_pos = {e.pos: e for e in self.E}

    # ------------------------------------------------------------------
    @classmethod
    def paper(cls, depth: int = 200) -> "AlphabetSchedule":
        """The original schedule: ``a_i = 8`` except ``a_{10^k} = k`` for k >= 2."""
        E = []
        k = 2
        while 10**k <= depth:
            E.append(EPosition(10**k, WTYPE if k % 2 == 0 else EMPTY, k))
            k += 1
        return cls(8, E, depth, name="paper")

    @classmethod
    def preset(cls, name: str, depth: int | None = None) -> "AlphabetSchedule":
        if name == "paper":
            return cls.paper(depth or 200)
        if name not in PRESETS:
            raise ScheduleError(f"unknown preset {name!r}; known: paper, {', '.join(PRESETS)}")
        spec = PRESETS[name]
        return cls(spec["base"], spec["E"], depth or spec["depth"], name=name)

    @classmethod
    def from_dict(cls, d: dict) -> "AlphabetSchedule":
        if "preset" in d:
            return cls.preset(d["preset"], d.get("depth"))
        return cls(d.get("base", 8), d.get("E", ()), d.get("depth", 12), name=d.get("name"))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base": self.base,
            "E": [e.as_dict() for e in self.E],
            "depth": self.depth,
        }

    def with_depth(self, depth: int) -> "AlphabetSchedule":
        if self.name == "paper":
            return AlphabetSchedule.paper(depth)
        return AlphabetSchedule(self.base, self.E, depth, name=self.name)

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        es = ", ".join(f"{e.pos}:{e.kind}:{e.size}" for e in self.E)
        return f"<AlphabetSchedule{tag} base={self.base} E=[{es}] depth={self.depth}>"

    def __eq__(self, other):
        return (
            isinstance(other, AlphabetSchedule)
            and (self.base, self.E, self.depth) == (other.base, other.E, other.depth)
        )

    def __hash__(self):
        return hash((self.base, self.E, self.depth))

    # ------------------------------------------------------------------
    def _check(self, i: int, top: int):
        if not 1 <= i <= top:
            raise ScheduleError(f"index {i} outside [1, {top}]")

    @cached_property
    def sizes(self) -> tuple:
        """``sizes[i]`` is ``a_i``; entry 0 is a placeholder."""
        return (0,) + tuple(
            self._E_by_pos[i].size if i in self._E_by_pos else self.base
            for i in range(1, self.depth + 1)
        )

    @cached_property
    def qs(self) -> tuple:
        """``qs[i]`` is ``q_i = a_1 ... a_{i-1}`` for ``1 <= i <= depth + 1``."""
        out = [0, 1]
        for i in range(1, self.depth + 1):
            out.append(out[-1] * self.sizes[i])
        return tuple(out)

    def a(self, i: int) -> int:
        self._check(i, self.depth)
        return self.sizes[i]

    alphabet_size = a

    def q(self, i: int) -> int:
        self._check(i, self.depth + 1)
        return self.qs[i]

    @property
    def modulus(self) -> int:
        """``q_{depth+1}``: number of distinct finite-depth points."""
        return self.qs[self.depth + 1]

    def in_E(self, i: int) -> bool:
        return i in self._E_by_pos

    def kind(self, i: int) -> str | None:
        e = self._E_by_pos.get(i)
        return e.kind if e else None

    def is_wtype(self, i: int) -> bool:
        return self.kind(i) == WTYPE

    def is_empty_type(self, i: int) -> bool:
        return self.kind(i) == EMPTY

    @property
    def w_positions(self) -> tuple:
        return tuple(e.pos for e in self.E if e.kind == WTYPE)

    @property
    def empty_positions(self) -> tuple:
        return tuple(e.pos for e in self.E if e.kind == EMPTY)

    @property
    def e_positions(self) -> tuple:
        return tuple(e.pos for e in self.E)

    # ------------------------------------------------------------------
    def encode(self, value: int) -> tuple:
        """Digits of ``0 <= value < q_{depth+1}``."""
        value = int(value)
        if not 0 <= value < self.modulus:
            raise ScheduleError(f"value {value} outside [0, q_{self.depth + 1})")
        digits = []
        for i in range(1, self.depth + 1):
            value, d = divmod(value, self.sizes[i])
            digits.append(d)
        return tuple(digits)

    def decode(self, digits: Sequence[int]) -> int:
        if len(digits) > self.depth:
            raise DepthError(f"{len(digits)} digits exceed depth {self.depth}")
        value = 0
        for i, d in enumerate(digits, start=1):
            if not 0 <= d < self.sizes[i]:
                raise ScheduleError(f"digit {d} at position {i} outside radix {self.sizes[i]}")
            value += d * self.qs[i]
        return value

    def validate(self) -> list:
        """Warnings for configurations that leave the witness digit bands empty."""
        out = []
        for e in self.E:
            if e.kind == WTYPE and e.size - 2 < (e.size + 1) // 2:
                out.append(
                    f"W-type position {e.pos} of size {e.size} contains every deeper hole "
                    "(a - 2 lies below the threshold)"
                )
            if e.size < 8:
                out.append(f"E position {e.pos} has size {e.size} < 8; measure estimates that assume a_i >= 8 do not apply")
        return out


@dataclass(frozen=True)
class MixedRadixInt:
    """A nonnegative integer together with its digits in a schedule."""

    value: int
    digits: tuple

    @classmethod
    def of(cls, sched: AlphabetSchedule, value: int) -> "MixedRadixInt":
        return cls(int(value), sched.encode(value))


def alphabet_size(sched: AlphabetSchedule, i: int) -> int:
    return sched.a(i)


def q(sched: AlphabetSchedule, i: int) -> int:
    return sched.q(i)


def encode(sched: AlphabetSchedule, value: int) -> tuple:
    return sched.encode(value)


def decode(sched: AlphabetSchedule, digits: Sequence[int]) -> int:
    return sched.decode(digits)


# Desk-scale presets.  Non-E base stays 8 so every digit surgery of the
# friend and reduction constructions (values 0..7) is available as is.
PRESETS = {
    "desk": {
        "base": 8,
        "E": [(3, EMPTY, 5), (4, WTYPE, 6)],
        "depth": 12,
    },
    # W-type of size 2 swallows all deeper holes, odd-type of size 3
    "desk2": {
        "base": 8,
        "E": [(3, WTYPE, 2), (5, EMPTY, 3)],
        "depth": 10,
    },
    # feasibility-validated experiment preset: wide W bands for the
    # barycenter and shift witnesses, several odd-type tower positions
    "lab": {
        "base": 8,
        "E": [(2, EMPTY, 9), (4, WTYPE, 400), (7, EMPTY, 11), (11, WTYPE, 48), (15, EMPTY, 13)],
        "depth": 20,
    },
    # rational-weight barycenters: a deep odd-type position supplies
    # rigidity times, one very wide W position lies above it
    "wide": {
        "base": 8,
        "E": [(3, EMPTY, 13), (5, EMPTY, 25), (7, WTYPE, 2_000_000)],
        "depth": 10,
    },
}
