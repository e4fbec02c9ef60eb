"""
Resilient functions for non-oblivious bit-fixing sources.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List

from services.bitcore import BitVector
from services.errors import LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)


class ResilientFunction(ABC):
    """Deterministic map {0,1}^N → {0,1}^m meant to stay near-unbiased under a few adversarial bits."""

    input_length: int
    output_length: int

    def __call__(self, y: BitVector) -> BitVector:
        if y.length != self.input_length:
            raise LengthMismatchError(f"resilient function reads {self.input_length} bits, got {y.length}")
        return self.evaluate(y)

    @abstractmethod
    def evaluate(self, y: BitVector) -> BitVector:
        """Evaluate on an input of input_length bits."""

    def describe(self) -> dict:
        return {"name": type(self).__name__, "input_length": self.input_length,
                "output_length": self.output_length}


@dataclass(frozen=True)
class TribeSchedule:
    """Bits of one output: `groups` groups of `tribes` tribes of `width` consecutive bits."""

    width: int
    tribes: int
    groups: int = 3

    @property
    def block_size(self) -> int:
        return self.width * self.tribes * self.groups


class TribesMajority(ResilientFunction):
    """
    Majority of three tribes functions per output bit.

    The input is cut into output_length consecutive blocks of schedule.block_size
    bits (trailing bits unused). Within a block each group is an OR of tribes,
    each tribe an AND of `width` consecutive bits; the output bit is the
    majority of the group values. The default width is the w for which
    (1 − 2^{−w})^{⌊group size / w⌋} is closest to 1/2.
    """

    def __init__(self, input_length: int, output_length: int, width: int = None):
        if output_length < 1:
            raise ParameterError(f"need at least one output bit, got {output_length}")
        group_size = input_length // (3 * output_length)
        if group_size < 1:
            raise ParameterError(
                f"{input_length} input bits cannot feed {output_length} majority-of-3 outputs")
        self.input_length = input_length
        self.output_length = output_length
        width = width or self._balanced_width(group_size)
        if width < 1 or width > group_size:
            raise ParameterError(f"tribe width {width} outside [1, {group_size}]")
        self.schedule = TribeSchedule(width=width, tribes=group_size // width)
        logger.debug(f"tribes-majority: {self.schedule} per output bit over {input_length} inputs")

    @staticmethod
    def _balanced_width(group_size: int) -> int:
        best, best_gap = 1, math.inf
        for w in range(1, group_size + 1):
            tribes = group_size // w
            gap = abs((1 - 2.0 ** -w) ** tribes - 0.5)
            if gap < best_gap:
                best, best_gap = w, gap
        return best

    def _output_bit(self, y: int, start: int) -> int:
        s = self.schedule
        votes = 0
        tribe_mask = (1 << s.width) - 1
        offset = start
        for _ in range(s.groups):
            value = 0
            for _ in range(s.tribes):
                if (y >> offset) & tribe_mask == tribe_mask:
                    value = 1
                offset += s.width
            votes += value
        return 1 if 2 * votes > s.groups else 0

    def evaluate(self, y: BitVector) -> BitVector:
        size = self.schedule.block_size
        value = 0
        for i in range(self.output_length):
            value |= self._output_bit(y.bits, i * size) << i
        return BitVector(self.output_length, value)

    def describe(self) -> dict:
        info = super().describe()
        info.update({"width": self.schedule.width, "tribes": self.schedule.tribes,
                     "groups": self.schedule.groups})
        return info


def block_positions(rf: TribesMajority, output: int) -> List[int]:
    """Input positions read by one output bit."""
    size = rf.schedule.block_size
    return list(range(output * size, (output + 1) * size))
