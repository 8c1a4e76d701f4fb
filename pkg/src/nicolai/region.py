"""Integer lattice intervals with a boundary tag."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    FREE = "free"


@dataclass(frozen=True)
class Region:
    """Closed interval ``[left, right]`` of lattice sites.

    For a periodic region the site ``right + 1`` is identified with ``left``.
    """

    left: int
    right: int
    boundary: Boundary = Boundary.FREE

    def __post_init__(self):
        if self.left > self.right:
            raise ValueError(f"empty region [{self.left}, {self.right}]")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def size(self) -> int:
        return self.right - self.left + 1

    @property
    def sites(self) -> list[int]:
        return list(range(self.left, self.right + 1))

    def __contains__(self, site: int) -> bool:
        return self.left <= site <= self.right

    def contains(self, other: Region) -> bool:
        return self.left <= other.left and other.right <= self.right

    def fold(self, site: int) -> int:
        """Map ``site`` into the region modulo its length (periodic only)."""
        if self.boundary is not Boundary.PERIODIC:
            raise ValueError("folding is only defined for periodic regions")
        return self.left + (site - self.left) % self.size

    def enlarged(self, left_by: int, right_by: int | None = None) -> Region:
        right_by = left_by if right_by is None else right_by
        return Region(self.left - left_by, self.right + right_by, self.boundary)

    def __str__(self):
        return f"[{self.left},{self.right}]({self.boundary.value})"
