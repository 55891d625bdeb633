"""Procedural gap terrain: a flat line at height 0 interrupted by gaps.

Gaps are half-open intervals [start, end) with a floor at gap_floor
(default -1 m) so states stay finite when a robot falls in.
"""

from dataclasses import dataclass, field

import numpy as np

GAP_WIDTH_RANGE = (0.14, 0.20)
FIRST_GAP_RANGE = (1.25, 2.25)
PLATFORM_STANDARD = 1.4
PLATFORM_CHALLENGING = 0.30
GAP_FLOOR = -1.0


@dataclass
class TerrainSpec:
    """Ordered, disjoint gap intervals on a flat line."""

    gaps: list = field(default_factory=list)  # [(start_x, end_x), ...]
    total_length: float = 40.0
    seed: int | None = None
    mode: str = "flat"
    gap_floor: float = GAP_FLOOR

    def __post_init__(self):
        self.gaps = [(float(s), float(e)) for s, e in self.gaps]
        prev_end = -np.inf
        for s, e in self.gaps:
            if not (s < e and s >= prev_end):
                raise ValueError("gaps must be ordered and disjoint")
            prev_end = e

    @property
    def n_gaps(self) -> int:
        return len(self.gaps)

    def edges(self) -> np.ndarray:
        """Flat sorted [s0, e0, s1, e1, ...] array for the contact kernel."""
        if not self.gaps:
            return np.empty(0)
        return np.asarray(self.gaps, dtype=float).ravel()

    def query(self, x: float):
        """('surface', 0.0) on a platform, ('gap', (start, end)) inside a gap."""
        for s, e in self.gaps:
            if s <= x < e:
                return ("gap", (s, e))
        return ("surface", 0.0)

    def height(self, x: float) -> float:
        return self.gap_floor if self.query(x)[0] == "gap" else 0.0

    def to_text(self) -> str:
        lines = ["# gapcross terrain v1",
                 f"mode {self.mode}",
                 f"seed {self.seed if self.seed is not None else 'none'}",
                 f"total_length {self.total_length!r}",
                 f"gap_floor {self.gap_floor!r}"]
        for s, e in self.gaps:
            lines.append(f"gap {s!r} {e!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TerrainSpec":
        mode, seed, total_length, gap_floor = "flat", None, 40.0, GAP_FLOOR
        gaps = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, *rest = line.split()
            if key == "mode":
                mode = rest[0]
            elif key == "seed":
                seed = None if rest[0] == "none" else int(rest[0])
            elif key == "total_length":
                total_length = float(rest[0])
            elif key == "gap_floor":
                gap_floor = float(rest[0])
            elif key == "gap":
                gaps.append((float(rest[0]), float(rest[1])))
            else:
                raise ValueError(f"unknown terrain line: {line!r}")
        return cls(gaps=gaps, total_length=total_length, seed=seed,
                   mode=mode, gap_floor=gap_floor)


def generate_terrain(n_gaps: int, mode: str = "standard",
                     rng: np.random.Generator | int | None = None,
                     gap_width_range: tuple = GAP_WIDTH_RANGE,
                     first_gap_range: tuple = FIRST_GAP_RANGE) -> TerrainSpec:
    """Generate gap terrain.

    The first gap starts uniformly in first_gap_range; widths are uniform in
    gap_width_range; platforms between consecutive gaps measure 1.4 m
    (standard) or 0.30 m (challenging). mode="flat" or n_gaps = 0 yields a
    gapless line. Deterministic for a fixed seed/generator state.
    """
    if n_gaps < 0:
        raise ValueError("n_gaps must be >= 0")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if mode == "flat" or n_gaps == 0:
        return TerrainSpec(gaps=[], total_length=40.0, seed=seed, mode="flat")
    if mode == "standard":
        platform = PLATFORM_STANDARD
    elif mode == "challenging":
        platform = PLATFORM_CHALLENGING
    else:
        raise ValueError(f"unknown terrain mode: {mode!r}")
    gaps = []
    start = rng.uniform(*first_gap_range)
    for _ in range(n_gaps):
        width = rng.uniform(*gap_width_range)
        gaps.append((start, start + width))
        start = start + width + platform
    total = gaps[-1][1] + 5.0
    return TerrainSpec(gaps=gaps, total_length=total, seed=seed, mode=mode)
