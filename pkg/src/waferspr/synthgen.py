"""Parametric generator of mixed-type defect wafers with known truth labels.

Pattern geometry is normalized to the wafer radius so one spec scales
across grid sizes.  Patterns are rasterized onto the circular in-mask
region, thinned by a per-pattern fill rate (so systematic patterns have
internal holes), and Bernoulli noise defects are sprinkled on the
remaining in-mask cells.  Everything is deterministic per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GenerationError
from .wafer import CellState, WaferMap


class PatternKind(Enum):
    CENTER_DISK = "center_disk"
    EDGE_ZONE = "edge_zone"
    DONUT = "donut"
    PARTIAL_RING = "partial_ring"
    SCRATCH = "scratch"


@dataclass(frozen=True)
class PatternSpec:
    """Geometry of one systematic pattern, in wafer-radius fractions.

    The pattern center sits `offset_frac` of the radius away from the
    wafer center, in direction `offset_angle_deg`.  Annular kinds use
    inner_frac/outer_frac and an arc window; scratches use a length in
    cells along `angle_deg`.
    """

    kind: PatternKind
    offset_frac: float = 0.0
    offset_angle_deg: float = 0.0
    inner_frac: float = 0.0
    outer_frac: float = 0.3
    arc_start_deg: float = 0.0
    arc_extent_deg: float = 360.0
    length_cells: int = 0
    width_cells: float = 1.0
    angle_deg: float = 0.0
    fill_rate: float = 0.9

    def __post_init__(self):
        for name in ("offset_frac", "inner_frac", "outer_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {v}")
        if self.kind in (PatternKind.DONUT, PatternKind.PARTIAL_RING, PatternKind.EDGE_ZONE):
            if not self.inner_frac < self.outer_frac:
                raise ValueError("annular patterns need inner_frac < outer_frac")
        if self.kind is PatternKind.SCRATCH and self.length_cells < 1:
            raise ValueError("scratch needs length_cells >= 1")
        if self.width_cells <= 0:
            raise ValueError("width_cells must be positive")
        if not 0.0 < self.fill_rate <= 1.0:
            raise ValueError("fill_rate must be in (0, 1]")


@dataclass(frozen=True)
class SynthWafer:
    """Generated map plus truth metadata.

    truth_labels: per-cell, 0 for functional/noise cells and the 1-based
    pattern id for defective pattern cells.
    region_labels: per-cell pattern coverage before fill-rate thinning;
    used to attribute hole-filled cells to their owning pattern.
    """

    map: WaferMap
    truth_labels: np.ndarray
    region_labels: np.ndarray
    noise_rate: float

    def __post_init__(self):
        grid = self.map.cells
        truth = np.asarray(self.truth_labels, dtype=np.int64)
        if (truth[grid != CellState.DEFECTIVE] > 0).any():
            raise ValueError("truth label > 0 on a non-defective cell")


def wafer_mask(rows: int, cols: int) -> np.ndarray:
    """Circular mask inscribed in the grid."""
    cr, cc = (rows - 1) / 2.0, (cols - 1) / 2.0
    radius = (min(rows, cols) - 1) / 2.0
    rr, cc_idx = np.mgrid[0:rows, 0:cols]
    return (rr - cr) ** 2 + (cc_idx - cc) ** 2 <= radius**2 + 1e-9


def _angle_within(angle_deg, start_deg, extent_deg):
    return ((angle_deg - start_deg) % 360.0) <= extent_deg


def rasterize(spec: PatternSpec, rows: int, cols: int, mask=None) -> list[tuple[int, int]]:
    """In-mask cells covered by the pattern, row-major; GenerationError if none."""
    if mask is None:
        mask = wafer_mask(rows, cols)
    cr, cc = (rows - 1) / 2.0, (cols - 1) / 2.0
    radius = (min(rows, cols) - 1) / 2.0
    ang = math.radians(spec.offset_angle_deg)
    pr = cr - spec.offset_frac * radius * math.sin(ang)
    pc = cc + spec.offset_frac * radius * math.cos(ang)

    cells = []
    if spec.kind is PatternKind.SCRATCH:
        theta = math.radians(spec.angle_deg)
        dr, dc = -math.sin(theta), math.cos(theta)
        length = float(spec.length_cells)
        half_width = max(0.6, spec.width_cells / 2.0)
        for r in range(rows):
            for c in range(cols):
                if not mask[r, c]:
                    continue
                # distance from cell to the segment [p, p + length*dir]
                t = (r - pr) * dr + (c - pc) * dc
                t = min(max(t, 0.0), length)
                qr, qc = pr + t * dr, pc + t * dc
                if (r - qr) ** 2 + (c - qc) ** 2 <= half_width**2 + 1e-9:
                    cells.append((r, c))
    else:
        if spec.kind is PatternKind.CENTER_DISK:
            lo, hi = 0.0, spec.outer_frac * radius
        else:
            lo, hi = spec.inner_frac * radius, spec.outer_frac * radius
        for r in range(rows):
            for c in range(cols):
                if not mask[r, c]:
                    continue
                d = math.hypot(r - pr, c - pc)
                if not (lo <= d <= hi):
                    continue
                if spec.arc_extent_deg < 360.0:
                    cell_ang = math.degrees(math.atan2(-(r - pr), c - pc))
                    if not _angle_within(cell_ang, spec.arc_start_deg, spec.arc_extent_deg):
                        continue
                cells.append((r, c))
    if not cells:
        raise GenerationError(f"pattern {spec.kind.value} rasterized to nothing")
    return cells


def generate(rows: int, cols: int, specs, noise_rate: float, seed: int) -> SynthWafer:
    """Rasterize the specs, thin by fill rate, add Bernoulli noise defects."""
    if rows < 8 or cols < 8:
        raise ValueError("rows and cols must be >= 8")
    if not 0.0 <= noise_rate < 0.5:
        raise ValueError("noise_rate must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    mask = wafer_mask(rows, cols)

    region = np.zeros((rows, cols), dtype=np.int64)
    truth = np.zeros((rows, cols), dtype=np.int64)
    defect = np.zeros((rows, cols), dtype=bool)
    for pid, spec in enumerate(specs, start=1):
        for r, c in rasterize(spec, rows, cols, mask):
            region[r, c] = pid  # later pattern wins on overlap
            if rng.random() < spec.fill_rate:
                defect[r, c] = True
                truth[r, c] = pid
    if noise_rate > 0:
        for r in range(rows):
            for c in range(cols):
                if mask[r, c] and not defect[r, c] and rng.random() < noise_rate:
                    defect[r, c] = True
                    truth[r, c] = 0

    cells = np.where(
        mask,
        np.where(defect, CellState.DEFECTIVE, CellState.FUNCTIONAL),
        CellState.OUTSIDE,
    ).astype(np.int8)
    wmap = WaferMap(rows, cols, cells.ravel(), name=f"synth-{seed}")
    return SynthWafer(
        map=wmap,
        truth_labels=truth.ravel(),
        region_labels=region.ravel(),
        noise_rate=noise_rate,
    )


# ---------------------------------------------------------------------
# The mixed-type families used in the comparison experiments
# ---------------------------------------------------------------------

FAMILIES = (
    "donut_partial_ring",
    "two_zone",
    "center_zone",
    "center_partial_ring",
    "scratch_pair",
)


def family_specs(name: str) -> tuple[PatternSpec, ...]:
    """Pattern menu mirroring the classic mixed-type defect combinations."""
    if name == "donut_partial_ring":
        return (
            PatternSpec(PatternKind.DONUT, inner_frac=0.15, outer_frac=0.42,
                        fill_rate=0.94),
            PatternSpec(PatternKind.PARTIAL_RING, inner_frac=0.78, outer_frac=0.99,
                        arc_start_deg=150.0, arc_extent_deg=170.0, fill_rate=0.94),
        )
    if name == "two_zone":
        return (
            PatternSpec(PatternKind.EDGE_ZONE, inner_frac=0.55, outer_frac=1.0,
                        arc_start_deg=20.0, arc_extent_deg=100.0),
            PatternSpec(PatternKind.EDGE_ZONE, inner_frac=0.55, outer_frac=1.0,
                        arc_start_deg=200.0, arc_extent_deg=100.0),
        )
    if name == "center_zone":
        return (
            PatternSpec(PatternKind.CENTER_DISK, outer_frac=0.35),
            PatternSpec(PatternKind.EDGE_ZONE, inner_frac=0.62, outer_frac=1.0,
                        arc_start_deg=230.0, arc_extent_deg=120.0),
        )
    if name == "center_partial_ring":
        return (
            PatternSpec(PatternKind.CENTER_DISK, outer_frac=0.32),
            PatternSpec(PatternKind.PARTIAL_RING, inner_frac=0.72, outer_frac=0.95,
                        arc_start_deg=30.0, arc_extent_deg=170.0),
        )
    if name == "scratch_pair":
        return (
            PatternSpec(PatternKind.SCRATCH, offset_frac=0.55, offset_angle_deg=135.0,
                        angle_deg=-35.0, length_cells=20, width_cells=3.0, fill_rate=0.95),
            PatternSpec(PatternKind.SCRATCH, offset_frac=0.5, offset_angle_deg=300.0,
                        angle_deg=60.0, length_cells=14, width_cells=3.0, fill_rate=0.95),
        )
    raise ValueError(f"unknown family {name!r}")


# Family multiplicities of the twelve-wafer comparison corpus.
TWELVE_WAFER_FAMILIES = (
    "center_partial_ring", "center_zone", "two_zone", "two_zone", "two_zone",
    "center_partial_ring", "center_partial_ring", "donut_partial_ring",
    "donut_partial_ring", "center_zone", "scratch_pair", "center_partial_ring",
)


def twelve_wafer_corpus(rows=38, cols=38, noise_rate=0.05, base_seed=100):
    """The synthetic stand-in for the paper-style twelve-wafer comparison."""
    out = []
    for idx, family in enumerate(TWELVE_WAFER_FAMILIES):
        sw = generate(rows, cols, family_specs(family), noise_rate, base_seed + idx)
        out.append((family, sw))
    return out
