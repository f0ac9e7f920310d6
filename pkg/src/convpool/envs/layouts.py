"""ASCII kitchen layouts.

Characters: X counter, O onion dispenser, D dish dispenser, P pot, S serving
window, space floor, 1/2 player spawn tiles (floor). Grids must be rectangular
with a non-floor border and exactly one spawn per player.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

FLOOR = " "
COUNTER = "X"
ONION_SOURCE = "O"
DISH_SOURCE = "D"
POT = "P"
SERVE = "S"

_TILE_CHARS = {FLOOR, COUNTER, ONION_SOURCE, DISH_SOURCE, POT, SERVE}


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    name: str
    grid: tuple[str, ...]  # rows of tile chars, spawn digits replaced by floor
    spawns: tuple[tuple[int, int], tuple[int, int]]

    @property
    def height(self) -> int:
        return len(self.grid)

    @property
    def width(self) -> int:
        return len(self.grid[0])

    def tile(self, pos: tuple[int, int]) -> str:
        return self.grid[pos[0]][pos[1]]

    def is_floor(self, pos: tuple[int, int]) -> bool:
        r, c = pos
        return 0 <= r < self.height and 0 <= c < self.width and self.grid[r][c] == FLOOR

    def pot_positions(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (r, c) for r in range(self.height) for c in range(self.width) if self.grid[r][c] == POT
        )


CANONICAL_LAYOUTS = {
    "cramped_room": "XXPXX\nO  2O\nX1  X\nXDXSX",
    "coordination_ring": "XXXPX\nX  2P\nX1X X\nO   X\nXOSDX",
}


def parse_layout(text: str, name: str = "custom") -> Layout:
    rows = [r for r in text.rstrip("\n").split("\n")]
    if not rows or not rows[0]:
        raise LayoutError("empty layout")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise LayoutError("layout rows must all have the same width")
    spawns: dict[str, tuple[int, int]] = {}
    grid_rows: list[str] = []
    for r, row in enumerate(rows):
        out = []
        for c, ch in enumerate(row):
            if ch in ("1", "2"):
                if ch in spawns:
                    raise LayoutError(f"duplicate spawn '{ch}'")
                spawns[ch] = (r, c)
                out.append(FLOOR)
            elif ch in _TILE_CHARS:
                out.append(ch)
            else:
                raise LayoutError(f"unknown tile {ch!r} at row {r}, col {c}")
        grid_rows.append("".join(out))
    if set(spawns) != {"1", "2"}:
        raise LayoutError("layout needs exactly one '1' and one '2' spawn")
    grid = tuple(grid_rows)
    h, w = len(grid), width
    for r in range(h):
        for c in range(w):
            on_border = r in (0, h - 1) or c in (0, w - 1)
            if on_border and grid[r][c] == FLOOR:
                raise LayoutError(f"border must be non-floor (row {r}, col {c})")
    flat = "".join(grid)
    for ch, what in ((POT, "pot"), (ONION_SOURCE, "onion dispenser"), (DISH_SOURCE, "dish dispenser"), (SERVE, "serving window")):
        if ch not in flat:
            raise LayoutError(f"layout has no {what}")
    return Layout(name, grid, (spawns["1"], spawns["2"]))


def load_layout(ref: str) -> Layout:
    """Resolve a canonical layout name or a path to a layout file."""
    if ref in CANONICAL_LAYOUTS:
        return parse_layout(CANONICAL_LAYOUTS[ref], name=ref)
    path = Path(ref)
    if not path.exists():
        raise LayoutError(f"unknown layout {ref!r} (not a canonical name or existing file)")
    return parse_layout(path.read_text(encoding="utf-8"), name=path.stem)
