"""Compositional multi-rooms gridworld.

Buildings are H x W grids of room slots.  Each non-solid slot holds one of
two 3x3-interior room templates; rooms share single-cell walls (pitch 4), so
the cell map is (4H+1) x (4W+1).  A door is carved on a shared wall only
when both templates place a door on that exact wall cell:

    R1: doors north of its NE corner and east of its SE corner
    R2: doors west of its SW corner and south of its SE corner

Every door is adjacent to exactly one interior corner, which is what lets a
corner-seeking option exit a room.  R1's east door faces R2's west door and
R2's south door faces R1's north door, so connected buildings are alternating
R1/R2 chains ("staircases").
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

WALL, FLOOR, DOOR = 0, 1, 2
PITCH = 4
ROOM_SPAN = 5  # interior plus bounding walls

STEP_COST = -0.1
GOAL_BONUS = 10.0

ACTIONS = (0, 1, 2, 3)
ACTION_NAMES = "NESW"
DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))

CORNERS = ("NW", "NE", "SW", "SE")
CORNER_CELLS = {"NW": (0, 0), "NE": (0, 2), "SW": (2, 0), "SE": (2, 2)}
SIDE_DELTAS = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
OPPOSITE_SIDE = {"N": "S", "S": "N", "E": "W", "W": "E"}


class LayoutError(ValueError):
    """Rejected building layout."""


class LayoutParseError(ValueError):
    def __init__(self, message, line, column=None):
        where = f"line {line}" + ("" if column is None else f", column {column}")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class RoomTemplate:
    name: str
    door_cells: tuple  # ((side, (row, col) in the 5x5 box), ...)

    def __post_init__(self):
        walls = {"N": lambda r, c: r == 0, "S": lambda r, c: r == 4,
                 "W": lambda r, c: c == 0, "E": lambda r, c: c == 4}
        for side, (r, c) in self.door_cells:
            if not walls[side](r, c) or not (1 <= (c if side in "NS" else r) <= 3):
                raise LayoutError(f"{self.name}: door {side} at {(r, c)} is off its wall")

    def door_on(self, side):
        for s, cell in self.door_cells:
            if s == side:
                return cell
        return None

    def corner_exits(self):
        """corner name -> side whose door is adjacent to that interior corner."""
        exits = {}
        for side, (r, c) in self.door_cells:
            dr, dc = SIDE_DELTAS[side]
            ir, ic = r - dr, c - dc  # interior cell next to the door
            for corner, (lr, lc) in CORNER_CELLS.items():
                if (lr + 1, lc + 1) == (ir, ic):
                    exits[corner] = side
        return exits

    def image(self):
        img = np.zeros((ROOM_SPAN, ROOM_SPAN))
        img[1:4, 1:4] = 1.0
        for _, (r, c) in self.door_cells:
            img[r, c] = 1.0
        return img


R1 = RoomTemplate("R1", (("N", (0, 3)), ("E", (3, 4))))
R2 = RoomTemplate("R2", (("W", (3, 0)), ("S", (4, 3))))
TEMPLATES = {"R1": R1, "R2": R2}
SOLID = "#"


@dataclass(frozen=True)
class LocalFrame:
    room_type: str
    room_location: tuple
    local_cell: tuple


@dataclass(frozen=True)
class StepResult:
    next_state: tuple
    reward: float
    done: bool


@dataclass(frozen=True, eq=False)
class BuildingLayout:
    room_grid: tuple  # H x W of "R1" / "R2" / "#"
    cell_map: np.ndarray
    start_cell: tuple
    goal_cell: tuple

    @property
    def rooms_h(self):
        return len(self.room_grid)

    @property
    def rooms_w(self):
        return len(self.room_grid[0])

    def slot(self, room_location):
        i, j = room_location
        return self.room_grid[i][j]

    def room_locations(self):
        return [
            (i, j)
            for i in range(self.rooms_h)
            for j in range(self.rooms_w)
            if self.room_grid[i][j] != SOLID
        ]

    def rooms_of_type(self, room_type):
        return [loc for loc in self.room_locations() if self.slot(loc) == room_type]

    def with_goal(self, goal_cell):
        if not is_interior(self, goal_cell):
            raise LayoutError(f"goal {goal_cell} is not an interior floor cell")
        return replace(self, goal_cell=tuple(goal_cell))

    def with_start(self, start_cell):
        if not is_interior(self, start_cell):
            raise LayoutError(f"start {start_cell} is not an interior floor cell")
        return replace(self, start_cell=tuple(start_cell))


def compose_building(room_grid, start_cell, goal_cell, templates=TEMPLATES) -> BuildingLayout:
    """Tile room interiors, carve matched doors, and validate connectivity."""
    grid = tuple(tuple(row) for row in room_grid)
    if not grid or not grid[0] or any(len(r) != len(grid[0]) for r in grid):
        raise LayoutError("room grid must be a non-empty rectangle")
    h, w = len(grid), len(grid[0])
    for row in grid:
        for name in row:
            if name != SOLID and name not in templates:
                raise LayoutError(f"unknown room template {name!r}")
    if not any(name != SOLID for row in grid for name in row):
        raise LayoutError("building has no rooms")

    cells = np.full((PITCH * h + 1, PITCH * w + 1), WALL, dtype=np.uint8)
    for i in range(h):
        for j in range(w):
            if grid[i][j] != SOLID:
                cells[PITCH * i + 1 : PITCH * i + 4, PITCH * j + 1 : PITCH * j + 4] = FLOOR

    # a shared-wall cell opens only when both rooms put a door exactly there
    for i in range(h):
        for j in range(w):
            if grid[i][j] == SOLID:
                continue
            here = templates[grid[i][j]]
            if j + 1 < w and grid[i][j + 1] != SOLID:
                east = here.door_on("E")
                west = templates[grid[i][j + 1]].door_on("W")
                if east and west and east[0] == west[0]:
                    cells[PITCH * i + east[0], PITCH * (j + 1)] = DOOR
            if i + 1 < h and grid[i + 1][j] != SOLID:
                south = here.door_on("S")
                north = templates[grid[i + 1][j]].door_on("N")
                if south and north and south[1] == north[1]:
                    cells[PITCH * (i + 1), PITCH * j + south[1]] = DOOR

    layout = BuildingLayout(grid, cells, tuple(start_cell), tuple(goal_cell))
    if not is_interior(layout, layout.start_cell):
        raise LayoutError(f"start {start_cell} is not an interior floor cell")
    if not is_interior(layout, layout.goal_cell):
        raise LayoutError(f"goal {goal_cell} is not an interior floor cell")
    _check_connected(layout)
    layout.cell_map.setflags(write=False)
    return layout


def _check_connected(layout):
    interiors = [
        global_of((i, j), (lr, lc))
        for (i, j) in layout.room_locations()
        for lr in range(3)
        for lc in range(3)
    ]
    seen = {interiors[0]}
    frontier = [interiors[0]]
    cm = layout.cell_map
    while frontier:
        r, c = frontier.pop()
        for dr, dc in DELTAS:
            nxt = (r + dr, c + dc)
            if nxt not in seen and in_bounds(layout, nxt) and cm[nxt] != WALL:
                seen.add(nxt)
                frontier.append(nxt)
    missing = [cell for cell in interiors if cell not in seen]
    if missing:
        raise LayoutError(f"disconnected floor graph: {len(missing)} unreachable cells, e.g. {missing[0]}")


def in_bounds(layout, cell):
    r, c = cell
    return 0 <= r < layout.cell_map.shape[0] and 0 <= c < layout.cell_map.shape[1]


def is_interior(layout, cell):
    r, c = cell
    if not in_bounds(layout, cell):
        return False
    if (r - 1) % PITCH == 3 or (c - 1) % PITCH == 3:
        return False
    return layout.slot(((r - 1) // PITCH, (c - 1) // PITCH)) != SOLID


def step(layout: BuildingLayout, state, action) -> StepResult:
    """Ground-truth primitive dynamics: move if the target is floor or door,
    else stay; every action costs STEP_COST, entering the goal adds GOAL_BONUS."""
    r, c = state
    dr, dc = DELTAS[action]
    nxt = (r + dr, c + dc)
    if not in_bounds(layout, nxt) or layout.cell_map[nxt] == WALL:
        nxt = (r, c)
    done = nxt == layout.goal_cell
    reward = STEP_COST + (GOAL_BONUS if done else 0.0)
    return StepResult(nxt, reward, done)


def local_frame(layout: BuildingLayout, state, prev_room=None) -> LocalFrame:
    """Room type, room slot, and 3x3 local cell for a position.

    Door cells belong to ``prev_room`` when given (the room whose interior
    was last occupied); otherwise to the adjacent room with the smaller slot
    index.  Their local cell is clamped to the nearest interior cell.
    """
    r, c = state
    if not in_bounds(layout, state) or layout.cell_map[r, c] == WALL:
        raise LayoutError(f"{state} is not a traversable cell")
    if is_interior(layout, state):
        i, j = (r - 1) // PITCH, (c - 1) // PITCH
        return LocalFrame(layout.slot((i, j)), (i, j), ((r - 1) % PITCH, (c - 1) % PITCH))

    # door cell: candidates are the rooms on either side
    candidates = []
    for dr, dc in DELTAS:
        nbr = (r + dr, c + dc)
        if in_bounds(layout, nbr) and is_interior(layout, nbr):
            candidates.append(((nbr[0] - 1) // PITCH, (nbr[1] - 1) // PITCH))
    candidates = sorted(set(candidates))
    if not candidates:
        raise LayoutError(f"door {state} touches no room interior")
    if prev_room is not None and tuple(prev_room) in candidates:
        i, j = prev_room
    else:
        i, j = candidates[0]
    lr = min(max(r - (PITCH * i + 1), 0), 2)
    lc = min(max(c - (PITCH * j + 1), 0), 2)
    return LocalFrame(layout.slot((i, j)), (i, j), (lr, lc))


def global_of(room_location, local_cell):
    i, j = room_location
    lr, lc = local_cell
    return (PITCH * i + 1 + lr, PITCH * j + 1 + lc)


def render_room_image(layout: BuildingLayout, room_location) -> np.ndarray:
    """Template-intrinsic 5x5 occupancy (1 = traversable), so the image is
    identical wherever the room type appears."""
    name = layout.slot(room_location)
    if name == SOLID:
        raise LayoutError(f"room {room_location} is solid")
    return TEMPLATES[name].image()


def subgoal_cell(layout: BuildingLayout, room_location, corner):
    if layout.slot(room_location) == SOLID:
        raise LayoutError(f"room {room_location} is solid")
    return global_of(room_location, CORNER_CELLS[corner])


def corner_exit_side(layout: BuildingLayout, room_location, corner) -> Optional[str]:
    """Side of the carved door adjacent to this corner, or None.

    The template may declare a door that composition did not carve (boundary
    or unmatched neighbour); only carved doors count.
    """
    name = layout.slot(room_location)
    side = TEMPLATES[name].corner_exits().get(corner)
    if side is None:
        return None
    dr, dc = SIDE_DELTAS[side]
    cr, cc = subgoal_cell(layout, room_location, corner)
    door = (cr + dr, cc + dc)
    if in_bounds(layout, door) and layout.cell_map[door] == DOOR:
        return side
    return None


def crossing_cells(layout: BuildingLayout, room_location, corner):
    """(door cell, arrival cell, arrival room) for a carved corner exit."""
    side = corner_exit_side(layout, room_location, corner)
    if side is None:
        return None
    dr, dc = SIDE_DELTAS[side]
    cr, cc = subgoal_cell(layout, room_location, corner)
    door = (cr + dr, cc + dc)
    arrival = (cr + 2 * dr, cc + 2 * dc)
    i, j = room_location
    return door, arrival, (i + dr, j + dc)


# arrival corner after crossing in a given direction (forced by the geometry:
# the traversed coordinate lands on the first interior line of the next room)
ARRIVAL_CORNER = {"E": "SW", "W": "SE", "S": "NE", "N": "SE"}


def bfs_distances(layout: BuildingLayout, source) -> dict:
    """Shortest step counts over traversable cells from ``source``."""
    dist = {tuple(source): 0}
    frontier = [tuple(source)]
    while frontier:
        nxt_frontier = []
        for cell in frontier:
            for dr, dc in DELTAS:
                nbr = (cell[0] + dr, cell[1] + dc)
                if nbr not in dist and in_bounds(layout, nbr) and layout.cell_map[nbr] != WALL:
                    dist[nbr] = dist[cell] + 1
                    nxt_frontier.append(nbr)
        frontier = nxt_frontier
    return dist


def room_distances(layout: BuildingLayout, source_room) -> dict:
    """Room-graph hop counts (rooms adjacent iff a carved door joins them)."""
    dist = {tuple(source_room): 0}
    frontier = [tuple(source_room)]
    while frontier:
        nxt_frontier = []
        for room in frontier:
            for corner in CORNERS:
                crossing = crossing_cells(layout, room, corner)
                if crossing is None:
                    continue
                nbr = crossing[2]
                if nbr not in dist:
                    dist[nbr] = dist[room] + 1
                    nxt_frontier.append(nbr)
        frontier = nxt_frontier
    return dist


# --- layout text files -------------------------------------------------------

_TOKEN_TO_NAME = {"1": "R1", "2": "R2", SOLID: SOLID}
_NAME_TO_TOKEN = {v: k for k, v in _TOKEN_TO_NAME.items()}


def format_layout(layout: BuildingLayout) -> str:
    lines = [f"rooms {layout.rooms_h} {layout.rooms_w}"]
    for row in layout.room_grid:
        lines.append(" ".join(_NAME_TO_TOKEN[name] for name in row))
    lines.append(f"start {layout.start_cell[0]} {layout.start_cell[1]}")
    lines.append(f"goal {layout.goal_cell[0]} {layout.goal_cell[1]}")
    return "\n".join(lines) + "\n"


def parse_layout(text: str) -> BuildingLayout:
    lines = text.splitlines()

    def fail(msg, line_no, col=None):
        raise LayoutParseError(msg, line_no, col)

    if not lines or not lines[0].startswith("rooms"):
        fail("expected header 'rooms H W'", 1)
    head = lines[0].split()
    if len(head) != 3:
        fail("expected header 'rooms H W'", 1)
    try:
        h, w = int(head[1]), int(head[2])
    except ValueError:
        fail("room grid dimensions must be integers", 1)
    if h < 1 or w < 1 or len(lines) < 1 + h + 2:
        fail(f"expected {h} grid rows plus start and goal lines", 1)

    grid = []
    for i in range(h):
        tokens = lines[1 + i].split()
        if len(tokens) != w:
            fail(f"expected {w} room tokens, got {len(tokens)}", 2 + i)
        row = []
        for j, tok in enumerate(tokens):
            if tok not in _TOKEN_TO_NAME:
                fail(f"unknown room token {tok!r}", 2 + i, j + 1)
            row.append(_TOKEN_TO_NAME[tok])
        grid.append(tuple(row))

    def parse_cell(line_no, keyword):
        parts = lines[line_no - 1].split()
        if len(parts) != 3 or parts[0] != keyword:
            fail(f"expected '{keyword} r c'", line_no)
        try:
            return (int(parts[1]), int(parts[2]))
        except ValueError:
            fail(f"{keyword} coordinates must be integers", line_no)

    start = parse_cell(1 + h + 1, "start")
    goal = parse_cell(1 + h + 2, "goal")
    try:
        return compose_building(grid, start, goal)
    except LayoutError as exc:
        raise LayoutParseError(str(exc), 1) from exc


def load_layout(path) -> BuildingLayout:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_layout(fh.read())


# --- builtin buildings --------------------------------------------------------

def staircase_grid(h, w, origin=(0, 0), n_rooms=None, first="R1"):
    """Alternating chain along two adjacent anti-diagonals, solid elsewhere.

    From an R1 the chain steps east; from an R2 it steps south.  This is the
    only shape the facing-door rule connects, so all builtin buildings are
    staircases of varying size, position, and leading room type.
    """
    grid = [[SOLID] * w for _ in range(h)]
    i, j = origin
    name = first
    placed = 0
    limit = n_rooms if n_rooms is not None else h * w
    while 0 <= i < h and 0 <= j < w and placed < limit:
        grid[i][j] = name
        placed += 1
        if name == "R1":
            j += 1
        else:
            i += 1
        name = "R2" if name == "R1" else "R1"
    if n_rooms is not None and placed < n_rooms:
        raise LayoutError(f"grid {h}x{w} cannot hold {n_rooms} staircase rooms from {origin}")
    return tuple(tuple(row) for row in grid)


def builtin_layout(name: str) -> BuildingLayout:
    """Named buildings used by the experiments.

    stair2     3-room chain in a 2x2 grid (MPC oracle tests)
    stair4     7-room chain in a 4x4 grid (training base + comparisons)
    stair5     9-room chain in a 5x5 grid (transfer)
    stair3off  5-room chain in a 4x4 grid, shifted off the main diagonal (transfer)
    stair4b    5-room chain in a 3x3 grid led by R2 (transfer)
    room1      single R1 room (flat-RL smoke tests)
    """
    if name == "stair2":
        grid = staircase_grid(2, 2)
        return compose_building(grid, start_cell=(2, 2), goal_cell=subgoal_of(grid, (1, 1), "SE"))
    if name == "stair4":
        grid = staircase_grid(4, 4)
        return compose_building(grid, start_cell=(2, 2), goal_cell=subgoal_of(grid, (1, 2), "SW"))
    if name == "stair5":
        grid = staircase_grid(5, 5)
        return compose_building(grid, start_cell=(2, 2), goal_cell=subgoal_of(grid, (2, 3), "SE"))
    if name == "stair3off":
        grid = staircase_grid(4, 4, origin=(0, 1))
        return compose_building(grid, start_cell=(2, 6), goal_cell=subgoal_of(grid, (2, 3), "NW"))
    if name == "stair4b":
        grid = staircase_grid(3, 3, first="R2")
        return compose_building(grid, start_cell=(2, 2), goal_cell=subgoal_of(grid, (2, 2), "SE"))
    if name == "room1":
        grid = (("R1",),)
        return compose_building(grid, start_cell=(2, 2), goal_cell=(1, 1))
    raise LayoutError(f"unknown builtin layout {name!r}")


def subgoal_of(grid, room_location, corner):
    i, j = room_location
    lr, lc = CORNER_CELLS[corner]
    return (PITCH * i + 1 + lr, PITCH * j + 1 + lc)
