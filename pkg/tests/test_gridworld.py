import numpy as np
import pytest

from apc.gridworld import (
    DOOR,
    FLOOR,
    GOAL_BONUS,
    STEP_COST,
    WALL,
    BuildingLayout,
    LayoutError,
    LayoutParseError,
    bfs_distances,
    builtin_layout,
    compose_building,
    corner_exit_side,
    crossing_cells,
    format_layout,
    global_of,
    is_interior,
    local_frame,
    parse_layout,
    render_room_image,
    room_distances,
    step,
    subgoal_cell,
)


def single_room():
    return compose_building((("R1",),), start_cell=(2, 2), goal_cell=(3, 3))


def two_rooms():
    # R1 then R2 east of it: the shared wall owns R1's east door
    return compose_building((("R1", "R2"),), start_cell=(2, 2), goal_cell=(2, 6))


def test_single_room_tiling():
    layout = single_room()
    cm = layout.cell_map
    assert cm.shape == (5, 5)
    assert np.all(cm[1:4, 1:4] == FLOOR)
    # boundary stays solid: template doors face outward and are not carved
    border = np.concatenate([cm[0, :], cm[-1, :], cm[:, 0], cm[:, -1]])
    assert np.all(border == WALL)


def test_two_room_shared_wall_door():
    layout = two_rooms()
    cm = layout.cell_map
    assert cm.shape == (5, 9)
    # enumerate the shared wall column: R1's east door sits at row 3 and
    # matches R2's west door, so exactly that cell opens
    shared = cm[:, 4]
    assert shared[3] == DOOR
    assert np.all(np.delete(shared, 3) == WALL)


def test_vertical_pair_door():
    # R2 above R1 connects through R2's south door at column offset 3
    layout = compose_building((("R2",), ("R1",)), start_cell=(2, 2), goal_cell=(6, 2))
    assert layout.cell_map[4, 3] == DOOR


def test_mismatched_pair_is_disconnected():
    # R2 east of R1's west side has no facing doors anywhere
    with pytest.raises(LayoutError):
        compose_building((("R2", "R1"),), start_cell=(2, 2), goal_cell=(2, 6))


def test_solid_slot_isolating_room_rejected():
    grid = (("R1", "#", "R1"),)
    with pytest.raises(LayoutError):
        compose_building(grid, start_cell=(2, 2), goal_cell=(2, 10))


def test_step_rewards_and_termination():
    layout = single_room()  # goal at (3, 3)
    res = step(layout, (1, 1), 1)  # E onto plain floor
    assert res.next_state == (1, 2)
    assert res.reward == pytest.approx(STEP_COST)
    assert not res.done

    res = step(layout, (3, 2), 1)  # E into the goal
    assert res.next_state == (3, 3)
    assert res.reward == pytest.approx(STEP_COST + GOAL_BONUS)
    assert res.done

    res = step(layout, (1, 1), 0)  # N into a wall: legal no-op
    assert res.next_state == (1, 1)
    assert res.reward == pytest.approx(STEP_COST)
    assert not res.done


def test_local_frame_corner_and_roundtrip():
    layout = single_room()
    frame = local_frame(layout, (1, 1))
    assert frame.room_type == "R1"
    assert frame.room_location == (0, 0)
    assert frame.local_cell == (0, 0)
    for cell in [(r, c) for r in range(1, 4) for c in range(1, 4)]:
        f = local_frame(layout, cell)
        assert global_of(f.room_location, f.local_cell) == cell


def test_local_frame_second_room():
    layout = two_rooms()
    frame = local_frame(layout, (2, 6))
    assert frame.room_location == (0, 1)
    assert frame.room_type == "R2"
    assert frame.local_cell == (1, 1)


def test_local_frame_on_door_prefers_prev_room():
    layout = two_rooms()
    door = (3, 4)
    left = local_frame(layout, door, prev_room=(0, 0))
    right = local_frame(layout, door, prev_room=(0, 1))
    assert left.room_location == (0, 0) and left.local_cell == (2, 2)
    assert right.room_location == (0, 1) and right.local_cell == (2, 0)
    # without history the smaller slot index wins
    assert local_frame(layout, door).room_location == (0, 0)


def test_room_images_template_invariant_and_distinct():
    layout = builtin_layout("stair4")
    r1_rooms = layout.rooms_of_type("R1")
    r2_rooms = layout.rooms_of_type("R2")
    img_a = render_room_image(layout, r1_rooms[0])
    img_b = render_room_image(layout, r1_rooms[-1])
    assert np.array_equal(img_a, img_b)
    assert img_a.shape == (5, 5)
    assert set(np.unique(img_a)) <= {0.0, 1.0}
    img_r2 = render_room_image(layout, r2_rooms[0])
    assert np.any(img_a != img_r2)


def test_render_solid_slot_errors():
    layout = builtin_layout("stair2")
    with pytest.raises(LayoutError):
        render_room_image(layout, (1, 0))


def test_subgoal_cells():
    layout = single_room()
    assert subgoal_cell(layout, (0, 0), "NW") == (1, 1)
    assert subgoal_cell(layout, (0, 0), "SE") == (3, 3)
    corners = {subgoal_cell(layout, (0, 0), c) for c in ("NW", "NE", "SW", "SE")}
    assert len(corners) == 4


def test_corner_exits_and_crossing():
    layout = two_rooms()
    # R1's SE corner exits east through the carved door into R2's SW corner
    assert corner_exit_side(layout, (0, 0), "SE") == "E"
    door, arrival, room = crossing_cells(layout, (0, 0), "SE")
    assert door == (3, 4)
    assert arrival == (3, 5)
    assert room == (0, 1)
    assert local_frame(layout, arrival).local_cell == (2, 0)
    # R1's north door faces the outer boundary here, so NE has no exit
    assert corner_exit_side(layout, (0, 0), "NE") is None
    # and R2 crosses back west from its SW corner
    assert corner_exit_side(layout, (0, 1), "SW") == "W"


def test_reward_closure_over_all_steps():
    layout = builtin_layout("stair2")
    allowed = {STEP_COST, STEP_COST + GOAL_BONUS}
    for r in range(layout.cell_map.shape[0]):
        for c in range(layout.cell_map.shape[1]):
            if layout.cell_map[r, c] == WALL:
                continue
            for action in range(4):
                res = step(layout, (r, c), action)
                assert res.reward in allowed
                assert res.done == (res.next_state == layout.goal_cell)


def test_layout_determinism():
    a = builtin_layout("stair4")
    b = builtin_layout("stair4")
    assert a.room_grid == b.room_grid
    assert np.array_equal(a.cell_map, b.cell_map)


def test_room_distances_on_staircase():
    layout = builtin_layout("stair4")
    dist = room_distances(layout, (0, 0))
    assert dist[(0, 1)] == 1
    assert dist[(1, 1)] == 2
    assert dist[(1, 2)] == 3
    assert dist[(3, 3)] == 6
    # chain distance equals room-grid Manhattan distance on a staircase
    for room, d in dist.items():
        assert d == abs(room[0]) + abs(room[1])


def test_bfs_distances_simple():
    layout = single_room()
    dist = bfs_distances(layout, (1, 1))
    assert dist[(3, 3)] == 4
    assert dist[(1, 2)] == 1


def test_layout_file_roundtrip():
    layout = builtin_layout("stair2")
    text = format_layout(layout)
    again = parse_layout(text)
    assert again.room_grid == layout.room_grid
    assert np.array_equal(again.cell_map, layout.cell_map)
    assert again.start_cell == layout.start_cell
    assert again.goal_cell == layout.goal_cell


def test_layout_parse_errors_carry_position():
    with pytest.raises(LayoutParseError) as exc:
        parse_layout("rooms 1\n1\nstart 1 1\ngoal 1 2\n")
    assert "line 1" in str(exc.value)

    bad_token = "rooms 1 2\n1 Q\nstart 2 2\ngoal 2 2\n"
    with pytest.raises(LayoutParseError) as exc:
        parse_layout(bad_token)
    assert "line 2" in str(exc.value) and "column 2" in str(exc.value)

    with pytest.raises(LayoutParseError):
        parse_layout("rooms 1 1\n1\nstart 0 0\ngoal 2 2\n")  # start on a wall


def test_with_goal_and_start_validation():
    layout = builtin_layout("stair2")
    moved = layout.with_goal((1, 1))
    assert moved.goal_cell == (1, 1)
    with pytest.raises(LayoutError):
        layout.with_goal((0, 0))
    with pytest.raises(LayoutError):
        layout.with_start((4, 4))


def test_builtin_layouts_compose():
    for name in ("stair2", "stair4", "stair5", "stair3off", "stair4b", "room1"):
        layout = builtin_layout(name)
        assert isinstance(layout, BuildingLayout)
        assert is_interior(layout, layout.start_cell)
        assert is_interior(layout, layout.goal_cell)
    with pytest.raises(LayoutError):
        builtin_layout("nope")
