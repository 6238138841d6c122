import numpy as np
import pytest

from taskirl.grid_env import (
    ACTIONS,
    BARREL,
    BUILDING,
    DOWN,
    GRASS,
    KIND_CODES,
    LEFT,
    MOVES,
    NUM_REGION_TYPES,
    REGION_KINDS,
    RIGHT,
    STONE,
    TREE,
    UP,
    GridError,
    GridMap,
    PlacementError,
    emitted_labels,
    generate_random_env,
    initial_distribution,
    load_env,
    move_result,
    region_label,
    save_env,
    step_distribution,
)

CODE_TO_KIND = {c: i for i, c in enumerate(KIND_CODES)}


def make_grid(rows, start=None, slip=0.0, uniform_start=False):
    cells = np.array(
        [[CODE_TO_KIND[ch] for ch in row] for row in rows], dtype=np.int8
    )
    return GridMap(cells, start=start, slip=slip, uniform_start=uniform_start)


def brute_label(grid, cell):
    # Independent reimplementation of the labeling rule: full 3x3 window
    # inside the grid, more than six cells of one landmark kind.
    x, y = cell
    if x < 1 or y < 1 or x > grid.width - 2 or y > grid.height - 2:
        return None
    counts = {k: 0 for k in REGION_KINDS}
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            kind = grid.kind_at((x + dx, y + dy))
            if kind in counts:
                counts[kind] += 1
    for region, kind in enumerate(REGION_KINDS):
        if counts[kind] > 6:
            return region
    return None


FIVE_TREES = [
    "GGGGG",
    "GTTTG",
    "GTTTG",
    "GTTTG",
    "GGGGG",
]


def test_pure_block_labels_center():
    for code, region in (("B", 0), ("T", 1), ("L", 2), ("S", 3)):
        rows = ["GGGGG", "G" + code * 3 + "G", "G" + code * 3 + "G",
                "G" + code * 3 + "G", "GGGGG"]
        grid = make_grid(rows)
        assert region_label(grid, (2, 2)) == region


def test_seven_of_kind_labels_six_does_not():
    grid7 = make_grid(["GGGGG", "GTTGG", "GTTTG", "GTTGG", "GGGGG"])
    assert region_label(grid7, (2, 2)) == 1
    grid6 = make_grid(["GGGGG", "GTTGG", "GTTGG", "GTTGG", "GGGGG"])
    assert region_label(grid6, (2, 2)) is None


def test_border_cells_never_labeled():
    grid = make_grid(["TTT", "TTT", "TTT"])
    for x in range(3):
        for y in range(3):
            if (x, y) != (1, 1):
                assert region_label(grid, (x, y)) is None
    assert region_label(grid, (1, 1)) == 1


def test_region_label_out_of_bounds_raises():
    grid = make_grid(FIVE_TREES)
    with pytest.raises(GridError):
        region_label(grid, (5, 0))
    with pytest.raises(GridError):
        region_label(grid, (0, -1))


def test_labels_match_brute_force_on_random_grids():
    rng = np.random.default_rng(3)
    for _ in range(20):
        cells = rng.integers(0, 6, size=(7, 9)).astype(np.int8)
        grid = GridMap(cells)
        for y in range(7):
            for x in range(9):
                assert region_label(grid, (x, y)) == brute_label(grid, (x, y))


def test_label_ignores_cells_outside_window():
    base = ["GGGGGGG", "GGTTTGG", "GGTTTGG", "GGTTTGG", "GGGGGGG"]
    grid = make_grid(base)
    # Changing cells outside the 3x3 window leaves the label alone.
    changed = make_grid(["SGGGGGS"] + base[1:4] + ["SGGGGGS"])
    assert region_label(grid, (3, 2)) == region_label(changed, (3, 2)) == 1


def test_move_result_interior_and_clamp():
    grid = make_grid(FIVE_TREES)
    assert move_result(grid, (2, 2), UP) == (2, 1)
    assert move_result(grid, (2, 2), DOWN) == (2, 3)
    assert move_result(grid, (2, 2), LEFT) == (1, 2)
    assert move_result(grid, (2, 2), RIGHT) == (3, 2)
    assert move_result(grid, (0, 0), UP) == (0, 0)
    assert move_result(grid, (0, 0), LEFT) == (0, 0)
    assert move_result(grid, (4, 4), DOWN) == (4, 4)
    assert move_result(grid, (4, 4), RIGHT) == (4, 4)


def test_step_distribution_no_slip_is_deterministic():
    grid = make_grid(FIVE_TREES)
    assert step_distribution(grid, (2, 2), UP) == {(2, 1): 1.0}


def test_step_distribution_slip_interior():
    grid = make_grid(FIVE_TREES, slip=0.2)
    dist = step_distribution(grid, (2, 2), UP)
    assert dist[(2, 1)] == pytest.approx(0.85)
    assert dist[(2, 3)] == pytest.approx(0.05)
    assert dist[(1, 2)] == pytest.approx(0.05)
    assert dist[(3, 2)] == pytest.approx(0.05)


def test_step_distribution_corner_accumulates_clamped_mass():
    grid = make_grid(FIVE_TREES, slip=0.2)
    dist = step_distribution(grid, (0, 0), UP)
    # UP and LEFT both clamp back onto the corner.
    assert dist[(0, 0)] == pytest.approx(0.90)
    assert dist[(0, 1)] == pytest.approx(0.05)
    assert dist[(1, 0)] == pytest.approx(0.05)


def test_step_distribution_sums_to_one_everywhere():
    rng = np.random.default_rng(11)
    for slip in (0.0, 0.1, 0.5, 1.0):
        cells = rng.integers(0, 6, size=(4, 5)).astype(np.int8)
        grid = GridMap(cells, slip=slip)
        for y in range(4):
            for x in range(5):
                for a in ACTIONS:
                    dist = step_distribution(grid, (x, y), a)
                    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
                    for (nx, ny) in dist:
                        assert grid.in_bounds((nx, ny))
                        assert abs(nx - x) + abs(ny - y) <= 1


def test_emitted_labels_entry_semantics():
    rows = ["GGGGGGG", "GTTTGGG", "GTTTGGG", "GTTTGGG", "GGGGGGG"]
    grid = make_grid(rows)
    assert emitted_labels(grid, [(5, 2)]) == ()
    assert emitted_labels(grid, [(2, 2)]) == (1,)
    # Walk out of the region and back in: two entries, two emissions.
    path = [(2, 2), (3, 2), (4, 2), (3, 2), (2, 2)]
    assert emitted_labels(grid, path) == (1, 1)
    # Crossing unlabeled cells emits nothing.
    assert emitted_labels(grid, [(5, 0), (5, 1), (5, 2)]) == ()


def test_emitted_labels_stay_in_place_is_not_an_entry():
    rows = ["TTTGG", "TTTGG", "TTTGG"]
    grid = make_grid(rows)
    assert region_label(grid, (1, 1)) == 1
    # A clamped step repeats the cell; only the first visit emits.
    assert emitted_labels(grid, [(1, 1), (1, 1), (1, 1)]) == (1,)


def test_initial_distribution_point_mass_and_missing_start():
    grid = make_grid(FIVE_TREES, start=(0, 0))
    assert initial_distribution(grid) == [((0, 0), 1.0)]
    with pytest.raises(GridError):
        initial_distribution(make_grid(FIVE_TREES))


def test_initial_distribution_uniform_skips_labeled_cells():
    grid = make_grid(FIVE_TREES, uniform_start=True)
    dist = initial_distribution(grid)
    cells = {c for c, _ in dist}
    assert (2, 2) not in cells
    assert len(cells) == 24
    assert sum(p for _, p in dist) == pytest.approx(1.0)


def test_generate_env_centers_one_per_type():
    grid = generate_random_env(width=12, height=12, regions_per_type=1, seed=7)
    labeled = [
        (x, y, region_label(grid, (x, y)))
        for y in range(12)
        for x in range(12)
        if region_label(grid, (x, y)) is not None
    ]
    assert len(labeled) == 4
    assert sorted(lab for _, _, lab in labeled) == [0, 1, 2, 3]
    for x, y, _ in labeled:
        block = grid.cells[y - 1 : y + 2, x - 1 : x + 2]
        assert (block == block[1, 1]).all()
    assert grid.start is not None
    assert region_label(grid, grid.start) is None


def test_generate_env_centers_are_separated():
    grid = generate_random_env(width=14, height=14, regions_per_type=2, seed=0)
    centers = [
        (x, y)
        for y in range(14)
        for x in range(14)
        if region_label(grid, (x, y)) is not None
    ]
    assert len(centers) == 2 * NUM_REGION_TYPES
    for i, (x1, y1) in enumerate(centers):
        for x2, y2 in centers[i + 1 :]:
            assert max(abs(x1 - x2), abs(y1 - y2)) >= 4


def test_generate_env_deterministic_per_seed():
    a = generate_random_env(width=10, height=8, regions_per_type=1, seed=42)
    b = generate_random_env(width=10, height=8, regions_per_type=1, seed=42)
    assert np.array_equal(a.cells, b.cells)
    assert a.start == b.start
    c = generate_random_env(width=10, height=8, regions_per_type=1, seed=43)
    assert not np.array_equal(a.cells, c.cells) or a.start != c.start


def test_generate_env_zero_regions_all_filler():
    grid = generate_random_env(width=5, height=5, regions_per_type=0, seed=1)
    assert (grid.label_table() == -1).all()


def test_generate_env_impossible_raises():
    with pytest.raises(PlacementError):
        generate_random_env(width=3, height=3, regions_per_type=1, seed=0,
                            max_tries=20)


def test_grid_validation():
    with pytest.raises(GridError):
        GridMap(np.zeros((2, 5), dtype=np.int8))
    with pytest.raises(GridError):
        GridMap(np.zeros((5, 5), dtype=np.int8), slip=1.5)
    with pytest.raises(GridError):
        GridMap(np.zeros((5, 5), dtype=np.int8), start=(5, 0))


def test_save_load_round_trip(tmp_path):
    grid = generate_random_env(width=9, height=7, regions_per_type=1, seed=5)
    p1 = tmp_path / "env.txt"
    p2 = tmp_path / "env2.txt"
    save_env(grid, str(p1))
    loaded = load_env(str(p1))
    assert np.array_equal(loaded.cells, grid.cells)
    assert loaded.start == grid.start
    save_env(loaded, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_save_load_without_start(tmp_path):
    grid = make_grid(FIVE_TREES)
    path = tmp_path / "env.txt"
    save_env(grid, str(path))
    loaded = load_env(str(path))
    assert loaded.start is None
    assert np.array_equal(loaded.cells, grid.cells)


def test_load_rejects_malformed_files(tmp_path):
    good = "3 3 0 0\nGGG\nGGG\nGGG\n"
    cases = [
        good.replace("GGG\nGGG\nGGG", "GGG\nGGG"),  # missing row
        good.replace("GGG\nGGG\nGGG", "GGG\nGGGG\nGGG"),  # wrong width
        good.replace("GGG", "GXG", 1),  # unknown code
        "3\nGGG\nGGG\nGGG\n",  # short header
        good.replace("3 3 0 0", "3 3 9 9"),  # start out of bounds
    ]
    for i, text in enumerate(cases):
        path = tmp_path / f"bad{i}.txt"
        path.write_text(text)
        with pytest.raises(GridError):
            load_env(str(path))
