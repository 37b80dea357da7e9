import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.lattice import (Configuration, Window, cube_geometry, export_csv, grid_v_sites,
                              read_snapshot, write_snapshot)


@pytest.mark.parametrize("r,d,cube,ext,ring", [(3, 2, 9, 25, 16), (1, 2, 1, 9, 8), (1, 3, 1, 27, 26)])
def test_cube_sizes(r, d, cube, ext, ring):
    geo = cube_geometry(r, d)
    assert (len(geo.cube), len(geo.extended), len(geo.boundary)) == (cube, ext, ring)


@given(r=st.integers(1, 5), d=st.integers(2, 3))
def test_cube_geometry_partitions(r, d):
    geo = cube_geometry(r, d)
    assert len(geo.cube) == r**d
    assert len(geo.boundary) == (r + 2) ** d - r**d
    assert len(geo.outer_boundary) == (r + 4) ** d - (r + 2) ** d
    assert set(geo.cube).isdisjoint(geo.boundary)
    assert set(geo.cube) | set(geo.boundary) == set(geo.extended)


def test_cube_geometry_rejects_bad_input():
    with pytest.raises(ValueError):
        cube_geometry(0, 2)
    with pytest.raises(ValueError):
        cube_geometry(1, 1)


def test_grid_v_examples():
    sites = grid_v_sites(Window.box((9, 9)), 1)
    assert set(sites) == {(a, b) for a in (1, 4, 7) for b in (1, 4, 7)}
    assert (0, 0) not in sites
    assert grid_v_sites(Window.box((6, 6)), 3) == [(1, 1)]


@settings(max_examples=50)
@given(r=st.integers(1, 4), lo=st.integers(-12, 0), side=st.integers(8, 20))
def test_grid_v_extended_cubes_disjoint_and_avoid_origin(r, lo, side):
    window = Window((lo, lo), (lo + side, lo + side))
    sites = grid_v_sites(window, r, fit="extended")
    geo = cube_geometry(r, 2)
    seen = set()
    for x in sites:
        assert all((v - 1) % (r + 2) == 0 for v in x)
        ext = {(x[0] + a, x[1] + b) for a, b in geo.extended}
        assert (0, 0) not in {(x[0] + a, x[1] + b) for a, b in geo.cube}
        assert seen.isdisjoint(ext)
        assert all(window.contains(s) for s in ext)
        seen |= ext


def test_window_validation():
    with pytest.raises(ValueError):
        Window((0,), (3,))
    with pytest.raises(ValueError):
        Window((0, 0), (0, 3))
    with pytest.raises(ValueError):
        Window((0, 0), (3, 3), q=1)


def test_window_geometry():
    w = Window.centered(2)
    assert w.shape == (5, 5) and w.size == 25
    assert w.contains((-2, 2)) and not w.contains((3, 0))
    assert w.index((-2, -2)) == (0, 0)
    with pytest.raises(IndexError):
        w.index((3, 0))
    assert w.shrink(1) == Window((-1, -1), (2, 2))
    assert len(list(w.sites())) == 25


def test_configuration_get_set_and_iteration():
    w = Window((-1, -1), (3, 4), q=3)
    config = Configuration(w)
    assert not config.states.any()
    config[(0, 2)] = 2
    assert config[(0, 2)] == 2
    assert config.get((10, 10)) == 0
    with pytest.raises(ValueError):
        config[(0, 0)] = 3
    sites = [x for x, _ in config.items()]
    assert len(sites) == len(set(sites)) == w.size


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    w = Window((-3, 2), (5, 9), q=3)
    config = Configuration(w, rng.integers(0, 3, w.shape).astype(np.uint8))
    path = tmp_path / "c.txt"
    write_snapshot(config, path)
    assert read_snapshot(path) == config


def test_snapshot_round_trip_3d(tmp_path):
    w = Window((0, 0, 0), (3, 4, 5))
    config = Configuration.from_sites(w, [(0, 0, 0), (2, 3, 4), (1, 1, 1)])
    write_snapshot(config, tmp_path / "c.txt")
    assert read_snapshot(tmp_path / "c.txt") == config


def test_snapshot_rejects_corrupt_rows(tmp_path):
    config = Configuration(Window.box((2, 3)))
    path = tmp_path / "c.txt"
    write_snapshot(config, path)
    path.write_text(path.read_text().replace("0*3", "0*2", 1))
    with pytest.raises(ValueError):
        read_snapshot(path)


def test_export_csv(tmp_path):
    config = Configuration.from_sites(Window.box((2, 2)), [(1, 0)])
    export_csv(config, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,state"
    assert "1,0,1" in lines and len(lines) == 5
