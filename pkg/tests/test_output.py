import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from talbotflow.flow import Streamline, Termination
from talbotflow.output import (
    SENTINEL_RGB,
    density_to_gray,
    momentum_to_rgb,
    overlay_streamlines,
    read_grid_csv,
    read_polylines,
    write_grid_csv,
    write_pgm,
    write_polylines,
    write_ppm,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=30, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.one_of(finite, st.just(np.nan)))
)
def test_grid_csv_round_trip_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "g.csv"
    nz, nx = values.shape
    x = np.linspace(-1e-5, 1e-5, nx) * np.pi
    z = np.linspace(0, 0.3, nz) / 7
    write_grid_csv(path, x, z, values, "density", {"Lambda": "0.0 m^-3"})
    x2, z2, v2 = read_grid_csv(path)
    np.testing.assert_array_equal(x2, x)
    np.testing.assert_array_equal(z2, z)
    assert np.array_equal(v2, values, equal_nan=True)


def test_grid_csv_header(tmp_path):
    p = write_grid_csv(tmp_path / "g.csv", [0.0, 1.0], [0.0, 2.0], np.zeros((2, 2)), "kx_over_k0")
    text = p.read_text().splitlines()
    assert text[0].startswith("#")
    assert any("channel: kx_over_k0" in t for t in text)
    assert text[-3].startswith("z\\x,")


def test_momentum_colormap():
    v = np.array([[-10.0, -0.5, 0.0, 0.5, 10.0, np.nan]])
    rgb = momentum_to_rgb(v, 0.5)
    assert tuple(rgb[0, 0]) == (0, 0, 255)
    assert tuple(rgb[0, 1]) == (0, 0, 255)
    assert tuple(rgb[0, 2]) == (255, 255, 255)
    assert tuple(rgb[0, 4]) == (255, 0, 0)
    assert tuple(rgb[0, 5]) == SENTINEL_RGB
    # negation swaps red and blue
    w = np.linspace(-1, 1, 41)[None, :]
    np.testing.assert_array_equal(momentum_to_rgb(w, 0.7), momentum_to_rgb(-w, 0.7)[..., ::-1])


def test_density_gray():
    g = density_to_gray(np.array([[0.0, 0.5, 1.0]]))
    np.testing.assert_array_equal(g, [[0, 128, 255]])
    assert density_to_gray(np.zeros((2, 2))).max() == 0


def test_pixmap_headers(tmp_path):
    p5 = write_pgm(tmp_path / "a.pgm", np.zeros((3, 4), np.uint8)).read_bytes()
    assert p5.startswith(b"P5\n4 3\n255\n") and len(p5) == len(b"P5\n4 3\n255\n") + 12
    p6 = write_ppm(tmp_path / "a.ppm", np.zeros((3, 4, 3), np.uint8)).read_bytes()
    assert p6.startswith(b"P6\n4 3\n255\n") and len(p6) == len(b"P6\n4 3\n255\n") + 36


def test_polyline_round_trip(tmp_path):
    lines = [
        Streamline(-1e-6, np.array([0.0, 0.1, 0.2]), np.array([-1e-6, -1.1e-6, -1.3e-6])),
        Streamline(1e-6, np.array([0.0]), np.array([1e-6]), True, Termination.ENTERED_INVALID_REGION),
    ]
    p = write_polylines(tmp_path / "s.csv", lines, {"crossings": 0})
    assert "entered_invalid_region" in p.read_text()
    back = read_polylines(p)
    np.testing.assert_array_equal(back[0], np.column_stack([lines[0].z, lines[0].x]))
    np.testing.assert_array_equal(back[1], [[0.0, 1e-6]])


def test_overlay_marks_pixels():
    gray = np.zeros((5, 11), np.uint8)
    x = np.linspace(-1, 1, 11)
    z = np.linspace(0, 4, 5)
    img = overlay_streamlines(gray, x, z, [Streamline(0.0, z, np.zeros(5))])
    assert np.all(img[:, 5, 0] == 220)
    assert img[:, :5].max() == 0
