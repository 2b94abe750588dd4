"""File writers: CSV grids, raw arrays, portable pixmaps and streamline tables.

Numbers are written with 17 significant digits, which round-trips every
double exactly; invalid samples are written as ``nan``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = [
    "CHANNEL_UNITS",
    "write_grid_csv",
    "read_grid_csv",
    "write_grid_npz",
    "density_to_gray",
    "momentum_to_rgb",
    "write_pgm",
    "write_ppm",
    "write_polylines",
    "read_polylines",
    "overlay_streamlines",
    "SENTINEL_RGB",
]

CHANNEL_UNITS = {
    "density": "1/m",
    "current": "1/m",
    "v_eff": "1 (dx/dz)",
    "kx_over_k0": "1",
}

# colour of masked pixels in the diverging map; pure black never occurs otherwise
SENTINEL_RGB = (0, 0, 0)

_FMT = "%.17g"


def write_grid_csv(path, x, z, values, channel: str, meta: dict | None = None) -> Path:
    """Write an ``(nz, nx)`` grid: comment block, x header row, then one row per z."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(z), len(x)):
        raise ValueError(f"grid shape {values.shape} does not match (nz, nx) = {(len(z), len(x))}")
    lines = [
        "# talbotflow field grid",
        f"# channel: {channel} [{CHANNEL_UNITS.get(channel, '?')}]",
        "# rows: z samples [m], first column; columns: x samples [m], header row",
        "# invalid samples: nan",
    ]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.write("z\\x," + ",".join(_FMT % v for v in x) + "\n")
        np.savetxt(fh, np.column_stack([np.asarray(z, dtype=float), values]), fmt=_FMT, delimiter=",")
    return path


def read_grid_csv(path):
    """Inverse of :func:`write_grid_csv`; returns ``(x, z, values)``."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    head = lines[0].rstrip("\n").split(",")
    if head[0] != "z\\x":
        raise ValueError(f"{path}: missing x header row")
    x = np.array([float(t) for t in head[1:]])
    body = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    return x, body[:, 0].copy(), body[:, 1:].copy()


def write_grid_npz(path, x, z, values, channel: str) -> Path:
    path = Path(path)
    np.savez(path, x=np.asarray(x, float), z=np.asarray(z, float), values=np.asarray(values, float), channel=channel)
    return path


def density_to_gray(rho) -> np.ndarray:
    """Linear map of ``rho / max(rho)`` to 0..255."""
    rho = np.asarray(rho, dtype=float)
    top = np.nanmax(rho) if rho.size else 0.0
    if not top > 0:
        return np.zeros(rho.shape, dtype=np.uint8)
    return np.rint(255.0 * np.clip(np.nan_to_num(rho / top), 0.0, 1.0)).astype(np.uint8)


def momentum_to_rgb(values, clip: float) -> np.ndarray:
    """Blue-white-red map of ``values / clip`` clipped to [-1, 1].

    -1 is pure blue, 0 white, +1 pure red; NaN pixels get :data:`SENTINEL_RGB`.
    The map is mirror-antisymmetric: negating a value swaps red and blue.
    """
    v = np.asarray(values, dtype=float)
    bad = ~np.isfinite(v)
    t = np.clip(np.where(bad, 0.0, v) / clip, -1.0, 1.0)
    fade = np.rint(255.0 * (1.0 - np.abs(t))).astype(np.uint8)
    full = np.full(t.shape, 255, dtype=np.uint8)
    r = np.where(t < 0, fade, full)
    b = np.where(t > 0, fade, full)
    rgb = np.stack([r, fade, b], axis=-1)
    rgb[bad] = SENTINEL_RGB
    return rgb


def write_pgm(path, gray) -> Path:
    """Binary P5 image; row 0 is the first z sample."""
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(gray).tobytes())
    return path


def write_ppm(path, rgb) -> Path:
    """Binary P6 image from an ``(h, w, 3)`` uint8 array."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(rgb).tobytes())
    return path


def write_polylines(path, streamlines, meta: dict | None = None) -> Path:
    """Long-format table ``line, seed_x, z, x`` with one row per sample."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# talbotflow streamlines; z and x in m\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        for i, s in enumerate(streamlines):
            if s.terminated_early:
                fh.write(f"# line {i}: {s.reason.value}\n")
        fh.write("line,seed_x,z,x\n")
        for i, s in enumerate(streamlines):
            n = len(s.z)
            block = np.column_stack([np.full(n, i), np.full(n, s.seed_x), s.z, s.x])
            np.savetxt(fh, block, fmt=["%d", _FMT, _FMT, _FMT], delimiter=",")
    return path


def read_polylines(path) -> dict[int, np.ndarray]:
    """``line index -> (n, 2)`` array of ``(z, x)`` samples."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if lines[0].strip() != "line,seed_x,z,x":
        raise ValueError(f"{path}: not a streamline table")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    out = {}
    for i in np.unique(data[:, 0]).astype(int):
        out[int(i)] = data[data[:, 0] == i][:, 2:4]
    return out


def overlay_streamlines(gray, x_axis, z_axis, streamlines, color=(220, 30, 30)) -> np.ndarray:
    """Paint streamlines over a grayscale carpet (rows = z, columns = x)."""
    gray = np.asarray(gray, dtype=np.uint8)
    rgb = np.repeat(gray[..., None], 3, axis=-1)
    x0, x1 = x_axis[0], x_axis[-1]
    nx = len(x_axis)
    for s in streamlines:
        rows = np.flatnonzero((z_axis >= s.z[0]) & (z_axis <= s.z[-1]))
        if rows.size == 0:
            continue
        xs = np.interp(z_axis[rows], s.z, s.x)
        cols = np.rint((xs - x0) / (x1 - x0) * (nx - 1)).astype(int)
        keep = (cols >= 0) & (cols < nx)
        rgb[rows[keep], cols[keep]] = color
    return rgb
