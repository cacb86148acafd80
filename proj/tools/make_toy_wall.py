#!/usr/bin/env python3
"""Writes the toy wall mesh and brick texture used by data/toy_wall/scene.json."""
import pathlib
import sys

from PIL import Image

WIDTH, HEIGHT = 4.0, 2.5
COLS, ROWS = 16, 10
BRICK_W, BRICK_H, MORTAR = 0.25, 0.065, 0.01
TILE_U, TILE_V = 2 * (BRICK_W + MORTAR), 2 * (BRICK_H + MORTAR)
PX_PER_M = 200


def write_mesh(path):
    lines = ["# toy wall, front face towards -Y", "# material: plaster"]
    for j in range(ROWS + 1):
        for i in range(COLS + 1):
            x, z = WIDTH * i / COLS, HEIGHT * j / ROWS
            lines.append(f"v {x:.6f} 0 {z:.6f}")
    for j in range(ROWS + 1):
        for i in range(COLS + 1):
            x, z = WIDTH * i / COLS, HEIGHT * j / ROWS
            lines.append(f"vt {x / TILE_U:.6f} {z / TILE_V:.6f}")
    lines.append("vn 0 -1 0")
    for j in range(ROWS):
        for i in range(COLS):
            a = j * (COLS + 1) + i + 1
            b, c, d = a + 1, a + COLS + 2, a + COLS + 1
            lines.append(f"f {a}/{a}/1 {b}/{b}/1 {c}/{c}/1")
            lines.append(f"f {a}/{a}/1 {c}/{c}/1 {d}/{d}/1")
    path.write_text("\n".join(lines) + "\n")


def mortar_distance(u, v):
    pitch_v, pitch_u = BRICK_H + MORTAR, BRICK_W + MORTAR
    course = round(v / pitch_v)
    d_bed = abs(v - course * pitch_v)
    row = int(v // pitch_v)
    shift = 0.5 * pitch_u if row % 2 else 0.0
    k = round((u - shift) / pitch_u)
    d_head = abs(u - shift - k * pitch_u)
    return min(d_bed, d_head)


def write_texture(path):
    w, h = round(TILE_U * PX_PER_M), round(TILE_V * PX_PER_M)
    img = Image.new("RGB", (w, h))
    for py in range(h):
        for px in range(w):
            u = (px + 0.5) / PX_PER_M
            v = (h - py - 0.5) / PX_PER_M  # v = 0 is the bottom row
            if mortar_distance(u, v) <= MORTAR / 2:
                img.putpixel((px, py), (182, 176, 165))
            else:
                shade = ((px * 7 + py * 13) % 11) - 5
                img.putpixel((px, py), (158 + shade, 74 + shade, 52 + shade))
    img.save(path)


if __name__ == "__main__":
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent.parent / "data" / "toy_wall")
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(out / "wall.obj")
    write_texture(out / "bricks.png")
