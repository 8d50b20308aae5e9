"""CSV/JSON/SVG persistence, run manifests, and a tiny worker pool.

Every output file starts with a schema comment line and is accompanied by
a manifest JSON capturing the resolved configuration, seeds, version, and
output digests, which is sufficient to replay the command bit-exactly.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

CSV_SCHEMA_PREFIX = "# qmetrix-csv v1"


def sha256_of(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_csv(
    path: str | Path,
    kind: str,
    header: list[str],
    rows: list[list],
    config_line: str | None = None,
) -> None:
    """CSV with the schema string as the first comment line.

    Floats are written with repr-style shortest round-trip formatting.
    """
    lines = [f"{CSV_SCHEMA_PREFIX} {kind}"]
    if config_line:
        lines.append(f"# config: {config_line}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[str, dict, list[str], list[list[str]]]:
    """Inverse of write_csv; returns (kind, config dict, header, rows)."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(CSV_SCHEMA_PREFIX):
        raise ValueError(f"{path} missing schema comment line")
    kind = text[0][len(CSV_SCHEMA_PREFIX) :].strip()
    config: dict = {}
    i = 1
    if i < len(text) and text[i].startswith("# config:"):
        for pair in text[i][len("# config:") :].strip().split():
            if "=" in pair:
                k, v = pair.split("=", 1)
                config[k] = v
        i += 1
    header = text[i].split(",")
    rows = [line.split(",") for line in text[i + 1 :] if line]
    return kind, config, header, rows


@dataclass
class RunManifest:
    """Everything needed to replay a command to byte-identical outputs."""

    command: str
    config: dict
    seed: int | None
    version: str
    wall_time_s: float = 0.0
    outputs: dict = field(default_factory=dict)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = sha256_of(path)

    def write(self, path: str | Path) -> None:
        payload = {
            "schema": "qmetrix-manifest-v1",
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


class StopWatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False


def parse_config_file(path: str | Path) -> dict[str, str]:
    """key = value lines, hash comments, mirroring the CLI flag names."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def default_threads() -> int:
    env = os.environ.get("QMETRIX_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"QMETRIX_THREADS must be an integer, got {env!r}") from exc
    return 1


def parallel_map(fn, items, threads: int):
    """Ordered map over items, threaded when threads > 1.

    Work items must be independent; results return in input order so
    output writing stays deterministic.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def write_svg_polyline(
    path: str | Path,
    xs,
    ys,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    size: tuple[int, int] = (640, 420),
) -> None:
    """Minimal dependency-free line chart for quick visual checks."""
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    if len(xs) != len(ys) or not xs:
        raise ValueError("need equal-length nonempty x and y")
    w, h = size
    ml, mr, mt, mb = 60, 20, 40, 50
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    xspan = (x1 - x0) or 1.0
    yspan = (y1 - y0) or 1.0

    def px(x):
        return ml + (x - x0) / xspan * (w - ml - mr)

    def py(y):
        return h - mb - (y - y0) / yspan * (h - mt - mb)

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w/2:.0f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{ml}" y1="{h-mb}" x2="{w-mr}" y2="{h-mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{h-mb}" stroke="black"/>',
        f'<text x="{w/2:.0f}" y="{h-12}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="16" y="{h/2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {h/2:.0f})">{y_label}</text>',
        f'<text x="{ml}" y="{h-mb+16}" font-size="10">{x0:.4g}</text>',
        f'<text x="{w-mr}" y="{h-mb+16}" text-anchor="end" font-size="10">{x1:.4g}</text>',
        f'<text x="{ml-4}" y="{h-mb}" text-anchor="end" font-size="10">{y0:.4g}</text>',
        f'<text x="{ml-4}" y="{mt+4}" text-anchor="end" font-size="10">{y1:.4g}</text>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>',
        "</svg>",
    ]
    Path(path).write_text("\n".join(parts) + "\n")
