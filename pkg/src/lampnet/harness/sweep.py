"""Cartesian parameter sweeps over scenario paths."""

from __future__ import annotations

import itertools
from pathlib import Path

import yaml

from lampnet.harness.runner import Table, run
from lampnet.harness.scenario import ScenarioError, resolve, with_overrides
from lampnet.harness.seeds import derived_seed


def load_grid(path):
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError("", f"cannot read grid {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError("", f"grid {path} is not valid YAML: {exc}") from None
    return parse_grid(raw)


def parse_grid(raw):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ScenarioError("", "grid must map configuration paths to value lists")
    grid = {}
    for key, values in raw.items():
        if not isinstance(values, list) or not values:
            raise ScenarioError(str(key), "grid values must be a non-empty list")
        grid[str(key)] = values
    return grid


def grid_points(grid):
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def sweep(config, grid, out_dir=None, summary_keys=None):
    """Run every grid point; returns [(overrides, report)].

    Point i runs with seed derived from (master seed, i). With ``out_dir``,
    point i writes into ``point_<i>/`` and ``index.csv`` lists every point.
    """
    for key in grid:
        try:
            resolve(config.data, key)
        except KeyError:
            raise ScenarioError(key, "grid key names no configuration path") from None
    points = grid_points(grid) if grid else [{}]
    results = []
    for i, overrides in enumerate(points):
        cfg = with_overrides(config, overrides) if overrides else config
        seed = derived_seed(config.master_seed, "sweep", i)
        report = run(cfg, seed)
        results.append((overrides, report))
        if out_dir is not None:
            report.write(Path(out_dir) / f"point_{i:03d}")
    if out_dir is not None:
        keys = list(grid)
        skeys = summary_keys or sorted({k for _, r in results for k in r.summary})
        rows = []
        for i, (ov, r) in enumerate(results):
            rows.append((f"point_{i:03d}", *(ov.get(k) for k in keys), r.seed, r.digest,
                         *(r.summary.get(k) for k in skeys)))
        index = Table(("point", *keys, "seed", "config_sha256", *skeys), rows)
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "index.csv").write_text(index.render())
    return results
