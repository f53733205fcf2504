"""JSON experiment configuration: grid, semilattice generators, process kind
and measures, seed and tolerance overrides.

Errors carry a JSON-pointer-style path to the offending field so the CLI can
exit with a precise message.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .construction import FddSpec, MixtureSpec
from .errors import ConfigError, SetMarkovError
from .grid import CellMeasure, GroundGrid
from .kernels import (
    CompoundPoissonKernel,
    DirichletKernel,
    EmpiricalKernel,
    GaussianIncrementKernel,
    PoissonIncrementKernel,
)
from .lattice import IndexedSet, Semilattice, close_under_intersection

DEFAULT_TOLERANCES = {
    "exact": 1e-10,
    "quadrature": 1e-7,
    "dirichlet_quadrature": 1e-4,
    "mc_sigmas": 3.0,
}

MEASURE_KIND = {
    "empirical": "probability",
    "gaussian": "intensity",
    "poisson": "intensity",
    "compound_poisson": "intensity",
    "dirichlet": "dirichlet",
}


@dataclass
class ExperimentConfig:
    raw: dict
    grid: GroundGrid
    lattice: Semilattice
    spec: FddSpec | MixtureSpec
    seed: int
    tolerances: dict
    experiment: dict = field(default_factory=dict)

    @property
    def kernel(self):
        return self.spec.kernel

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"{path}/{key}: missing required field")
    return obj[key]


def _build_measure(node, grid: GroundGrid, kind: str, path: str) -> CellMeasure:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: measure must be an object")
    try:
        if node.get("uniform"):
            if kind == "probability":
                return CellMeasure.uniform_probability(grid)
            return CellMeasure(grid, np.full(grid.cell_count, 1.0), kind)
        if "constant" in node:
            return CellMeasure(grid, np.full(grid.cell_count, float(node["constant"])), kind)
        weights = _need(node, "weights", path)
        return CellMeasure(grid, weights, kind)
    except SetMarkovError as e:
        raise ConfigError(f"{path}: {e}") from None


def _build_lattice(node, grid: GroundGrid, path: str) -> Semilattice:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: must be an object")
    generators = []
    for i, corner in enumerate(node.get("rectangles", [])):
        try:
            generators.append(IndexedSet.rectangle(grid, corner))
        except SetMarkovError as e:
            raise ConfigError(f"{path}/rectangles/{i}: {e}") from None
    for i, cells in enumerate(node.get("cell_lists", [])):
        try:
            generators.append(IndexedSet.from_cells(grid, cells))
        except SetMarkovError as e:
            raise ConfigError(f"{path}/cell_lists/{i}: {e}") from None
    if not generators:
        raise ConfigError(f"{path}: needs rectangles or cell_lists")
    try:
        return close_under_intersection(generators)
    except SetMarkovError as e:
        raise ConfigError(f"{path}: {e}") from None


def _build_kernel(node, grid: GroundGrid, path: str):
    kind = _need(node, "kind", path)
    if kind not in MEASURE_KIND:
        raise ConfigError(f"{path}/kind: unknown process kind {kind!r}")
    measure = _build_measure(_need(node, "measure", path), grid,
                             MEASURE_KIND[kind], f"{path}/measure")
    try:
        if kind == "empirical":
            return EmpiricalKernel(int(_need(node, "n", path)), measure,
                                   corrupted=bool(node.get("corrupted", False)))
        if kind == "gaussian":
            return GaussianIncrementKernel(measure, node.get("initial", "normal"))
        if kind == "poisson":
            return PoissonIncrementKernel(measure, node.get("initial", "poisson"))
        if kind == "compound_poisson":
            jumps = _need(node, "jumps", path)
            return CompoundPoissonKernel(measure,
                                         tuple(jumps.get("values", ())),
                                         tuple(jumps.get("probs", ())),
                                         node.get("initial", "compound"))
        return DirichletKernel(measure)
    except SetMarkovError as e:
        raise ConfigError(f"{path}: {e}") from None


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("/: config must be a JSON object")
    grid_node = _need(raw, "grid", "")
    grid = GroundGrid(tuple(_need(grid_node, "extents", "/grid")))
    lattice = _build_lattice(_need(raw, "semilattice", ""), grid, "/semilattice")
    proc = _need(raw, "process", "")
    kernel = _build_kernel(proc, grid, "/process")
    try:
        spec: FddSpec | MixtureSpec = FddSpec(lattice, kernel)
        mix = proc.get("mixture")
        if mix is not None:
            other = dict(proc)
            other.pop("mixture")
            other["measure"] = _need(mix, "measure", "/process/mixture")
            kernel2 = _build_kernel(other, grid, "/process/mixture")
            w = float(mix.get("weight", 0.5))
            spec = MixtureSpec((FddSpec(lattice, kernel), FddSpec(lattice, kernel2)),
                               (w, 1.0 - w))
    except SetMarkovError as e:
        raise ConfigError(f"/process: {e}") from None
    seed = int(raw.get("seed", 0))
    tolerances = dict(DEFAULT_TOLERANCES)
    for k, v in raw.get("tolerances", {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"/tolerances/{k}: unknown tolerance name")
        tolerances[k] = float(v)
    experiment = raw.get("experiment", {})
    return ExperimentConfig(raw, grid, lattice, spec, seed, tolerances, experiment)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return parse_config(raw)


def merge_tolerance_overrides(cfg: ExperimentConfig, path: str | None):
    if path is None:
        return
    try:
        with open(path) as f:
            overrides = json.load(f)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        raise ConfigError(f"tolerance overrides: {e}") from None
    for k, v in overrides.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerance overrides: unknown name {k!r}")
        cfg.tolerances[k] = float(v)
