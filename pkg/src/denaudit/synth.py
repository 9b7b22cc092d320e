"""Synthetic datasets with planted identity clusters and per-group error levels.

Random numbers come from numpy's PCG64 bit generator. Draw order for a dataset
with seed ``s``, using ``Generator(PCG64(s))``:

1. group centers: ``standard_normal((n_groups, dim)) * group_sep``
2. identity offsets: ``standard_normal((n_groups * ids_per_group, dim)) * id_sep``
3. sample offsets: ``standard_normal((n, dim)) * sample_spread``
4. error noise: ``standard_normal(n) * error_noise``

Datapoints are laid out group-major, then identity, then sample. Embeddings
are rounded to float32. Model ``m`` of a family draws its noise from
``Generator(PCG64(SeedSequence([s, m + 1])))``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .core import Dataset, DenError

DEFAULT_MAX_POINTS = 200_000


@dataclass(frozen=True)
class SynthConfig:
    n_groups: int = 2
    ids_per_group: int = 20
    samples_per_id: int = 10
    dim: int = 16
    group_sep: float = 10.0
    id_sep: float = 2.0
    sample_spread: float = 0.25
    group_error_means: tuple = (0.2, 0.4)
    error_noise: float = 0.05
    seed: int = 0
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        object.__setattr__(self, "group_error_means", tuple(float(v) for v in self.group_error_means))
        for name in ("n_groups", "ids_per_group", "samples_per_id", "dim"):
            if int(getattr(self, name)) < 1:
                raise DenError(f"{name} must be a positive integer")
        for name in ("group_sep", "id_sep", "sample_spread", "error_noise"):
            if not getattr(self, name) >= 0:
                raise DenError(f"{name} must be >= 0")
        if len(self.group_error_means) != self.n_groups:
            raise DenError(f"group_error_means has {len(self.group_error_means)} entries, "
                           f"expected n_groups={self.n_groups}")
        if any(m < 0 for m in self.group_error_means):
            raise DenError("group_error_means must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise DenError("seed must be an unsigned 64-bit integer")

    @property
    def n(self) -> int:
        return self.n_groups * self.ids_per_group * self.samples_per_id

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DenError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["group_error_means"] = list(self.group_error_means)
        return d


def _structure(cfg: SynthConfig):
    if cfg.n > cfg.max_points:
        raise DenError(f"synthetic dataset would have {cfg.n} points, above the budget of {cfg.max_points}")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n_ids = cfg.n_groups * cfg.ids_per_group
    centers = rng.standard_normal((cfg.n_groups, cfg.dim)) * cfg.group_sep
    id_centers = np.repeat(centers, cfg.ids_per_group, axis=0)
    id_centers = id_centers + rng.standard_normal((n_ids, cfg.dim)) * cfg.id_sep
    samples = np.repeat(id_centers, cfg.samples_per_id, axis=0)
    samples = samples + rng.standard_normal((cfg.n, cfg.dim)) * cfg.sample_spread
    identity = np.repeat(np.arange(n_ids), cfg.samples_per_id)
    group = identity // cfg.ids_per_group
    embeddings = samples.astype(np.float32).astype(np.float64)
    return rng, embeddings, identity, group


def _planted_errors(means, group, noise) -> np.ndarray:
    return np.maximum(0.0, np.asarray(means, dtype=np.float64)[group] + noise)


def generate_synthetic_dataset(cfg: SynthConfig) -> Dataset:
    """Hierarchical Gaussian embeddings with identity and ``group`` labels."""
    rng, embeddings, identity, group = _structure(cfg)
    noise = rng.standard_normal(cfg.n) * cfg.error_noise
    errors = _planted_errors(cfg.group_error_means, group, noise)
    return Dataset.create(embeddings, errors, identity=identity, groups={"group": group})


@dataclass(frozen=True)
class FamilyMember:
    name: str
    errors: np.ndarray
    planted_disparity: float
    group_error_means: tuple


@dataclass(frozen=True)
class ModelFamily:
    dataset: Dataset
    members: list = field(default_factory=list)

    def __iter__(self):
        return iter((m.errors, m.planted_disparity) for m in self.members)

    def __len__(self):
        return len(self.members)


def planted_means(top: float, n_groups: int, disparity: float) -> tuple:
    """Group means falling linearly from ``top`` to ``top * (1 - disparity)``."""
    if n_groups == 1:
        return (float(top),)
    return tuple(float(top * (1.0 - disparity * g / (n_groups - 1))) for g in range(n_groups))


def generate_model_family(cfg: SynthConfig, n_models: int,
                          disparity_range: tuple = (0.0, 0.6),
                          names: Optional[list] = None) -> ModelFamily:
    """Error vectors of ``n_models`` synthetic models over one shared dataset.

    Model ``m`` has planted max-min group disparity
    ``linspace(low, high, n_models)[m]``: group 0 sits at the largest entry
    of ``cfg.group_error_means`` and the other groups step down linearly.
    """
    if n_models < 3:
        raise DenError("a model family needs at least 3 models")
    if cfg.n_groups < 2:
        raise DenError("a model family needs at least 2 groups")
    low, high = (float(v) for v in disparity_range)
    if low == high:
        raise DenError("disparity range must not be degenerate")
    if not (0 <= low <= 1 and 0 <= high <= 1):
        raise DenError("planted disparities must lie in [0, 1]")
    _, embeddings, identity, group = _structure(cfg)
    base = Dataset.create(embeddings, np.zeros(cfg.n), identity=identity, groups={"group": group})
    top = max(cfg.group_error_means)
    if top <= 0:
        raise DenError("group_error_means must contain a positive value")
    names = names or [f"model_{m:02d}" for m in range(n_models)]
    members = []
    for m, d in enumerate(np.linspace(low, high, n_models)):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, m + 1])))
        means = planted_means(top, cfg.n_groups, float(d))
        errors = _planted_errors(means, group, rng.standard_normal(cfg.n) * cfg.error_noise)
        members.append(FamilyMember(names[m], errors, float(d), means))
    return ModelFamily(base, members)
