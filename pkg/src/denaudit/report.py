"""Analyses behind each CLI command, rendered as deterministic JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bundle import Bundle
from .core import DataError, DenError
from .disparity import (EPSILON, SizeGrid, default_grid, den_curve, estimation_error_curve,
                        partition_disparity)
from .geometry import Metric, ProfileLike, distance_range, profile_for, retrieval_auroc
from .stats import affect_metrics, pearson_with_p, rank_models


@dataclass(frozen=True)
class AnalysisConfig:
    neighborhood: str = "knn"
    metric: str = "rawlsian"
    grid: str = "default"
    epsilon: float = EPSILON
    distance: str = "l2"
    anchors: str = "all"
    seed: int = 0

    def echo(self) -> dict:
        return asdict(self)


def parse_anchors(spec: str, n: int, seed: int) -> Optional[np.ndarray]:
    if spec == "all":
        return None
    if spec.startswith("sample:"):
        try:
            m = int(spec.split(":", 1)[1])
        except ValueError:
            raise DenError(f"bad anchors spec {spec!r}") from None
        if not 1 <= m <= n:
            raise DenError(f"anchor sample size {m} must lie in 1..{n}")
        rng = np.random.Generator(np.random.PCG64(seed))
        return np.sort(rng.choice(n, size=m, replace=False))
    raise DenError(f"bad anchors spec {spec!r}; use 'all' or 'sample:<m>'")


def parse_grid(spec: str, kind: str, profile: ProfileLike) -> SizeGrid:
    """``default``, ``geom:<count>``, ``lin:<count>`` or an explicit comma list."""
    n = profile.n
    if spec == "default":
        return default_grid(kind, profile)
    if spec.startswith(("geom:", "lin:")):
        how, count = spec.split(":", 1)
        try:
            count = int(count)
        except ValueError:
            raise DenError(f"bad grid spec {spec!r}") from None
        if count < 1:
            raise DenError("grid needs at least one point")
        if kind == "knn":
            if how == "geom":
                return default_grid("knn", profile, count)
            return SizeGrid("knn", tuple(np.unique(np.round(np.linspace(1, n, count)).astype(int))))
        lo, hi = distance_range(profile)
        if hi == 0:
            return SizeGrid("radius", (1.0,))
        space = np.geomspace if how == "geom" else np.linspace
        return SizeGrid("radius", tuple(np.unique(space(lo, hi, count))))
    try:
        vals = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise DenError(f"bad grid spec {spec!r}") from None
    return SizeGrid(kind, tuple(vals))


class Analysis:
    """One bundle plus the configuration shared by every command."""

    def __init__(self, bundle: Bundle, cfg: AnalysisConfig, threads: int = 1,
                 models: Optional[Sequence[str]] = None):
        self.bundle = bundle
        self.cfg = cfg
        self.threads = max(1, int(threads))
        names = list(models) if models else list(bundle.models)
        missing = [m for m in names if m not in bundle.models]
        if missing:
            raise DataError(f"bundle has no model {missing[0]!r}")
        self.model_names = names
        self._profile = None
        self._grid = None

    @property
    def profile(self) -> ProfileLike:
        if self._profile is None:
            anchors = parse_anchors(self.cfg.anchors, self.bundle.n, self.cfg.seed)
            self._profile = profile_for(self.bundle.embeddings, Metric(self.cfg.distance), anchors, self.threads)
        return self._profile

    @property
    def grid(self) -> SizeGrid:
        if self._grid is None:
            self._grid = parse_grid(self.cfg.grid, self.cfg.neighborhood, self.profile)
        return self._grid

    def errors(self, name: str) -> np.ndarray:
        return self.bundle.models[name].errors

    def curve(self, name: str):
        return den_curve(self.profile, self.errors(name), self.grid, self.cfg.metric,
                         self.cfg.epsilon, self.threads)

    def references(self, requested: Optional[Sequence[str]] = None) -> list[str]:
        ds = self.bundle.dataset(self.model_names[0])
        if requested:
            for ref in requested:
                ds.partition(ref)
            return list(requested)
        refs = ds.reference_names()
        if not refs:
            raise DataError("bundle has no identity or group partitions to compare against")
        return refs

    def true_disparity(self, name: str, ref: str) -> float:
        part = self.bundle.dataset(name).partition(ref)
        return partition_disparity(self.errors(name), part, self.cfg.metric, self.cfg.epsilon)

    # command bodies

    def curves(self) -> dict:
        out = {}
        for name in self.model_names:
            c = self.curve(name)
            out[name] = {"sizes": list(c.sizes), "values": list(c.values), "auc": c.auc}
        return {"curves": out, "neighborhood": self.grid.kind, "metric": self.cfg.metric}

    def aucs(self) -> dict:
        return {"auc_den": {name: self.curve(name).auc for name in self.model_names}}

    def estimates(self, requested: Optional[Sequence[str]] = None) -> dict:
        refs = self.references(requested)
        out = {}
        for name in self.model_names:
            c = self.curve(name)
            per_ref = {}
            for ref in refs:
                truth = self.true_disparity(name, ref)
                est = estimation_error_curve(c, truth)
                per_ref[ref] = {"true_disparity": truth, "errors": list(est.errors),
                                "argmin_size": est.argmin_size, "min_error": est.min_error}
            out[name] = {"sizes": list(c.sizes), "values": list(c.values), "auc": c.auc,
                         "references": per_ref}
        return {"estimates": out}

    def ranking(self, requested: Optional[Sequence[str]] = None) -> dict:
        refs = self.references(requested)
        auc = {name: self.curve(name).auc for name in self.model_names}
        truth = {name: {ref: self.true_disparity(name, ref) for ref in refs} for name in self.model_names}
        rep = rank_models(auc, truth)
        return {
            "models": list(rep.models),
            "auc_den": list(rep.auc_den),
            "true_disparities": {k: list(v) for k, v in rep.true_disparities.items()},
            "kendall_tau": {k: {"corr": c.coefficient, "p_value": c.p_value, "n": c.n}
                            for k, c in rep.correlations.items()},
        }

    def proxy_noise(self) -> dict:
        if self.bundle.identity is None:
            raise DataError("proxy-noise needs identity labels (partition 'individual')")
        auroc = retrieval_auroc(self.profile, self.bundle.identity)
        anchors = self.profile.anchors
        defined = ~np.isnan(auroc)
        out = {}
        for name in self.model_names:
            e = self.errors(name)[anchors][defined]
            try:
                r = pearson_with_p(auroc[defined], e)
                out[name] = {"pcc": r.coefficient, "p_value": r.p_value, "n": r.n}
            except DenError as exc:
                out[name] = {"pcc": None, "p_value": None, "n": int(defined.sum()), "reason": str(exc)}
        return {"retrieval_auroc_mean": float(np.mean(auroc[defined])) if defined.any() else None,
                "undefined_anchors": int((~defined).sum()), "correlations": out}

    def metrics(self) -> dict:
        out = {}
        for name in self.model_names:
            run = self.bundle.models[name].run
            if run is None:
                continue
            out[name] = affect_metrics(run.labels, run.predictions)
        if not out:
            raise DataError("metrics need models given as prediction + label columns")
        return {"metrics": out}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def make_report(command: str, digest: str, config: dict, results: dict) -> dict:
    return {"tool": "denaudit", "version": __version__, "command": command,
            "input_digest": digest, "config": config, "results": results}


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def curve_csv(results: dict) -> str:
    """Flat ``model,size,value`` rows for plotting a ``curve`` or ``estimate`` result."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "size", "value"])
    curves = results.get("curves") or results.get("estimates") or {}
    for name, c in curves.items():
        for s, v in zip(c["sizes"], c["values"]):
            w.writerow([name, repr(s), repr(v)])
    return buf.getvalue()
