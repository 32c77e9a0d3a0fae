"""Experiment configuration: YAML parsing, validation, object construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import yaml

from .admittivity import AprioriData, ParameterField, WindowResult, best_frequency_window
from .errors import ConfigError
from .families import build_family, build_field
from .geometry import BoundaryPatch, BoxDomain, make_tau_grid

_DEFAULT_APRIORI = {
    "p": 6.0,
    "lambda": 2.0,
    "e1": 2.0,
    "e2": 1.25,
    "bigE": 60.0,
    "dcal": 1.5,
    "fcal": 10.0,
    "alpha": 0.25,
}


@dataclass
class ExperimentConfig:
    raw: dict
    path: Optional[str]
    seed: int
    box: BoxDomain
    patch: BoundaryPatch
    eta: float
    tau_grid: tuple
    family_template: str
    family_params: dict
    k: float
    k_was_auto: bool
    enforce_window: bool
    window: WindowResult
    apriori: AprioriData
    a1: ParameterField
    a2: Optional[ParameterField]
    h: float
    rho: float
    order: int
    x0: tuple
    sweep_scales: tuple
    sweep_delta: Optional[ParameterField]
    formats: tuple

    def build_family(self):
        return build_family(
            self.family_template, self.k, self.family_params,
            t_range=self.apriori.t_range,
        )


def _get(section: dict, key: str, default=None, required=False, where=""):
    if key in section:
        return section[key]
    if required:
        raise ConfigError(f"missing config key '{where}{key}'")
    return default


def load_config(path=None, data: dict = None, seed: int = None, mesh_h: float = None) -> ExperimentConfig:
    """Parse and cross-validate an experiment config.

    Command-line overrides (seed, mesh pitch) are applied before validation
    and are reflected in the canonical dict used for hashing.
    """
    if data is None:
        if path is None:
            raise ConfigError("either a path or a config mapping is required")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except OSError:
            raise
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data = dict(data)
    if seed is not None:
        data["seed"] = int(seed)

    geo = _get(data, "geometry", required=True, where="")
    box_spec = _get(geo, "box", {"lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0]})
    box = BoxDomain(tuple(box_spec["lo"]), tuple(box_spec["hi"]))
    patch_spec = _get(geo, "patch", required=True, where="geometry.")
    patch = BoundaryPatch(
        box=box,
        face=_get(patch_spec, "face", "z+"),
        rect_lo=tuple(_get(patch_spec, "rect_lo", required=True, where="geometry.patch.")),
        rect_hi=tuple(_get(patch_spec, "rect_hi", required=True, where="geometry.patch.")),
    )
    eta = float(_get(geo, "eta", required=True, where="geometry."))

    disc = _get(data, "discretization", {})
    h = float(_get(disc, "h", 0.0625))
    if mesh_h is not None:
        h = float(mesh_h)
        data.setdefault("discretization", {})
        data["discretization"]["h"] = h
    rho = _get(disc, "rho", None)
    rho = eta / 4.0 if rho is None else float(rho)
    order = int(_get(disc, "order", 0))
    x0 = tuple(float(v) for v in _get(disc, "x0", (0.5, 0.5, 1.0)))

    tau_spec = _get(geo, "tau_grid", {})
    tau_start = _get(tau_spec, "start", None)
    tau_start = eta / 16.0 if tau_start is None else float(tau_start)
    tau_grid = make_tau_grid(
        tau_start, float(_get(tau_spec, "ratio", 0.5)), int(_get(tau_spec, "count", 5))
    )

    ap = dict(_DEFAULT_APRIORI)
    ap.update(_get(data, "apriori", {}))
    fam_spec = _get(data, "family", required=True, where="")
    template = _get(fam_spec, "template", required=True, where="family.")
    params = dict(_get(fam_spec, "params", {}))
    n = 3
    window = best_frequency_window(float(ap["e1"]), float(ap["e2"]), n)
    k_raw = _get(fam_spec, "k", "auto")
    k_was_auto = isinstance(k_raw, str)
    if k_was_auto:
        if k_raw != "auto":
            raise ConfigError(f"family.k must be a number or 'auto', got {k_raw!r}")
        if window.empty:
            raise ConfigError(
                "family.k is 'auto' but the frequency window is empty; "
                "set an explicit k"
            )
        k = 0.9 * window.k_max
    else:
        k = float(k_raw)
    enforce_window = bool(_get(fam_spec, "enforce_window", False))

    eta0 = patch.eta0()
    apriori = AprioriData(
        n=n, p=float(ap["p"]), k=k, lam=float(ap["lambda"]),
        e1=float(ap["e1"]), e2=float(ap["e2"]), bigE=float(ap["bigE"]),
        dcal=float(ap["dcal"]), fcal=float(ap["fcal"]), alpha=float(ap["alpha"]),
        r0=float(ap.get("r0", min(box.hi_arr - box.lo_arr) / 2.0)),
        L=float(ap.get("L", 1.0)),
        eta=eta, eta0=eta0 * (1.0 - 1e-12), tau0=eta / 8.0, diam=box.diameter,
    )

    fields = _get(data, "fields", required=True, where="")
    a1 = build_field(_get(fields, "a1", required=True, where="fields."))
    a2_spec = _get(fields, "a2", None)
    a2 = build_field(a2_spec) if a2_spec is not None else None

    sweep = _get(data, "sweep", {})
    scales = tuple(float(s) for s in _get(sweep, "scales", ()))
    delta_spec = _get(sweep, "delta", None)
    delta = build_field(delta_spec) if delta_spec is not None else None

    out = _get(data, "output", {})
    formats = tuple(_get(out, "formats", ("csv", "json", "svg")))

    return ExperimentConfig(
        raw=data, path=str(path) if path else None,
        seed=int(_get(data, "seed", 0)),
        box=box, patch=patch, eta=eta, tau_grid=tau_grid,
        family_template=template, family_params=params,
        k=k, k_was_auto=k_was_auto, enforce_window=enforce_window, window=window,
        apriori=apriori, a1=a1, a2=a2, h=h, rho=rho, order=order, x0=x0,
        sweep_scales=scales, sweep_delta=delta, formats=formats,
    )
