"""Command line front-end: ``cstarindex --model <preset> --task <task> ...``.

Exit codes: 0 success, 2 verdict-level failure, 1 error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import errors
from .action_model import ActionModel, GradedElement, model_from_dict, model_to_dict
from .dirac_index import (
    CalibrationCache,
    DiracModel,
    calibrate_constant,
    dirac_matrix,
    even_pairing,
    module_dirac,
    odd_pairing,
    pv_pairing_check,
    spectral_flow,
    summability_profile,
)
from .hilbert_module import saturation_by_compactness, trace_identity
from .models import bott_projection, constant_projection, preset
from .reports import (
    plot_eigenpath,
    plot_partial_sums,
    plot_singular_values,
    render_json,
    write_eigenpath_csv,
    write_json,
)
from .words import load_element

TASKS = ("saturate", "pair-odd", "pair-even", "flow", "calibrate", "trace-check", "summability", "pv-check")

IDENTITIES = {
    errors.UnitarityViolated: "u*u = uu* = 1",
    errors.NotProjection: "p = p* = p^2",
    errors.CrossingUnresolved: "spectral flow as a signed count of zero crossings",
    errors.GapTooSmall: "kernel dimension separated by a singular-value gap",
    errors.Unstable: "index of the compressed chiral Dirac stable under N -> N+2",
    errors.BudgetOverflow: "grading budget |lambda| <= M",
    errors.NotInvariant: "invariance under the rotation action R",
    errors.NotScalar: "winding number of a scalar unitary",
    errors.PhaseUnwrapAmbiguous: "winding number of a scalar unitary",
    errors.NotSelfAdjoint: "self-adjointness of the Dirac path",
}


@dataclass
class RunConfig:
    model: str = "rotation_circle"
    task: str = "saturate"
    N: int | None = None
    M: int | None = None
    L: int | None = None
    K: int | None = None
    k: int | None = None
    steps: int = 64
    p: float = 1.5
    u: str | None = None
    proj: str = "bott"
    q: str = "const"
    picture: str = "crossed"
    omega: list | None = None
    expect: str | None = None
    out: str | None = None
    csv: str | None = None
    cache: str | None = None
    seed: int = 0
    samples: int = 100
    timestamp: bool = True
    figures: bool = True
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        for name in ("N", "M", "L", "K"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"--{name} must be positive")
        if self.steps < 1:
            raise ValueError("--steps must be positive")
        if self.p <= 0:
            raise ValueError("--p must be positive")
        if self.k is not None and self.k not in (1, 2):
            raise ValueError("--k must be 1 or 2")
        if self.picture not in ("crossed", "module"):
            raise ValueError("--picture is 'crossed' or 'module'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cstarindex", description="Index pairings for torus actions at finite truncation.")
    ap.add_argument("--config", help="JSON file with RunConfig fields (flags override)")
    ap.add_argument("--model", help="preset name (e.g. rotation_circle, nc_torus:1/3) or model document path")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--N", type=int, help="mode truncation / window radius")
    ap.add_argument("--M", type=int, help="degree budget of the model")
    ap.add_argument("--L", type=int, help="word length / label radius for saturation tasks")
    ap.add_argument("--K", type=int, help="label window radius in the crossed picture")
    ap.add_argument("--k", type=int, help="group rank for calibrate")
    ap.add_argument("--steps", type=int, help="spectral-flow samples")
    ap.add_argument("--p", type=float, help="summability exponent")
    ap.add_argument("--u", help="unitary word (e.g. 'z^3', 'U1*U2') or element document")
    ap.add_argument("--proj", help="projection: bott[,mass=..,shift=x:y], const, or a word/document")
    ap.add_argument("--q", help="second projection for pair-even (default const)")
    ap.add_argument("--picture", choices=("crossed", "module"))
    ap.add_argument("--omega", help="JSON matrix for the curvature term on the fiber")
    ap.add_argument("--expect", help="'saturated', 'unsaturated' or an integer index")
    ap.add_argument("--out", help="JSON report path")
    ap.add_argument("--csv", help="CSV path for eigenvalue paths")
    ap.add_argument("--cache", help="calibration cache file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--no-timestamp", dest="timestamp", action="store_false", default=None)
    ap.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    return ap


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values: dict = {}
    if ns.config:
        values.update(json.loads(Path(ns.config).read_text()))
    for key, val in vars(ns).items():
        if key == "config" or val is None:
            continue
        values[key] = json.loads(val) if key == "omega" else val
    known = set(RunConfig.__dataclass_fields__)
    extra = {k: v for k, v in values.items() if k not in known}
    cfg = RunConfig(**{k: v for k, v in values.items() if k in known})
    cfg.extra = extra
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------


def load_model(spec: str, M: int) -> ActionModel:
    path = Path(spec)
    if spec.endswith(".json") and path.exists():
        model = model_from_dict(json.loads(path.read_text()))
        return model if M is None else model.with_budget(M)
    return preset(spec, M)


def _projection(model: ActionModel, spec: str) -> GradedElement:
    name, _, rest = spec.partition(",")
    if name == "bott":
        kw = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            if key == "mass":
                kw["mass"] = float(val)
            elif key == "shift":
                kw["shift"] = tuple(float(x) for x in val.split(":"))
            else:
                raise ValueError(f"unknown bott option {key!r}")
        return bott_projection(model, **kw)
    if name == "const":
        return constant_projection(model, (1, 0))
    if name == "zero":
        return constant_projection(model, (0, 0))
    return load_element(model, spec)


def _dirac(cfg: RunConfig, k: int) -> DiracModel:
    return DiracModel(k, None if cfg.omega is None else np.array(cfg.omega, dtype=complex))


def _operator(cfg: RunConfig, model: ActionModel, u: GradedElement):
    dirac = _dirac(cfg, 1)
    R = max(u.radius(), 1)
    if cfg.picture == "module":
        return module_dirac(model, dirac, cfg.N or max(4 * R, 8), u.amp)
    return dirac_matrix(model, dirac, cfg.N or 64, cfg.K or 2 * R + 2, u.amp)


def _default_word(model: ActionModel) -> str:
    return model.generator_names[0]


def run(cfg: RunConfig) -> tuple[int, dict, dict]:
    """Execute a task; returns (exit code, report payload, side data for files)."""
    cache = CalibrationCache(cfg.cache) if cfg.cache else None
    side: dict = {}
    status = 0
    if cfg.task == "calibrate":
        k = cfg.k or 1
        const = calibrate_constant(k, cache)
        payload = {"k": k, "calibration_constant": const, "cache": cfg.cache}
        return 0, payload, side

    default_M = {"pair-even": 40, "saturate": 4}.get(cfg.task, 12)
    model = load_model(cfg.model, cfg.M or default_M)
    payload: dict = {"model": model_to_dict(model)}

    if cfg.task == "saturate":
        from .action_model import saturation_check

        rep = saturation_check(model, chi_radius=2, word_length=cfg.L or 2)
        comp = saturation_by_compactness(model, cfg.N or (2 if model.r == 1 else 1))
        payload.update(saturation=rep.to_dict(), compactness=comp.to_dict())
        side["singular_values"] = rep.singular_values
        if cfg.expect in ("saturated", "unsaturated"):
            if rep.saturated != (cfg.expect == "saturated"):
                status = 2

    elif cfg.task in ("pair-odd", "flow", "pv-check"):
        u = load_element(model, cfg.u or _default_word(model))
        if cfg.task == "pv-check":
            rep = pv_pairing_check(u, cfg.N or 64, cfg.K, cfg.steps, cache)
            payload["pv_check"] = rep.to_dict()
            flow = rep.pairing.flow
            status = 0 if rep.consistent else 2
        elif cfg.task == "pair-odd":
            D = _operator(cfg, model, u)
            rep = odd_pairing(u, D, steps=cfg.steps, cache=cache)
            payload["pairing"] = rep.to_dict()
            flow = rep.flow
            if rep.converged and not rep.consistent():
                status = 2
            if cfg.expect is not None and cfg.expect.lstrip("-").isdigit() and rep.oracle_value != int(cfg.expect):
                status = 2
        else:
            D = _operator(cfg, model, u)
            flow = spectral_flow(D, u, cfg.steps)
            payload["flow"] = flow.to_dict()
            if cfg.expect is not None and cfg.expect.lstrip("-").isdigit() and flow.value != int(cfg.expect):
                status = 2
        side["flow"] = flow

    elif cfg.task == "pair-even":
        p = _projection(model, cfg.proj)
        q = _projection(model, cfg.q)
        dirac = _dirac(cfg, 2)
        Ns = (cfg.N, cfg.N + 2) if cfg.N else (6, 8, 10)
        rep = even_pairing(p, q, dirac, N_list=Ns, cache=cache)
        payload["pairing"] = rep.to_dict()
        if not rep.converged or not rep.consistent():
            status = 2
        if cfg.expect is not None and cfg.expect.lstrip("-").isdigit() and rep.oracle_value != int(cfg.expect):
            status = 2

    elif cfg.task == "trace-check":
        rng = np.random.default_rng(cfg.seed)
        R = 2
        worst = 0.0
        for _ in range(cfg.samples):
            v, w = (_random_element(model, R, rng) for _ in range(2))
            lhs, rhs = trace_identity(v, w)
            worst = max(worst, abs(lhs - rhs))
        payload["trace_identity"] = {"samples": cfg.samples, "radius": R, "seed": cfg.seed, "max_defect": worst}
        status = 0 if worst <= 1e-10 else 2

    elif cfg.task == "summability":
        a = load_element(model, cfg.u) if cfg.u else GradedElement.unit(model)
        top = cfg.N or 256
        N_list = sorted({max(1, top >> s) for s in range(5)})
        prof = summability_profile(a, _dirac(cfg, model.k), cfg.p, N_list)
        payload["summability"] = prof.to_dict()
        side["summability"] = prof

    payload["config"] = {k: v for k, v in asdict(cfg).items() if k not in ("out", "csv", "cache", "timestamp", "figures")}
    return status, payload, side


def _random_element(model: ActionModel, R: int, rng) -> GradedElement:
    from .action_model import box_labels

    wide = model.with_budget(max(model.budget, 2 * R))
    out = GradedElement.zeros(wide)
    for lam in box_labels(R, wide.r):
        coords = rng.standard_normal(wide.nB) + 1j * rng.standard_normal(wide.nB)
        out = out + GradedElement.monomial(wide, tuple(lam), wide.from_coefficient_coords(coords))
    return out


def _write_outputs(cfg: RunConfig, payload: dict, side: dict) -> None:
    if cfg.out:
        out = write_json(payload, cfg.out, cfg.timestamp)
        stem = out.with_suffix("")
        if cfg.figures:
            if "flow" in side:
                plot_eigenpath(side["flow"].ts, side["flow"].path, f"{stem}_eigenpath.png", cfg.task)
            if "summability" in side:
                s = side["summability"]
                plot_partial_sums(s.N_list, s.partial_sums, f"{stem}_partial_sums.png", f"p = {s.p}")
            if side.get("singular_values"):
                plot_singular_values(side["singular_values"], f"{stem}_singular_values.png", "saturation spans")
    else:
        sys.stdout.write(render_json(payload, cfg.timestamp))
    if cfg.csv and "flow" in side:
        write_eigenpath_csv(side["flow"].ts, side["flow"].path, cfg.csv)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        status, payload, side = run(cfg)
        _write_outputs(cfg, payload, side)
    except errors.CStarIndexError as exc:
        ident = next((v for k, v in IDENTITIES.items() if isinstance(exc, k)), "internal consistency")
        print(f"error [{type(exc).__name__}] failing identity: {ident}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if status == 2:
        print("verdict: expectation not met", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
