"""``nslab`` experiment runner.

Every run is described by an :class:`ExperimentConfig` (a preset or a
YAML file, plus command-line overrides). CSV outputs start with a
``# config_hash=...`` comment line followed by a header row; identical
configs give byte-identical files.

Exit status: 0 success, 2 invalid configuration or input, 3 numerical
failure (non-finite values or blow-up).
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np
import yaml

from . import fields as F
from . import norms as Nm
from . import regularity as R
from . import solver as S
from .decompose import compact_bump_field, gap_split, kato_check, threshold_split
from .grid import GridSpec, PhysicalField, spectral_divergence_residual
from .inequalities import (CKNParams, ensemble, random_scalar_field, verify_ckn_inequality,
                           verify_stein_inequality)
from .io import read_archive, read_field, write_archive, write_field

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
MODES = ("direct", "perturbed", "mollified", "2d")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything that determines a run; ``output`` does not enter the hash."""
    scenario: str = "custom"
    result: str = ""
    mode: str = "direct"
    grid: dict = field(default_factory=lambda: {"dims": 3, "n": 32, "half_width": math.pi})
    solver: dict = field(default_factory=lambda: {"dt": 1e-3, "t_end": 0.5, "stride": 10})
    fields: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    params: dict = field(default_factory=dict)
    output: str = "nslab_out"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        unknown = set(self.constants) - {f.name for f in dc_fields(Nm.Constants)}
        if unknown:
            raise ConfigError(f"unknown constants {sorted(unknown)}")
        try:
            self.grid_spec()
            self.solver_config()
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def grid_spec(self, dims: int | None = None) -> GridSpec:
        g = dict(self.grid)
        if dims is not None:
            g["dims"] = dims
        return GridSpec(int(g.get("dims", 3)), int(g.get("n", 32)), float(g.get("half_width", math.pi)))

    def solver_config(self) -> S.SolverConfig:
        return S.SolverConfig(**self.solver)

    def constants_obj(self) -> Nm.Constants:
        return Nm.Constants(**self.constants)

    def digest(self) -> str:
        d = asdict(self)
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


_ABC_REF = {"family": "abc", "A": 0.3, "B": 0.3, "C": 0.3}
_BUMP = {"family": "bump", "radius": 1.0, "shift": 0.5}

PRESETS: dict[str, dict] = {
    "beltrami-perturbation": {
        "result": "prop2.4", "mode": "perturbed",
        "fields": {"reference": _ABC_REF, "perturbation": _BUMP, "threshold": "prop2.4", "fraction": 0.5},
    },
    "regular-set": {
        "result": "thm1.7", "mode": "perturbed",
        "fields": {"reference": _ABC_REF, "perturbation": _BUMP, "threshold": "thm1.7", "fraction": 0.5},
    },
    "extension-2d": {
        "result": "prop2.3", "mode": "perturbed",
        "fields": {"reference": {"family": "taylor-green-3d", "amplitude": 0.3},
                   "perturbation": _BUMP, "threshold": "prop2.3", "fraction": 0.5},
    },
    "axisymmetric": {
        "result": "prop2.1", "mode": "perturbed",
        "fields": {"reference": {"family": "axisym", "amplitude": 0.05},
                   "perturbation": _BUMP, "threshold": "prop2.1", "fraction": 0.5},
    },
    "mollified-ladder": {
        "result": "prop4.4-mollified", "mode": "mollified",
        "solver": {"dt": 1e-3, "t_end": 0.2, "stride": 10},
        "fields": {"reference": {"family": "abc", "A": 1.0, "B": 1.0, "C": 1.0},
                   "perturbation": {"family": "bump", "radius": 1.2, "shift": 0.5, "amplitude": 1.0}},
        "params": {"eps": [0.4, 0.2, 0.1, 0.05, 0.0]},
    },
    "gap-split": {
        "result": "thm6.1-gap", "seeds": list(range(20)),
        "params": {"p": 2.5, "n_bumps": 3, "amplitude": 3.0},
    },
    "appendix-ckn": {
        "result": "appendix-ckn", "seeds": list(range(100)),
        "params": {"q": [3.5, 6, 12], "cubic": True, "mus": [1e-4, 1e-2, 1.0]},
    },
    "appendix-stein": {
        "result": "appendix-stein", "seeds": list(range(100)),
        "params": {"p": 2.0, "a": -0.5, "mus": [1e-4, 1e-2, 1.0]},
    },
}
_BY_RESULT = {v["result"]: k for k, v in PRESETS.items() if k != "regular-set"}
_BY_RESULT["thm1.7"] = "regular-set"


def preset_config(name: str) -> ExperimentConfig:
    key = _BY_RESULT.get(name, name)
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(scenario=key, **copy.deepcopy(PRESETS[key]))


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    base = asdict(preset_config(raw.pop("preset"))) if "preset" in raw else {}
    known = {f.name for f in dc_fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            base[k] = {**base[k], **v}
        else:
            base[k] = v
    try:
        return ExperimentConfig(**base)
    except TypeError as e:
        raise ConfigError(str(e)) from e


# ---------------------------------------------------------------------------
# field construction

def build_field(spec: dict, grid: GridSpec, seed: int = 0) -> PhysicalField:
    spec = dict(spec)
    fam = spec.pop("family", None)
    try:
        if fam == "abc":
            return F.make_abc_flow(F.BeltramiSpec(spec.get("A", 1.0), spec.get("B", 1.0), spec.get("C", 1.0),
                                                  int(spec.get("wavenumber", 1))), grid)
        if fam == "bump":
            return F.make_bump(F.BumpSpec(float(spec.get("radius", 1.0)),
                                          tuple(spec.get("direction", (1.0, 0.0, 0.0))),
                                          float(spec.get("shift", 0.0)), float(spec.get("amplitude", 1.0))), grid)
        if fam == "axisym":
            u = F.make_axisym_zero_swirl(F.AxisymSpec(F.gaussian_ring), grid)
            return u * float(spec.get("amplitude", 1.0))
        if fam == "taylor-green":
            return F.taylor_green_2d(grid, float(spec.get("amplitude", 1.0)))
        if fam == "taylor-green-3d":
            g2 = GridSpec(2, grid.n, grid.half_width)
            return F.extend_2d_to_3d(F.taylor_green_2d(g2, float(spec.get("amplitude", 1.0))), grid)
        if fam == "random":
            ens = F.GaussianEnsembleSpec(amplitude=float(spec.get("amplitude", 1.0)))
            return F.random_smooth_field(grid, int(spec.get("seed", seed)), ens)
        if fam == "file":
            return read_field(spec["path"])
    except KeyError as e:
        raise ConfigError(f"field spec is missing {e}") from e
    raise ConfigError(f"unknown field family {fam!r}")


def _field_size(kind: str, w0: PhysicalField, t_end: float) -> float:
    """Size parameter entering the smallness threshold of ``kind``."""
    sup2 = float(np.max(np.sum(w0.values**2, axis=0)))
    if kind in ("thm1.7", "prop2.4"):
        lam = w0.meta.get("eigenvalue")
        if lam is None:
            raise ConfigError(f"threshold {kind} needs a Beltrami reference")
        return 0.5 * sup2 / lam**2 if kind == "thm1.7" else sup2 / lam**2
    if kind == "prop2.3":
        return sup2 * t_end  # sup-norm is nonincreasing for the 2D flow
    if kind == "prop2.1":
        return Nm.sobolev_norm(w0, 2)
    raise ConfigError(f"unknown threshold kind {kind!r}")


def scale_below_threshold(v: PhysicalField, w0: PhysicalField, kind: str, fraction: float,
                          constants: Nm.Constants, t_end: float) -> tuple[PhysicalField, dict]:
    """Rescale v so that || |x|^{-1/2} v ||_{L^2} = fraction * threshold."""
    if not 0 < fraction < 1:
        raise ConfigError("fraction must lie in (0, 1)")
    size = _field_size(kind, w0, t_end)
    thr = Nm.smallness_threshold(kind, size, constants=constants)
    n = Nm.weighted_lp_norm(v, 2, Nm.WeightSpec(exponent=-0.5))
    if n == 0:
        raise ConfigError("perturbation vanishes")
    v = v * (fraction * thr / n)
    info = {"threshold_kind": kind, "size_parameter": size, "threshold": thr,
            "perturbation_weighted_L2": Nm.weighted_lp_norm(v, 2, Nm.WeightSpec(exponent=-0.5))}
    return v, info


def initial_pair(cfg: ExperimentConfig) -> tuple[PhysicalField, PhysicalField, dict]:
    g = cfg.grid_spec()
    fs = cfg.fields
    if "reference" not in fs or "perturbation" not in fs:
        raise ConfigError("perturbed modes need fields.reference and fields.perturbation")
    w0 = build_field(fs["reference"], g, cfg.seeds[0])
    v0 = build_field(fs["perturbation"], g, cfg.seeds[0])
    info: dict = {}
    if "threshold" in fs:
        v0, info = scale_below_threshold(v0, w0, fs["threshold"], float(fs.get("fraction", 0.5)),
                                         cfg.constants_obj(), cfg.solver_config().t_end)
    return w0, v0, info


def _reference(w0: PhysicalField):
    lam = w0.meta.get("eigenvalue")
    return S.beltrami_callable(w0, lam) if lam is not None else w0


# ---------------------------------------------------------------------------
# CSV helpers

def write_csv(path: Path, header: list[str], rows, config_hash: str, notes: dict | None = None) -> Path:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    for k, v in (notes or {}).items():
        buf.write(f"# {k}={_fmt(v)}\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17e}"
    return str(x)


def _hash_of(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _vec(text: str, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as e:
        raise ConfigError(f"--{name} expects comma-separated numbers, got {text!r}") from e


def _floats(text: str, name: str) -> list[float]:
    return list(_vec(text, name))


# ---------------------------------------------------------------------------
# subcommands

def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        cfg = ExperimentConfig()
    d = asdict(cfg)
    for key, sect, name in (("n", "grid", "n"), ("dt", "solver", "dt"), ("t_end", "solver", "t_end"),
                            ("stride", "solver", "stride")):
        val = getattr(args, key, None)
        if val is not None:
            d[sect][name] = val
    if getattr(args, "mode", None):
        d["mode"] = args.mode
    if getattr(args, "seeds", None):
        d["seeds"] = [int(s) for s in _floats(args.seeds, "seeds")]
    if getattr(args, "out", None):
        d["output"] = args.out
    return ExperimentConfig(**d)


def _audit_rows(traj: S.Trajectory):
    rep = S.energy_audit(traj)
    ser = traj.series
    bound = None
    if "w_inf_sq" in ser:
        bound = ser["energy"][0] * np.exp(Nm.cumulative_trapezoid(ser["t"], ser["w_inf_sq"]))
    for i, t in enumerate(rep.times):
        row = [t, ser["energy"][i], ser["dissipation_cum"][i], rep.violation[i]]
        row.append(bound[i] if bound is not None else "")
        yield row


def cmd_generate(args) -> int:
    dims = 2 if args.family == "taylor-green" else 3
    g = GridSpec(dims, args.n, args.L)
    spec = {"family": args.family, "A": args.A, "B": args.B, "C": args.C, "wavenumber": args.m,
            "radius": args.radius, "shift": args.shift, "amplitude": args.amplitude, "seed": args.seed}
    u = build_field(spec, g, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_field(out, u)
    print(f"wrote {out} ({u.components} components, N={g.n}, divergence residual "
          f"{spectral_divergence_residual(u):.3e})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    h = cfg.digest()
    out = Path(cfg.output)
    sc = cfg.solver_config()
    meta = {"scenario": cfg.scenario, "result": cfg.result, "mode": cfg.mode, "config_hash": h,
            "seeds": cfg.seeds}
    if args.reference or args.initial:
        if args.initial is None:
            raise ConfigError("--reference needs --initial")
        v0 = read_field(args.initial)
        w0 = read_field(args.reference) if args.reference else None
        info: dict = {}
    elif cfg.mode in ("perturbed", "mollified"):
        w0, v0, info = initial_pair(cfg)
    else:
        dims = 2 if cfg.mode == "2d" else 3
        spec = cfg.fields.get("initial", {"family": "taylor-green" if dims == 2 else "abc"})
        v0 = build_field(spec, cfg.grid_spec(dims), cfg.seeds[0])
        w0, info = None, {}
    meta.update(info)

    if cfg.mode == "mollified":
        if w0 is None:
            raise ConfigError("mollified mode needs a reference field")
        eps_list = [float(e) for e in cfg.params.get("eps", [0.4, 0.2, 0.1, 0.05, 0.0])]
        finals, rows = [], []
        for e in eps_list:
            tr = S.solve_mollified(v0, _reference(w0), e, sc, meta=dict(meta))
            write_archive(out / f"eps_{e:g}", tr)
            finals.append((e, tr.snapshots[-1], tr.meta["energy_monitor_max"]))
        for i, (e, snap, mon) in enumerate(finals):
            diff = (snap - finals[i + 1][1]).l2() if i + 1 < len(finals) else ""
            rows.append([e, sc.t_end, diff, mon])
        write_csv(out / "mollified.csv", ["eps", "t", "l2_diff_next", "monitor_max"], rows, h,
                  {"result": cfg.result})
        print(f"mollified ladder {eps_list} written to {out}")
        return EXIT_OK

    if cfg.mode == "direct":
        tr = S.solve_nse(v0, sc, meta=meta)
    elif cfg.mode == "2d":
        if v0.grid.dims != 2:
            raise ConfigError("2d mode needs a 2D initial field")
        tr = S.solve_2d_nse(v0, sc, meta=meta)
    else:
        if w0 is None:
            raise ConfigError("perturbed mode needs a reference field")
        tr = S.solve_perturbed(v0, _reference(w0), sc, meta=meta)
    write_archive(out / "traj", tr)
    write_csv(out / "energy_audit.csv", ["t", "energy", "dissipation_cum", "ledger", "gronwall_bound"],
              _audit_rows(tr), h, {"result": cfg.result, "mode": cfg.mode})
    print(f"{cfg.mode} run ({cfg.result or cfg.scenario}) written to {out}")
    return EXIT_OK


def cmd_perturb(args) -> int:
    w0 = read_field(args.base)
    spec = {"family": "bump", "radius": args.radius, "shift": args.shift}
    v = build_field(spec, w0.grid)
    cons = Nm.Constants(**({f"delta{i}": args.delta for i in range(5)} if args.delta else {}))
    v, info = scale_below_threshold(v, w0, args.kind, args.fraction, cons, args.t_end)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_field(out, v)
    h = _hash_of({"cmd": "perturb", **{k: v for k, v in vars(args).items() if k not in ("func", "out")}})
    write_csv(out.with_suffix(".csv"), ["quantity", "value"], sorted(info.items()), h)
    print(f"wrote {out} (threshold {info['threshold']:.6e})")
    return EXIT_OK


def _traj_hash(traj_dir: str, args) -> str:
    man = json.loads((Path(traj_dir) / "manifest.json").read_text())
    src = man.get("meta", {}).get("config_hash", "")
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "traj")}
    return _hash_of({"source": src, "times": man["times"], "params": params})


def cmd_regular_map(args) -> int:
    traj = read_archive(args.traj)
    u = S.combined(traj)
    h = _traj_hash(args.traj, args)
    radii = [c * u.grid.h for c in _floats(args.radii, "radii")]
    center = _vec(args.center, "center")
    lattice = R.default_lattice(u, center, radii, n_times=args.times)
    eps = args.eps_star if args.eps_star is not None else Nm.Constants().eps_star
    m = R.map_regular_set(u, center, lattice, radii, eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "regular_map.csv").write_text(m.to_csv(f"config_hash={h}"))
    print(f"alpha_hat = {m.alpha_hat:g} ({int(m.verdicts.sum())}/{len(m.verdicts)} points pass)")
    return EXIT_OK


def cmd_segment(args) -> int:
    traj = read_archive(args.traj)
    h = _traj_hash(args.traj, args)
    res = R.segment_diagnostic(traj, _vec(args.xi, "xi"), args.T, _floats(args.mus, "mus"),
                               _vec(args.center, "center"))
    rows = [[m, v] for m, v in zip(res.mus, res.values)] + [[0.0, res.singular_value]]
    write_csv(Path(args.out) / "segment.csv", ["mu", "value"], rows, h,
              {"extrapolated_mu0": res.extrapolated, "monotone": res.monotone})
    print(f"segment integral at mu=0: {res.singular_value:.6e}")
    return EXIT_OK


def cmd_tstar(args) -> int:
    traj = read_archive(args.traj)
    h = _traj_hash(args.traj, args)
    xi, c = _vec(args.xi, "xi"), _vec(args.center, "center")
    if args.gamma_M is not None:
        res = R.t_star_gamma(traj, xi, args.mu, args.gamma_M, args.T or float(traj.times[-1]), c)
    else:
        if traj.reference is None:
            raise ConfigError("tstar needs an archive with a reference trajectory")
        q = math.inf if args.q in ("inf", "infinity") else float(args.q)
        res = R.t_star(traj, traj.reference, xi, args.mu, (args.r, q), c)
    rows = zip(res.times, res.dissipation, res.reference)
    write_csv(Path(args.out) / "tstar.csv", ["t", "B_mu", "reference"], rows, h,
              {"t_star": res.t_star, "bracket_ok": res.bracket_ok, "mode": res.mode})
    print(f"t* = {res.t_star:g} (bracket {'ok' if res.bracket_ok else 'FAILED'})")
    return EXIT_OK


def cmd_decompose(args) -> int:
    center = _vec(args.center, "center")
    out = Path(args.out)
    if args.field:
        items = [(0, read_field(args.field))]
        h = _hash_of({"cmd": "decompose", "field": Path(args.field).read_bytes().hex()[:64],
                      "p": args.p, "s": args.s, "center": center})
        p = args.p
    else:
        cfg = _config_from_args(args)
        h = cfg.digest()
        prm = cfg.params
        p = args.p if args.p is not None else float(prm.get("p", 2.5))
        g = cfg.grid_spec()
        items = [(s, compact_bump_field(g, s, int(prm.get("n_bumps", 3)), float(prm.get("amplitude", 3.0))))
                 for s in cfg.seeds]
    rows = []
    for seed, u0 in items:
        if args.s is not None:
            res = threshold_split(u0, args.s, center)
        else:
            if p is None:
                raise ConfigError("decompose needs --p or --s")
            res = gap_split(u0, p, center)
        r = res.ratios
        rows.append([seed, res.s, res.norms["w0_L3"], res.norms["v0_weighted_L2"],
                     r.get("rho1", ""), r.get("rho2", ""), r.get("elementary1", ""), r.get("elementary2", "")])
    write_csv(out / "decompose.csv", ["seed", "s", "w0_L3", "v0_weighted_L2", "rho1", "rho2",
                                      "elementary1", "elementary2"], rows, h)
    print(f"decomposed {len(rows)} field(s) into {out / 'decompose.csv'}")
    return EXIT_OK


def cmd_kato(args) -> int:
    w0 = read_field(args.field)
    traj = read_archive(args.traj) if args.traj else None
    eps1 = args.eps1 if args.eps1 is not None else Nm.Constants().eps1
    res = kato_check(w0, eps1, traj)
    h = _hash_of({"cmd": "kato-check", "field": Path(args.field).read_bytes().hex()[:64], "eps1": eps1})
    write_csv(Path(args.out) / "kato.csv", ["pass", "w0_L3", "eps1", "l5_ratio"],
              [[res.passed, res.norm_L3, eps1, res.l5_ratio if res.l5_ratio is not None else ""]], h)
    sys.stdout.write(res.report())
    return EXIT_OK


def cmd_verify_ckn(args) -> int:
    cfg = _config_from_args(args)
    prm = cfg.params
    g = cfg.grid_spec()
    mus = [float(m) for m in prm.get("mus", [1e-4, 1e-2, 1.0])]
    sets = [(f"q={q:g}", CKNParams.interpolation_family(q)) for q in prm.get("q", [3.5, 6, 12])]
    if prm.get("cubic", True):
        sets.append(("cubic", CKNParams.cubic()))
    fl = ensemble(g, cfg.seeds)
    rows = []
    for name, p in sets:
        t = verify_ckn_inequality(p, fl, mus, name)
        rows += t.rows
        print(f"{name}: max ratio {t.max_ratio:.4f}, mu-variation {t.mu_variation:.3f}")
    write_csv(Path(cfg.output) / "ckn.csv", ["param_set", "mu", "seed", "ratio"], rows, cfg.digest())
    return EXIT_OK


def cmd_verify_stein(args) -> int:
    cfg = _config_from_args(args)
    prm = cfg.params
    g = cfg.grid_spec()
    mus = [float(m) for m in prm.get("mus", [1e-4, 1e-2, 1.0])]
    p, a = float(prm.get("p", 2.0)), float(prm.get("a", -0.5))
    fl = [(s, random_scalar_field(g, s)) for s in cfg.seeds]
    rows = []
    for (i, j), t in verify_stein_inequality(p, a, fl, mus).items():
        rows += t.rows
        print(f"R{i + 1}R{j + 1}: max ratio {t.max_ratio:.4f}, mu-variation {t.mu_variation:.3f}")
    write_csv(Path(cfg.output) / "stein.csv", ["pair", "mu", "seed", "ratio"], rows, cfg.digest(),
              {"p": p, "a": a})
    return EXIT_OK


def cmd_norms(args) -> int:
    u = read_field(args.field)
    c = _vec(args.center, "center") if args.center else (0.0,) * u.grid.dims
    w = Nm.WeightSpec(c, args.mu, None, -0.5)
    rows = [
        ["L2", Nm.lp_norm(u, 2)], ["L3", Nm.lp_norm(u, 3)], ["Linf", Nm.lp_norm(u, math.inf)],
        ["H1", Nm.sobolev_norm(u, 1)], ["H2", Nm.sobolev_norm(u, 2)],
        ["weighted_L2_sigma_half", Nm.weighted_lp_norm(u, 2, w)],
        ["divergence_residual", spectral_divergence_residual(u)],
    ]
    h = _hash_of({"cmd": "norms", "field": Path(args.field).read_bytes().hex()[:64], "mu": args.mu,
                  "center": c})
    write_csv(Path(args.out) / "norms.csv", ["norm", "value"], rows, h)
    for name, v in rows:
        print(f"{name:>24s} {v:.12e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"one of {sorted(PRESETS)} or a result tag")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--n", type=int, help="points per axis")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--seeds", help="comma-separated seeds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nslab", description="Periodic Navier-Stokes regularity lab")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write an initial field as NSRF")
    p.add_argument("--family", required=True,
                   choices=["abc", "bump", "axisym", "taylor-green", "taylor-green-3d", "random"])
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--L", type=float, default=math.pi)
    for k in ("A", "B", "C"):
        p.add_argument(f"--{k}", type=float, default=1.0)
    p.add_argument("--m", type=int, default=1, help="Beltrami wavenumber")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="field.nsrf")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="run the solver")
    _add_run_options(p)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--initial", help="NSRF initial field (perturbation in perturbed modes)")
    p.add_argument("--reference", help="NSRF reference field w0")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("perturb", help="scale a bump below a smallness threshold")
    p.add_argument("--base", required=True, help="NSRF reference field w0")
    p.add_argument("--kind", default="prop2.4", choices=["thm1.7", "prop2.1", "prop2.3", "prop2.4"])
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--shift", type=float, default=0.5)
    p.add_argument("--delta", type=float, help="override every delta constant")
    p.add_argument("--t-end", dest="t_end", type=float, default=0.5)
    p.add_argument("--out", default="perturbation.nsrf")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("regular-map", help="CKN scores on a lattice and fitted aperture")
    p.add_argument("--traj", required=True)
    p.add_argument("--center", default="0,0,0")
    p.add_argument("--radii", default="3,2.5,2", help="radii in grid cells, decreasing")
    p.add_argument("--times", type=int, default=4)
    p.add_argument("--eps-star", dest="eps_star", type=float)
    p.add_argument("--out", default="nslab_out")
    p.set_defaults(func=cmd_regular_map)

    p = sub.add_parser("segment", help="weighted dissipation along a moving center")
    p.add_argument("--traj", required=True)
    p.add_argument("--xi", default="1,0,0")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--mus", default="1,0.1,0.01,0.001")
    p.add_argument("--center", default="0,0,0")
    p.add_argument("--out", default="nslab_out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("tstar", help="changeover time")
    p.add_argument("--traj", required=True)
    p.add_argument("--xi", default="0,0,0")
    p.add_argument("--mu", type=float, default=1e-2)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--q", default="inf")
    p.add_argument("--gamma-M", dest="gamma_M", type=float, help="use the window-integral variant")
    p.add_argument("--T", type=float)
    p.add_argument("--center", default="0,0,0")
    p.add_argument("--out", default="nslab_out")
    p.set_defaults(func=cmd_tstar)

    p = sub.add_parser("decompose", help="threshold split of initial data")
    _add_run_options(p)
    p.add_argument("--field", help="NSRF field (default: seeded compact-bump ensemble)")
    p.add_argument("--p", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--center", default="0,0,0")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("kato-check", help="small-L^3 gate")
    p.add_argument("--field", required=True)
    p.add_argument("--traj")
    p.add_argument("--eps1", type=float)
    p.add_argument("--out", default="nslab_out")
    p.set_defaults(func=cmd_kato)

    p = sub.add_parser("verify-ckn", help="weighted interpolation ratio harness")
    _add_run_options(p)
    p.set_defaults(func=cmd_verify_ckn)

    p = sub.add_parser("verify-stein", help="weighted Riesz ratio harness")
    _add_run_options(p)
    p.set_defaults(func=cmd_verify_stein)

    p = sub.add_parser("norms", help="norm table of an NSRF field")
    p.add_argument("--field", required=True)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--center")
    p.add_argument("--out", default="nslab_out")
    p.set_defaults(func=cmd_norms)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command in ("verify-ckn", "verify-stein", "decompose") and not (args.preset or args.config) \
            and not getattr(args, "field", None):
        args.preset = {"verify-ckn": "appendix-ckn", "verify-stein": "appendix-stein",
                       "decompose": "gap-split"}[args.command]
    try:
        return args.func(args)
    except S.NumericalError as e:
        print(f"nslab: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as e:
        print(f"nslab: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
