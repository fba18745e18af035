"""Command-line front end.

Every subcommand takes a JSON config file (``--config``) and/or flags; flags
win.  Reports are JSON on stdout and echo the effective config, so feeding the
``config`` object of a report back through ``--config`` repeats the run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .analytics import (
    LimitShape,
    SeriesDivergence,
    expected_F,
    expected_monomers,
    grand_potential_log,
    limit_shape,
    mean_shape,
    mu_for_target_mass,
    scaled_mass,
    variance_F,
)
from .energy import classify_regime, ground_state, model_from_config

SEED_ENV = "GIBBS_PARTITIONS_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    energy: dict = field(default_factory=lambda: {"kind": "const", "c": 1.0})
    beta: float = 1.0
    mu: Optional[float] = None
    mu_sequence: Optional[list] = None
    target_mass: Optional[float] = None
    ensemble: str = "quantum"
    mass: Optional[int] = None
    samples: int = 1000
    seed: int = 0
    tol: float = 1e-9
    grid: Optional[str] = None
    x: Optional[list] = None
    y: float = 0.1
    epsilon: float = 0.1
    intervals: Optional[list] = None
    masses: Optional[list] = None
    threads: int = 0
    out: Optional[str] = None
    figure: Optional[str] = None

    def model(self):
        try:
            return model_from_config({"energy": self.energy, "beta": self.beta})
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e

    def mu_mode(self) -> str:
        given = [n for n in ("mu", "mu_sequence", "target_mass") if getattr(self, n) is not None]
        if len(given) != 1:
            raise ConfigError(f"exactly one of mu, mu_sequence, target_mass is required (got {given or 'none'})")
        return given[0]

    def mus(self) -> list[float]:
        mode = self.mu_mode()
        if mode == "mu":
            return [float(self.mu)]
        if mode == "mu_sequence":
            return [float(m) for m in self.mu_sequence]
        return [mu_for_target_mass(self.model(), float(self.target_mass))]

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


_FLOAT_FMT = "{:.17g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_FLOAT_FMT.format(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _write(path: Optional[str], text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _figure_path(cfg: RunConfig, suffix: str) -> Optional[str]:
    if cfg.figure:
        return cfg.figure
    return None


def parse_grid(spec: Optional[str], default=(0.05, 10.0, 200)) -> np.ndarray:
    """``geom:a:b:n``, ``lin:a:b:n`` or a comma list of x values."""
    if not spec:
        a, b, n = default
        return np.geomspace(a, b, n)
    try:
        if spec.startswith(("geom:", "lin:")):
            kind, a, b, n = spec.split(":")
            a, b, n = float(a), float(b), int(n)
            return np.geomspace(a, b, n) if kind == "geom" else np.linspace(a, b, n)
        return np.array([float(v) for v in spec.split(",")])
    except ValueError as e:
        raise ConfigError(f"grid: cannot parse {spec!r} ({e})") from e


def _report(cfg: RunConfig, body: dict, verdicts: Optional[dict] = None) -> dict:
    rep = {"tool": "gibbs-partitions", "version": __version__, "seed": cfg.seed, "config": cfg.echo()}
    rep.update(body)
    if verdicts is not None:
        rep["verdicts"] = verdicts
    return rep


# -- subcommands --------------------------------------------------------------------


def cmd_classify(cfg: RunConfig):
    model = cfg.model()
    tag = classify_regime(model)
    gs = ground_state(model)
    body = tag.to_dict()
    body.update({"eps_star": gs.eps_star, "mu_star": gs.mu_star,
                 "ground_state_attained_at": gs.to_dict()["attained_at"]})
    return _report(cfg, body), True


def cmd_shape(cfg: RunConfig):
    model = cfg.model()
    grid = parse_grid(cfg.grid)
    shape = limit_shape(model)
    body: dict = {"regime": classify_regime(model).regime}
    if isinstance(shape, LimitShape):
        F = shape.F(grid)
        body["limit_shape"] = "available"
        body["lambda"] = shape.lam
        header, cols = ["x", "F_analytic"], [grid, F]
    else:
        body["limit_shape"] = "none"
        body["outcome"] = type(shape).__name__
        body["reason"] = shape.reason
        try:
            Fm, lam = mean_shape(model)
            F = Fm(grid)
            body["mean_curve"] = "limit of E F_mu (not a limit shape)"
            header, cols = ["x", "F_mean_limit"], [grid, F]
        except ValueError:
            F = None
            header, cols = None, None
    if cfg.mu is not None and header is not None:
        ef = np.array([expected_F(model, cfg.mu, x, cfg.tol).value for x in grid])
        header.append("E_F_mu")
        cols.append(ef)
    if header is not None:
        rows = [tuple(float(c[i]) for c in cols) for i in range(len(grid))]
        body["points"] = len(rows)
        if cfg.out:
            _write(cfg.out, _csv_text(header, rows))
            body["csv"] = cfg.out
        else:
            body["curve"] = [dict(zip(header, r)) for r in rows]
        if cfg.figure:
            from .plotting import plot_shape

            plot_shape(cfg.figure, grid, F, expected=cols[2] if len(cols) > 2 else None,
                       title=f"regime {body['regime']}, beta={model.beta:g}")
            body["figure"] = cfg.figure
    return _report(cfg, body), True


def cmd_expect(cfg: RunConfig):
    model = cfg.model()
    shape = limit_shape(model)
    lam = shape.lam if isinstance(shape, LimitShape) else None
    rows = []
    for mu in cfg.mus():
        em = expected_monomers(model, mu, cfg.tol)
        row = {
            "mu": mu,
            "E_Mon": em.to_dict(),
            "log_Xi": grand_potential_log(model, mu, cfg.tol).to_dict(),
            "mu2_E_Mon": mu * mu * em.value,
            "scaled_E_Mon": scaled_mass(model, mu, cfg.tol),
        }
        if lam is not None:
            row["lambda"] = lam
            row["scaled_E_Mon_over_lambda"] = row["scaled_E_Mon"] / lam
        if cfg.x:
            row["points"] = [{"x": x, "E_F": expected_F(model, mu, x, cfg.tol).to_dict(),
                              "Var_F": variance_F(model, mu, x, cfg.tol).to_dict()} for x in cfg.x]
        rows.append(row)
    return _report(cfg, {"regime": classify_regime(model).regime, "rows": rows}), True


def cmd_sample(cfg: RunConfig):
    from .sampler import SamplerConfig, config_header, sample_canonical, sample_classical_gc, sample_quantum_gc

    model = cfg.model()
    mu = cfg.mus()[0] if cfg.ensemble != "canonical" or cfg.mass is None else (cfg.mu or 1.0)
    scfg = SamplerConfig(model, mu, ensemble=cfg.ensemble, mass=cfg.mass, truncation_tol=cfg.tol,
                         seed=cfg.seed, replicas=cfg.samples, threads=cfg.threads)
    extra = {}
    if cfg.ensemble == "quantum":
        s = sample_quantum_gc(scfg)
    elif cfg.ensemble == "classical":
        s = sample_classical_gc(scfg)
    else:
        res = sample_canonical(scfg)
        s = res.sample
        extra = {"method": res.method, "attempts": res.attempts, "acceptance_rate": res.acceptance_rate}
    header = {"config": cfg.echo(), "sampler": config_header(scfg), "seed": cfg.seed, **extra}
    text = s.dumps(header)
    masses = s.masses()
    body = {"ensemble": cfg.ensemble, "mu": mu, "replicas": s.replicas,
            "mean_mass": float(masses.mean()), **extra}
    if cfg.out:
        _write(cfg.out, text)
        body["ndjson"] = cfg.out
        return _report(cfg, body), True
    return text, True


def cmd_converge(cfg: RunConfig):
    from .lab import convergence_study

    model = cfg.model()
    mus = cfg.mus()
    shape = limit_shape(model)
    if isinstance(shape, LimitShape):
        F, target = shape.F, "limit_shape"
    else:
        try:
            F, _ = mean_shape(model)
        except ValueError as e:
            raise ConfigError(f"no reference curve for this model: {e}") from e
        target = "mean_limit"
    results = convergence_study(model, mus, cfg.samples, F, cfg.y, cfg.epsilon, seed=cfg.seed,
                                threads=cfg.threads, tol=cfg.tol)
    reports = [r.to_dict() for _, r in results]
    probs = [r["empirical_exceed_prob"] for r in reports]
    verdicts = {"kolmogorov_bound": all(r["verdict"] == "pass" for r in reports)}
    if target == "limit_shape":
        verdicts["exceed_prob_decreasing"] = all(b < a for a, b in zip(probs, probs[1:]))
    body = {"reference": target, "reports": reports,
            "variance_at_y": [variance_F(model, mu, cfg.y).value for mu in mus]}
    if cfg.out:
        rows = []
        for sh, _ in results:
            Fa = F(sh.grid)
            rows.extend((sh.mu, float(x), float(m), float(v), float(a))
                        for x, m, v, a in zip(sh.grid, sh.mean_F, sh.var_F, Fa))
        _write(cfg.out, _csv_text(["mu", "x", "mean_F", "var_F", "F_analytic"], rows))
        body["csv"] = cfg.out
    if cfg.figure:
        from .plotting import plot_convergence

        plot_convergence(cfg.figure, [sh for sh, _ in results], F)
        body["figure"] = cfg.figure
    return _report(cfg, body, verdicts), all(verdicts.values())


def cmd_condense(cfg: RunConfig, ks_max: float = 0.02, band: float = 0.05):
    from .lab import condensation_report

    model = cfg.model()
    rep = condensation_report(model, cfg.mus(), cfg.samples, seed=cfg.seed, threads=cfg.threads, tol=cfg.tol)
    last = rep["rows"][-1]
    verdicts = {
        "ks_distance": all(s["ks_distance_vs_exp"] < ks_max for s in last["states"]),
        "mean_occupation": all(abs(s["mu_times_mean_k_pk"] - 1.0) <= band for s in last["states"]),
    }
    return _report(cfg, rep, verdicts), all(verdicts.values())


def _parse_intervals(raw) -> list[tuple[float, float]]:
    if raw is None:
        return [(0.5, 1.0), (1.0, 2.0)]
    out = []
    for item in raw:
        if isinstance(item, str):
            a, b = item.split(":")
        else:
            a, b = item
        out.append((float(a), float(b)))
    return out


def cmd_critical(cfg: RunConfig):
    from .lab import critical_model, critical_process_report

    intervals = _parse_intervals(cfg.intervals)
    rep = critical_process_report(cfg.mus(), cfg.samples, intervals, seed=cfg.seed, beta=cfg.beta,
                                  threads=cfg.threads, tol=min(cfg.tol, 1e-6))
    rep["model"] = critical_model(cfg.beta).to_config()
    if cfg.figure:
        from .plotting import plot_counts
        from .sampler import SamplerConfig, sample_quantum_gc
        from .analytics import first_index, critical_rate

        mu = cfg.mus()[-1]
        x, y = intervals[-1]
        s = sample_quantum_gc(SamplerConfig(critical_model(cfg.beta), mu, replicas=cfg.samples,
                                            seed=cfg.seed + len(cfg.mus()) - 1, truncation_tol=1e-6))
        plot_counts(cfg.figure, s.window_counts(first_index(x, mu), first_index(y, mu)),
                    critical_rate(x, y), title=f"counts on [{x:g}, {y:g}), mu={mu:g}")
        rep["figure"] = cfg.figure
    verdicts = {"poisson_process": rep["verdict"] == "pass"}
    return _report(cfg, rep, verdicts), verdicts["poisson_process"]


def cmd_bell(cfg: RunConfig):
    from .lab import bell_step_report

    masses = [float(m) for m in (cfg.masses or [1e3, 1e4, 1e5])]
    rep = bell_step_report(masses, cfg.samples, seed=cfg.seed, threads=cfg.threads, tol=cfg.tol)
    if cfg.out:
        rows = [(r["M"], r["nu"], p["x"], p["mean"], p["se"], p["exact"], p["step"])
                for r in rep["rows"] for p in r["points"]]
        _write(cfg.out, _csv_text(["M", "nu", "x", "mean", "se", "exact", "step"], rows))
        rep["csv"] = cfg.out
    if cfg.figure:
        from .plotting import plot_bell

        plot_bell(cfg.figure, rep["rows"])
        rep["figure"] = cfg.figure
    return _report(cfg, rep, rep["verdicts"]), rep["verdict"] == "pass"


COMMANDS = {
    "classify": cmd_classify,
    "shape": cmd_shape,
    "expect": cmd_expect,
    "sample": cmd_sample,
    "converge": cmd_converge,
    "condense": cmd_condense,
    "critical": cmd_critical,
    "bell": cmd_bell,
}


# -- argument handling ---------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--config", help="JSON config file (flags override its fields)")
    g.add_argument("--energy", choices=["decay", "const", "loglog", "log", "power", "table"])
    g.add_argument("--alpha", type=float, help="decay/power exponent")
    g.add_argument("--c", type=float, help="constant energy / power prefactor")
    g.add_argument("--slope", type=float, help="log-kind slope a in E_k = a ln k")
    g.add_argument("--table", type=_floats, help="explicit E_1,...,E_K (kind=table)")
    g.add_argument("--tail", help='tail fragment for kind=table, JSON, e.g. \'{"kind":"power","c":1,"alpha":1}\'')
    g.add_argument("--e1", type=float, dest="e1_override", help="override E_1")
    g.add_argument("--exclude", type=lambda s: [int(v) for v in s.split(",")], help="remove states k")
    g.add_argument("--beta", type=float)
    r = common.add_argument_group("run")
    r.add_argument("--mu", type=float)
    r.add_argument("--mu-seq", type=_floats, dest="mu_sequence")
    r.add_argument("--target-mass", type=float, dest="target_mass")
    r.add_argument("--ensemble", choices=["quantum", "classical", "canonical"])
    r.add_argument("--mass", type=int, help="canonical ensemble mass M")
    r.add_argument("--samples", type=int)
    r.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)")
    r.add_argument("--tol", type=float)
    r.add_argument("--grid", help="geom:a:b:n | lin:a:b:n | comma list")
    r.add_argument("--x", type=_floats, help="points for E F / Var F (expect)")
    r.add_argument("--y", type=float, help="lower end of the sup window (converge)")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--intervals", type=lambda s: s.split(","), help="critical windows, e.g. 0.5:1,1:2")
    r.add_argument("--masses", type=_floats, help="Bell target masses")
    r.add_argument("--threads", type=int, help="worker threads (0 = all cores)")
    r.add_argument("--out", help="output file for CSV / NDJSON")
    r.add_argument("--figure", help="write a PNG figure to this path")

    p = argparse.ArgumentParser(prog="gibbs-partitions", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


_ENERGY_FLAGS = ("alpha", "c", "slope", "table", "e1_override")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{ns.config}: line {e.lineno}, column {e.colno}: {e.msg}") from e
        except OSError as e:
            raise ConfigError(str(e)) from e
        if "config" in data and "energy" not in data:
            data = data["config"]  # a previous report
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
    energy = dict(data.get("energy", {"kind": "const", "c": 1.0}))
    if ns.energy and ns.energy != energy.get("kind"):
        energy = {"kind": ns.energy}
    for key in _ENERGY_FLAGS:
        v = getattr(ns, key)
        if v is not None:
            energy[key] = v
    if ns.tail:
        try:
            energy["tail"] = json.loads(ns.tail)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--tail: {e}") from e
    if ns.exclude:
        energy["exclude"] = ns.exclude
    data["energy"] = energy
    for key in ("beta", "mu", "mu_sequence", "target_mass", "ensemble", "mass", "samples", "seed", "tol",
                "grid", "x", "y", "epsilon", "intervals", "masses", "threads", "out", "figure"):
        v = getattr(ns, key)
        if v is not None:
            data[key] = v
    # a flag choosing the mu mode replaces the config file's choice
    for key in ("mu", "mu_sequence", "target_mass"):
        if getattr(ns, key) is not None:
            for other in ("mu", "mu_sequence", "target_mass"):
                if other != key and getattr(ns, other) is None:
                    data.pop(other, None)
    if "seed" not in data:
        env = os.environ.get(SEED_ENV)
        try:
            data["seed"] = int(env) if env else 0
        except ValueError as e:
            raise ConfigError(f"${SEED_ENV}: not an integer: {env!r}") from e
    try:
        return RunConfig(**data)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        out, ok = COMMANDS[ns.command](cfg)
    except ConfigError as e:
        return _fail("ConfigError", str(e), 2)
    except SeriesDivergence as e:
        return _fail("SeriesDivergence", str(e), 3)
    except (ValueError, RuntimeError) as e:
        return _fail(type(e).__name__, str(e), 3)
    if isinstance(out, str):
        sys.stdout.write(out)
    else:
        sys.stdout.write(json.dumps(out, indent=2, default=_json_default) + "\n")
    return 0 if ok else 1


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(type(o).__name__)


if __name__ == "__main__":
    raise SystemExit(main())
