"""Command-line orchestration: configs, experiment runners and report files.

    trapsmooth run full-resolvent --m 2 --lambda 8:128:dyadic --check "slope=-0.667+-0.1"

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 failed check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalFailure, ResolutionError
from .fitting import ScalingFit, fit_exponent

EXPERIMENTS = ("spectrum", "lower-bound", "microlocal-resolvent", "full-resolvent",
               "quasimode", "smoothing", "saturation")
CSV_COLUMNS = ("experiment", "m", "param_name", "param_value", "quantity", "value", "valid_flag")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3

# default scans, chosen to finish in minutes on one core
DEFAULT_SCANS = {
    "spectrum": "2^-4:2^-9:dyadic",
    "lower-bound": "2^-4:2^-9:dyadic",
    "microlocal-resolvent": "2^-3:2^-8:dyadic",
    "full-resolvent": "8:128:dyadic",
    "quasimode": "2^-4:2^-10:dyadic",
    "saturation": "16:128:dyadic",
}
SCAN_PARAM = {
    "spectrum": "h", "lower-bound": "h", "microlocal-resolvent": "h",
    "full-resolvent": "lambda", "quasimode": "h", "saturation": "k", "smoothing": "k",
}


@dataclass
class ExperimentConfig:
    experiment: str = "lower-bound"
    m: int = 2
    h: Optional[str] = None
    lam: Optional[str] = None
    k: Optional[str] = None
    z: float = 1.0
    eps: Optional[float] = None
    alpha: float = 1.0
    beta: float = 1.0
    A: float = 10.0
    r_chi: float = 1.0
    psi_scale: Optional[float] = None
    L: Optional[float] = None
    n: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    check: Optional[str] = None
    plot: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.n is not None and (self.n < 16 or self.n % 2):
            raise ConfigError("n must be an even integer >= 16")
        if self.L is not None and not self.L > 0:
            raise ConfigError("L must be positive")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.check is not None:
            parse_check(self.check)

    @property
    def scan_name(self) -> str:
        return SCAN_PARAM[self.experiment]

    def scan(self) -> List[float]:
        raw = {"h": self.h, "lambda": self.lam, "k": self.k}[self.scan_name]
        if raw is None:
            raw = DEFAULT_SCANS.get(self.experiment, "0,1,4,16,64")
        return parse_scan(raw)

    @property
    def out_prefix(self) -> Path:
        return Path(self.out or f"trapsmooth-{self.experiment}")

    def to_dict(self) -> dict:
        return asdict(self)


# --- parsing --------------------------------------------------------------------

_NUM = re.compile(r"^\s*([+-]?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*\^\s*([+-]?\d+(?:\.\d*)?)\s*$")


def parse_number(text: str) -> float:
    """Float, also accepting powers such as ``2^-4``."""
    s = str(text).strip()
    mt = _NUM.match(s)
    try:
        v = float(mt.group(1)) ** float(mt.group(2)) if mt else float(s)
    except (ValueError, OverflowError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc
    if not np.isfinite(v):
        raise ConfigError(f"number {text!r} is not finite")
    return v


def parse_scan(text: str) -> List[float]:
    """``a:b:dyadic`` (powers of two from a to b), ``a:b:N`` (N log-spaced), ``a,b,c`` or one value."""
    s = str(text).strip()
    if not s:
        raise ConfigError("empty scan string")
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError(f"scan {text!r} must look like start:stop:dyadic or start:stop:count")
        a, b = parse_number(parts[0]), parse_number(parts[1])
        if not (a > 0 and b > 0):
            raise ConfigError(f"range scan {text!r} needs positive endpoints")
        how = parts[2].strip()
        if how == "dyadic":
            ja, jb = np.log2(a), np.log2(b)
            if abs(ja - round(ja)) > 1e-12 or abs(jb - round(jb)) > 1e-12:
                raise ConfigError(f"dyadic scan {text!r} needs powers of two as endpoints")
            ja, jb = int(round(ja)), int(round(jb))
            step = 1 if jb >= ja else -1
            return [2.0 ** j for j in range(ja, jb + step, step)]
        try:
            count = int(how)
        except ValueError as exc:
            raise ConfigError(f"scan spacing {how!r} is neither 'dyadic' nor a count") from exc
        if count < 2:
            raise ConfigError("a range scan needs at least 2 points")
        return [float(v) for v in np.geomspace(a, b, count)]
    return [parse_number(p) for p in s.split(",")]


def parse_check(text: str) -> Tuple[str, float, float]:
    """``key=target±tol`` (``+-`` also accepted) -> (key, target, tol)."""
    key, sep, rest = text.partition("=")
    parts = re.split(r"±|\+/-|\+-", rest)
    if not sep or len(parts) != 2 or not re.fullmatch(r"[A-Za-z_][\w.]*", key.strip()):
        raise ConfigError(f"check {text!r} must look like slope=-0.667±0.1")
    tol = parse_number(parts[1])
    if tol < 0:
        raise ConfigError("check tolerance must be nonnegative")
    return key.strip(), parse_number(parts[0]), tol


_KEY_ALIASES = {"lambda": "lam", "psi-scale": "psi_scale", "r-chi": "r_chi"}


def _field_types() -> Dict[str, Callable]:
    conv = {}
    for f in fields(ExperimentConfig):
        if f.name in ("m", "n", "seed"):
            conv[f.name] = lambda v: int(parse_number(v)) if float(parse_number(v)).is_integer() else _bad_int(v)
        elif f.name == "plot":
            conv[f.name] = _parse_bool
        elif f.name in ("experiment", "h", "lam", "k", "out", "check"):
            conv[f.name] = str
        else:
            conv[f.name] = parse_number
    return conv


def _bad_int(v):
    raise ConfigError(f"expected an integer, got {v!r}")


def _parse_bool(v) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def read_config_file(path) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[_KEY_ALIASES.get(key, key.replace("-", "_"))] = value
    return out


def build_config(values: Dict[str, object]) -> ExperimentConfig:
    conv = _field_types()
    kw = {}
    for key, value in values.items():
        if key not in conv:
            raise ConfigError(f"unknown configuration key {key!r}")
        if value is None:
            continue
        kw[key] = value if isinstance(value, bool) and key == "plot" else conv[key](value)
    return ExperimentConfig(**kw)


# --- experiments ------------------------------------------------------------------

Row = Tuple[str, float, str, float, bool, str]  # param_name, param_value, quantity, value, valid, module


def _grid_kw(cfg: ExperimentConfig) -> dict:
    kw = {}
    if cfg.L is not None:
        kw["L"] = cfg.L
    if cfg.n is not None:
        kw["n"] = cfg.n
    return kw


def _run_spectrum(cfg: ExperimentConfig):
    from .spectral import oscillator_ground, rotated_resonance
    rows, lam0 = [], []
    hs = cfg.scan()
    for h in hs:
        res = oscillator_ground(cfg.m, h, count=3, **_grid_kw(cfg))
        for j, ev in enumerate(res.eigenvalues):
            rows.append(("h", h, f"lambda_{j}", ev, res.residuals[j] <= 1e-8, "trapsmooth.spectral"))
        lam0.append(res.ground)
        if cfg.m >= 2:
            mu = rotated_resonance(cfg.m, h)[0]
            rows.append(("h", h, "resonance_re", mu.real, True, "trapsmooth.spectral"))
            rows.append(("h", h, "resonance_im", mu.imag, True, "trapsmooth.spectral"))
    return rows, {"lambda_0": _fit(hs, lam0)}, {}


def _run_lower_bound(cfg: ExperimentConfig):
    from .spectral import oscillator_ground
    hs = cfg.scan()
    rows, lam0 = [], []
    p = 2 * cfg.m / (cfg.m + 1)
    for h in hs:
        res = oscillator_ground(cfg.m, h, **_grid_kw(cfg))
        ok = res.residuals[0] <= 1e-8
        rows.append(("h", h, "lambda_0", res.ground, ok, "trapsmooth.spectral"))
        rows.append(("h", h, "lambda_0_scaled", res.ground / h ** p, ok, "trapsmooth.spectral"))
        lam0.append(res.ground)
    summary = {"expected_slope": p}
    if cfg.m == 1:
        summary["max_rel_error_vs_h"] = max(abs(v / h - 1) for h, v in zip(hs, lam0))
    return rows, {"lambda_0": _fit(hs, lam0)}, summary


def default_psi_scale(z: float) -> float:
    """Frequency cutoff scale: unit at the trapped energy, narrow away from it."""
    return 1.0 if abs(z - 1.0) < 1e-12 else 0.25


def _run_microlocal(cfg: ExperimentConfig):
    from .resolvent import cutoff_resolvent_norm, semiclassical_probe
    hs = cfg.scan()
    scale = default_psi_scale(cfg.z) if cfg.psi_scale is None else cfg.psi_scale
    rows, vals = [], []
    for h in hs:
        probe = semiclassical_probe(cfg.m, h, cfg.z, r_chi=cfg.r_chi, freq_scale=scale,
                                    eps=cfg.eps, **_grid_kw(cfg))
        est = cutoff_resolvent_norm(probe, seed=cfg.seed)
        rows.append(("h", h, "norm", est.value, True, "trapsmooth.resolvent"))
        rows.append(("h", h, "eps_final", est.eps_trace[-1][0], True, "trapsmooth.resolvent"))
        vals.append(est.value)
    return rows, {"norm": _fit(hs, vals)}, {"z": cfg.z, "psi_scale": scale,
                                           "expected_slope": -2 * cfg.m / (cfg.m + 1) if cfg.z == 1 else 0.0}


def _run_full_resolvent(cfg: ExperimentConfig):
    from .resolvent import full_resolvent_norm
    lams = cfg.scan()
    rows, vals, argmax = [], [], []
    kw = {"L": cfg.L} if cfg.L is not None else {}
    for lam in lams:
        est = full_resolvent_norm(lam, cfg.m, r_chi=cfg.r_chi, eps=cfg.eps, **kw)
        k = est.details["argmax_k"]
        rows.append(("lambda", lam, "norm", est.value, True, "trapsmooth.resolvent"))
        rows.append(("lambda", lam, "argmax_k", float(k), True, "trapsmooth.resolvent"))
        vals.append(est.value)
        argmax.append(k)
    trapping = [k * k > lam * lam / 2 for k, lam in zip(argmax, lams)]
    return rows, {"norm": _fit(lams, vals)}, {"expected_slope": -2 / (cfg.m + 1),
                                              "argmax_trapping_top2": bool(all(trapping[-2:]))}


def _run_quasimode(cfg: ExperimentConfig):
    from .quasimode import SpectralParamE, build_quasimode, im_phase_sup, residual, residual_parts
    if cfg.m < 2:
        raise ConfigError("quasimodes need m >= 2")
    hs = cfg.scan()
    rows, res_vals, nsq, imc = [], [], [], []
    m = cfg.m
    for h in hs:
        q = build_quasimode(SpectralParamE(cfg.alpha, cfg.beta, h, m))
        r = residual(q)
        cross = residual_parts(q)["cross_check"]
        a = q.norm ** 2 / h ** ((1 - m) / (1 + m))
        c = im_phase_sup(q) / h
        mod = "trapsmooth.quasimode"
        rows += [("h", h, "norm_sq_scaled", a, True, mod), ("h", h, "residual", r, True, mod),
                 ("h", h, "im_phase_over_h", c, True, mod), ("h", h, "cross_check", cross, cross <= 1e-6, mod)]
        res_vals.append(r)
        nsq.append(a)
        imc.append(c)
    return rows, {"residual": _fit(hs, res_vals)}, {
        "expected_slope": 2 * m / (m + 1),
        "norm_sq_scaled_ratio": max(nsq) / min(nsq),
        "im_phase_ratio": max(imc) / min(imc),
    }


def _run_smoothing(cfg: ExperimentConfig):
    from .evolution import smoothing_suite
    ks = [int(k) for k in cfg.scan()]
    kw = {"L": cfg.L} if cfg.L is not None else {}
    reports = smoothing_suite(cfg.m, ks=tuple(ks), seed=cfg.seed, **kw)
    rows = []
    for r in reports:
        rows.append(("k", float(r.k), "ratio_theta", r.ratio_theta, r.valid, "trapsmooth.evolution"))
        rows.append(("k", float(r.k), "ratio_x", r.ratio_x, r.valid, "trapsmooth.evolution"))
    return rows, {}, {"max_ratio_theta": max(r.ratio_theta for r in reports),
                      "max_ratio_x": max(r.ratio_x for r in reports),
                      "all_valid": all(r.valid for r in reports)}


def _run_saturation(cfg: ExperimentConfig):
    from .evolution import saturation_experiment
    ks = [int(k) for k in cfg.scan()]
    rows, rhos, match = [], [], []
    for k in ks:
        r = saturation_experiment(cfg.m, k, cfg.A, cfg.alpha, cfg.beta)
        mod = "trapsmooth.evolution"
        rows += [("k", float(k), "rho", r.rho, r.valid, mod),
                 ("k", float(k), "ansatz_match", r.ansatz_match, r.valid, mod),
                 ("k", float(k), "fidelity", r.fidelity, r.valid, mod)]
        rhos.append(r.rho)
        match.append(r.ansatz_match)
    return rows, {}, {"rho_min": min(rhos), "rho_ratio": max(rhos) / min(rhos),
                      "max_ansatz_mismatch": max(match)}


RUNNERS = {
    "spectrum": _run_spectrum,
    "lower-bound": _run_lower_bound,
    "microlocal-resolvent": _run_microlocal,
    "full-resolvent": _run_full_resolvent,
    "quasimode": _run_quasimode,
    "smoothing": _run_smoothing,
    "saturation": _run_saturation,
}


def _fit(params, values) -> Optional[ScalingFit]:
    if len(params) < 4:
        return None
    return fit_exponent(params, values)


# --- reports --------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def rows_to_csv(cfg: ExperimentConfig, rows: List[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for name, pv, quantity, value, valid, _ in rows:
        w.writerow([cfg.experiment, cfg.m, name, _fmt(pv), quantity, _fmt(value), int(bool(valid))])
    return buf.getvalue()


def _evaluate_check(check: str, fits: dict, summary: dict) -> dict:
    key, target, tol = parse_check(check)
    if key in ("slope", "intercept", "max_rel_residual"):
        fit = next((f for f in fits.values() if f is not None), None)
        if fit is None:
            raise ConfigError(f"check on {key!r} needs a fitted scan of at least 4 points")
        value = getattr(fit, key)
    elif key in summary and isinstance(summary[key], (int, float)):
        value = float(summary[key])
    else:
        raise ConfigError(f"check key {key!r} is not reported by this experiment")
    return {"key": key, "target": target, "tol": tol, "value": value,
            "passed": bool(abs(value - target) <= tol)}


def run(cfg: ExperimentConfig) -> dict:
    """Execute ``cfg.experiment``, write CSV/JSON (and optional SVG), return the report."""
    rows, fits, summary = RUNNERS[cfg.experiment](cfg)
    check = _evaluate_check(cfg.check, fits, summary) if cfg.check else None
    report = {
        "artifact": "trapsmooth",
        "version": __version__,
        "config": cfg.to_dict(),
        "fits": {k: (f.to_dict() if f is not None else None) for k, f in fits.items()},
        "summary": summary,
        "check": check,
        "rows": [{"param_name": r[0], "param_value": r[1], "quantity": r[2], "value": r[3],
                  "valid_flag": bool(r[4]), "module": r[5]} for r in rows],
    }
    prefix = cfg.out_prefix
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True)
    Path(f"{prefix}.csv").write_text(rows_to_csv(cfg, rows))
    Path(f"{prefix}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if cfg.plot:
        _plot(cfg, rows, fits, Path(f"{prefix}.svg"))
    return report


def _plot(cfg: ExperimentConfig, rows: List[Row], fits: dict, path: Path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "trapsmooth"
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, fit in fits.items():
        if fit is None:
            continue
        p = np.array([s[0] for s in fit.samples])
        v = np.array([s[1] for s in fit.samples])
        ax.loglog(p, v, "o", label=name)
        ax.loglog(p, fit.constant * p ** fit.slope, "-", label=f"slope {fit.slope:.3f}")
    if not any(f is not None for f in fits.values()):
        for q in sorted({r[2] for r in rows}):
            pts = [(r[1], r[3]) for r in rows if r[2] == q and r[1] > 0 and r[3] > 0]
            if pts:
                ax.loglog(*zip(*pts), "o", label=q)
    ax.set_xlabel(cfg.scan_name)
    ax.set_title(cfg.experiment)
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- entry point ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trapsmooth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"trapsmooth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run one experiment and write its report")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--config", help="flat key = value file; flags override it")
    r.add_argument("--m", dest="m")
    r.add_argument("--h", dest="h", help="scan of h, e.g. 2^-4:2^-9:dyadic")
    r.add_argument("--lambda", dest="lam", help="scan of lambda, e.g. 8:128:dyadic")
    r.add_argument("--k", dest="k", help="list or scan of Fourier modes")
    for flag in ("z", "eps", "alpha", "beta", "A", "L", "n", "seed"):
        r.add_argument(f"--{flag}", dest=flag)
    r.add_argument("--r-chi", dest="r_chi")
    r.add_argument("--psi-scale", dest="psi_scale")
    r.add_argument("--out", dest="out", help="output prefix (writes PREFIX.csv and PREFIX.json)")
    r.add_argument("--check", dest="check", help='threshold such as "slope=-0.667±0.1"')
    r.add_argument("--plot", dest="plot", action="store_const", const=True, default=None)
    return parser


def config_from_args(argv: Optional[List[str]] = None) -> ExperimentConfig:
    ns = make_parser().parse_args(argv)
    values: Dict[str, object] = read_config_file(ns.config) if ns.config else {}
    if "experiment" in values and values["experiment"] != ns.experiment:
        raise ConfigError(f"config file names experiment {values['experiment']!r}, "
                          f"command line {ns.experiment!r}")
    values["experiment"] = ns.experiment
    for key, value in vars(ns).items():
        if key in ("command", "config", "experiment") or value is None:
            continue
        values[key] = value
    return build_config(values)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
        report = run(cfg)
    except ConfigError as exc:
        print(f"trapsmooth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ResolutionError) as exc:
        print(f"trapsmooth: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # invalid parameter combinations surface as ValueError from the library
        print(f"trapsmooth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, fit in report["fits"].items():
        if fit is not None:
            print(f"{cfg.experiment}: {name} slope {fit['slope']:.4f}")
    for key, value in report["summary"].items():
        print(f"{cfg.experiment}: {key} = {value}")
    if report["check"] is not None:
        c = report["check"]
        status = "passed" if c["passed"] else "FAILED"
        print(f"check {c['key']} = {c['value']:.4f} (target {c['target']}±{c['tol']}): {status}")
        if not c["passed"]:
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
