"""Experiment configuration: JSON in, fully resolved dataclass out.

Missing sections are filled with the reference settings for each experiment. Randomly
generated pieces (covariance variances, mixture means) are drawn from the master seed
and written back as explicit numbers, so the resolved config alone reproduces a run.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError

EXPERIMENTS = (
    "fig1_gaussian",
    "fig1_mixture",
    "fig2_y_sweep",
    "fig2_rho_sweep",
    "kl_vs_T",
    "schedule_check",
    "bias_report",
)

SWEEP_PARAMS = {
    "fig1_gaussian": ("sigma_y2",),
    "fig1_mixture": ("sigma_y2",),
    "fig2_y_sweep": ("y_scale",),
    "fig2_rho_sweep": ("rho",),
    "kl_vs_T": ("T",),
    "schedule_check": ("p",),
    "bias_report": (),
}

# The figure-1 experiments do not pin T; 2000 keeps them at desk scale.
FIG1_T = 2000
FIG2_T = 20000


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    target: dict | None = None
    model: dict | None = None
    schedule: dict | None = None
    samplers: list = field(default_factory=list)
    sweep: dict | None = None
    method: str | None = None  # "exact", "knn" or "mc"
    n: int | None = None  # sample budget for knn / mc
    knn: dict = field(default_factory=lambda: {"k": 5, "n_boot": 20})
    w_bias_stride: int | str | None = None
    out: str = "results"
    svg: bool = True

    def canonical(self) -> dict:
        """Resolved config without run-location fields, used for hashing and footers."""
        d = asdict(self)
        d.pop("out")
        d.pop("svg")
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def _seed_rng(seed, tag):
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def _gaussian_defaults(seed, rho=None):
    rng = _seed_rng(seed, 101)
    variances = rng.uniform(0.5, 1.5, 4)
    rho = float(rng.uniform(0.4, 0.7)) if rho is None else rho
    return {"kind": "gaussian", "mu0": [0.0] * 4, "variances": variances.tolist(), "p": 2, "rho": rho}


def _mixture_defaults(seed):
    rng = _seed_rng(seed, 202)
    means = rng.uniform(-1.0, 1.0, (2, 2))
    return {
        "kind": "mixture",
        "weights": [0.4, 0.6],
        "means": means.tolist(),
        "variances": [0.1, 1.0],
        "p": 1,
        "rho": 0.6,
    }


def _defaults(experiment, seed):
    gauss_sched = {"kind": "exp_then_const", "T": FIG1_T, "c": 3.0, "delta": 1e-4}
    fig1 = ["boddnm", "ddnm", "ddnmplus"]
    if experiment == "fig1_gaussian":
        return {
            "target": _gaussian_defaults(seed),
            "model": {"identity_prefix": 2, "d": 4, "sigma_y2": 0.5, "y": [0.5, 0.5]},
            "schedule": gauss_sched,
            "samplers": fig1,
            "sweep": {"param": "sigma_y2", "values": [0.05, 0.1, 0.25, 0.5, 1.0]},
            "method": "exact",
        }
    if experiment == "fig1_mixture":
        return {
            "target": _mixture_defaults(seed),
            "model": {"identity_prefix": 1, "d": 2, "sigma_y2": 0.5, "y": [1.0]},
            "schedule": {"kind": "exp_then_const", "T": FIG1_T, "c": 4.0, "delta": 0.02},
            "samplers": fig1,
            "sweep": {"param": "sigma_y2", "values": [0.2, 0.5, 1.0]},
            "method": "knn",
            "n": 150_000,
        }
    fig2_sched = dict(gauss_sched, T=FIG2_T)
    if experiment == "fig2_y_sweep":
        return {
            "target": _gaussian_defaults(seed, rho=0.5),
            "model": {"identity_prefix": 2, "d": 4, "sigma_y2": 0.0, "y": [1.0, 1.0]},
            "schedule": fig2_sched,
            "samplers": ["boddnm"],
            "sweep": {"param": "y_scale", "values": [0.25 * i for i in range(9)]},
            "method": "exact",
            "w_bias_stride": "auto",
        }
    if experiment == "fig2_rho_sweep":
        return {
            "target": _gaussian_defaults(seed, rho=0.5),
            "model": {"identity_prefix": 2, "d": 4, "sigma_y2": 0.0, "y": [0.5, 0.5]},
            "schedule": fig2_sched,
            "samplers": ["boddnm"],
            "sweep": {"param": "rho", "values": [0.1, 0.3, 0.5, 0.7, 0.9, 0.95]},
            "method": "exact",
        }
    if experiment == "kl_vs_T":
        return {
            "target": _gaussian_defaults(seed),
            "model": {"identity_prefix": 2, "d": 4, "sigma_y2": 0.0, "y": [0.5, 0.5]},
            "schedule": gauss_sched,
            "samplers": ["boddnm"],
            "sweep": {"param": "T", "values": [500, 1000, 2000, 4000, 8000]},
            "method": "exact",
        }
    if experiment == "schedule_check":
        return {
            "schedule": {"kind": "constant", "T": 100_000, "c": 2.0},
            "sweep": {"param": "p", "values": [1.0, 2.0, 3.0]},
        }
    if experiment == "bias_report":
        return {
            "target": _gaussian_defaults(seed),
            "model": {"identity_prefix": 2, "d": 4, "sigma_y2": 0.5, "y": [0.5, 0.5]},
            "schedule": gauss_sched,
            "samplers": ["boddnm", "ddnm", "ddnmplus"],
            "method": "exact",
            "w_bias_stride": None,
        }
    raise ConfigError(f"experiment: unknown tag {experiment!r}; expected one of {EXPERIMENTS}")


def _check_sweep(experiment, sweep):
    allowed = SWEEP_PARAMS[experiment]
    if not allowed:
        if sweep:
            raise ConfigError(f"sweep: {experiment} does not take a sweep")
        return None
    if not isinstance(sweep, dict) or set(sweep) != {"param", "values"}:
        raise ConfigError("sweep: expected an object with exactly 'param' and 'values'")
    if sweep["param"] not in allowed:
        raise ConfigError(f"sweep.param: {experiment} sweeps {allowed[0]!r}, not {sweep['param']!r}")
    values = sweep["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values: need a nonempty list")
    try:
        [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError("sweep.values: entries must be numbers") from None
    return {"param": sweep["param"], "values": list(values)}


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw JSON mapping and resolve defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("config: missing key 'experiment'")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown tag {exp!r}; expected one of {EXPERIMENTS}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed: expected an integer in [0, 2^64)")
    merged = _defaults(exp, seed)
    for key, value in raw.items():
        if key in ("target", "model", "schedule") and value is not None and not isinstance(value, dict):
            raise ConfigError(f"{key}: expected an object")
        merged[key] = copy.deepcopy(value)
    merged["sweep"] = _check_sweep(exp, merged.get("sweep"))
    method = merged.get("method")
    if method not in (None, "exact", "knn", "mc"):
        raise ConfigError(f"method: expected 'exact', 'knn' or 'mc' (got {method!r})")
    knn = merged.get("knn", {"k": 5, "n_boot": 20})
    if not isinstance(knn, dict) or set(knn) - {"k", "n_boot"}:
        raise ConfigError("knn: only 'k' and 'n_boot' are allowed")
    merged["knn"] = {"k": int(knn.get("k", 5)), "n_boot": int(knn.get("n_boot", 20))}
    if merged.get("n") is not None and int(merged["n"]) < 1:
        raise ConfigError("n: must be positive")
    stride = merged.get("w_bias_stride")
    if stride not in (None, "auto") and not (isinstance(stride, int) and stride >= 1):
        raise ConfigError("w_bias_stride: expected null, 'auto' or a positive integer")
    if not isinstance(merged.get("samplers", []), list):
        raise ConfigError("samplers: expected a list")
    cfg = ExperimentConfig(**merged)
    _validate_specs(cfg)
    return cfg


def _validate_specs(cfg):
    # Build every referenced object once so errors surface before any work starts.
    import warnings

    from ..linear_model import parse_model
    from ..samplers import parse_sampler
    from ..schedules import make_schedule
    from ..targets import parse_target

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        make_schedule(cfg.schedule)
    if cfg.experiment == "schedule_check":
        return
    target = parse_target(cfg.target)
    model = parse_model(cfg.model, d=target.d)
    for s in cfg.samplers:
        parse_sampler(s)
    if not cfg.samplers:
        raise ConfigError("samplers: need at least one sampler")
    if model.d != target.d:
        raise ConfigError(f"model dimension {model.d} does not match target dimension {target.d}")


def read_footer_config(path) -> dict:
    """Recover the resolved config JSON embedded in a result CSV footer."""
    for line in Path(path).read_text().splitlines():
        if line.startswith("# config: "):
            return json.loads(line[len("# config: "):])
    raise ConfigError(f"{path}: no config footer found")


def load_raw(path) -> dict:
    """Raw config mapping from a JSON file or from a result CSV footer."""
    path = Path(path)
    try:
        if path.suffix == ".csv":
            raw = read_footer_config(path)
        else:
            raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return raw


def load_config(path, seed=None) -> ExperimentConfig:
    """Load a JSON config, or the footer config of a previously written result CSV.

    ``seed`` replaces the stored seed before defaults are resolved.
    """
    raw = load_raw(path)
    if seed is not None:
        raw["seed"] = seed
    return from_dict(raw)
