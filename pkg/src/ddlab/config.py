"""Sweep configuration: validation and JSON (de)serialization.

The on-disk schema is a flat JSON object:

    {"n": int, "d": int, "sigma_noise": num,
     "spectrum": {"kind": str, "params": [num], "path"?: str},
     "signal": {"kind": str, "seed": int, "path"?: str},
     "m_grid": [int], "lambda_grid": [num], "replications": int,
     "sampler": "gaussian"|"rademacher", "master_seed": int, "mode": str}

Schema violations raise ConfigError naming the offending field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


def default_m_grid(n: int) -> list[int]:
    """Projection-count grid: dense through both regimes, out to m = 4n.

    Step n/20 up to 2n (so the interpolation point m = n is on the grid),
    then four times coarser out to 4n.
    """
    step = max(1, n // 20)
    grid = list(range(step, 2 * n, step))
    grid += list(range(2 * n, 4 * n + 1, 4 * step))
    return grid

SPECTRUM_KINDS = ("isotropic", "inverse_index", "power_law", "two_dirac", "file")
SIGNAL_KINDS = ("random_gaussian_normalized", "aligned_file")
SAMPLERS = ("gaussian", "rademacher")
MODES = ("theory", "empirical", "both", "probe")

DEFAULT_SIGNAL_SEED = 1234
DEFAULT_MASTER_SEED = 20_240_001


class ConfigError(ValueError):
    """A sweep configuration violates the schema."""


@dataclass
class SweepConfig:
    n: int
    d: int
    sigma_noise: float = 1.0
    spectrum_kind: str = "isotropic"
    spectrum_params: list[float] = field(default_factory=list)
    spectrum_path: str | None = None
    signal_kind: str = "random_gaussian_normalized"
    signal_seed: int = DEFAULT_SIGNAL_SEED
    signal_path: str | None = None
    m_grid: list[int] = field(default_factory=list)
    lambda_grid: list[float] = field(default_factory=list)
    replications: int = 0
    sampler: str = "rademacher"
    master_seed: int = DEFAULT_MASTER_SEED
    mode: str = "theory"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"n: must be a positive integer, got {self.n!r}")
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"d: must be a positive integer, got {self.d!r}")
        if not self.sigma_noise >= 0:
            raise ConfigError(f"sigma_noise: must be nonnegative, got {self.sigma_noise!r}")
        if self.spectrum_kind not in SPECTRUM_KINDS:
            raise ConfigError(
                f"spectrum.kind: {self.spectrum_kind!r} not one of {SPECTRUM_KINDS}"
            )
        if self.spectrum_kind == "isotropic" and not self.spectrum_params:
            # Unit-trace default.
            self.spectrum_params = [1.0 / self.d]
        if self.spectrum_kind == "file" and not self.spectrum_path:
            raise ConfigError("spectrum.path: required when spectrum.kind is 'file'")
        for i, p in enumerate(self.spectrum_params):
            if not isinstance(p, (int, float)):
                raise ConfigError(f"spectrum.params[{i}]: must be numeric, got {p!r}")
        if self.signal_kind not in SIGNAL_KINDS:
            raise ConfigError(f"signal.kind: {self.signal_kind!r} not one of {SIGNAL_KINDS}")
        if self.signal_kind == "aligned_file" and not (self.signal_path or self.spectrum_path):
            raise ConfigError("signal.path: required when signal.kind is 'aligned_file'")
        for i, m in enumerate(self.m_grid):
            if not isinstance(m, int) or m < 1:
                raise ConfigError(f"m_grid[{i}]: must be a positive integer, got {m!r}")
        for i, lam in enumerate(self.lambda_grid):
            if not isinstance(lam, (int, float)) or lam < 0:
                raise ConfigError(f"lambda_grid[{i}]: must be a nonnegative number, got {lam!r}")
        if not isinstance(self.replications, int) or self.replications < 0:
            raise ConfigError(
                f"replications: must be a nonnegative integer, got {self.replications!r}"
            )
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler: {self.sampler!r} not one of {SAMPLERS}")
        if not isinstance(self.master_seed, int):
            raise ConfigError(f"master_seed: must be an integer, got {self.master_seed!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: {self.mode!r} not one of {MODES}")
        if self.mode in ("theory", "empirical", "both"):
            if not self.m_grid and not self.lambda_grid:
                self.m_grid = default_m_grid(self.n)
            elif self.m_grid and self.lambda_grid:
                raise ConfigError(
                    f"only one of m_grid and lambda_grid may be non-empty in mode {self.mode!r}"
                )

    @property
    def grid_kind(self) -> str:
        """'m' for projection sweeps, 'lambda' for ridge sweeps."""
        return "m" if self.m_grid else "lambda"

    def to_dict(self) -> dict:
        doc = {
            "n": self.n,
            "d": self.d,
            "sigma_noise": self.sigma_noise,
            "spectrum": {"kind": self.spectrum_kind, "params": list(self.spectrum_params)},
            "signal": {"kind": self.signal_kind, "seed": self.signal_seed},
            "m_grid": list(self.m_grid),
            "lambda_grid": list(self.lambda_grid),
            "replications": self.replications,
            "sampler": self.sampler,
            "master_seed": self.master_seed,
            "mode": self.mode,
        }
        if self.spectrum_path is not None:
            doc["spectrum"]["path"] = self.spectrum_path
        if self.signal_path is not None:
            doc["signal"]["path"] = self.signal_path
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        if not isinstance(doc, dict):
            raise ConfigError(f"config root: expected an object, got {type(doc).__name__}")
        known = {
            "n", "d", "sigma_noise", "spectrum", "signal", "m_grid",
            "lambda_grid", "replications", "sampler", "master_seed", "mode",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown field(s): {sorted(unknown)}")
        for req in ("n", "d"):
            if req not in doc:
                raise ConfigError(f"{req}: required field missing")
        kwargs: dict = {"n": doc["n"], "d": doc["d"]}
        if "sigma_noise" in doc:
            kwargs["sigma_noise"] = float(doc["sigma_noise"])
        spectrum = doc.get("spectrum", {})
        if not isinstance(spectrum, dict):
            raise ConfigError("spectrum: expected an object")
        if "kind" in spectrum:
            kwargs["spectrum_kind"] = spectrum["kind"]
        if "params" in spectrum:
            if not isinstance(spectrum["params"], list):
                raise ConfigError("spectrum.params: expected a list")
            kwargs["spectrum_params"] = [float(p) for p in spectrum["params"]]
        if "path" in spectrum:
            kwargs["spectrum_path"] = spectrum["path"]
        signal = doc.get("signal", {})
        if not isinstance(signal, dict):
            raise ConfigError("signal: expected an object")
        if "kind" in signal:
            kwargs["signal_kind"] = signal["kind"]
        if "seed" in signal:
            kwargs["signal_seed"] = int(signal["seed"])
        if "path" in signal:
            kwargs["signal_path"] = signal["path"]
        for key in ("m_grid", "lambda_grid"):
            if key in doc:
                if not isinstance(doc[key], list):
                    raise ConfigError(f"{key}: expected a list")
                kwargs[key] = doc[key]
        for key in ("replications", "master_seed"):
            if key in doc:
                kwargs[key] = int(doc[key])
        for key in ("sampler", "mode"):
            if key in doc:
                kwargs[key] = doc[key]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)
