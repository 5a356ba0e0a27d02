import configparser
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from ssfuse.blocks import FfPaths, FusionBlockWeights, from_named_parameters, init_weights
from ssfuse.layout import ScanOrder
from utils.exceptions import ConfigError, DimensionError, FormatError, ParameterError
from utils.fileio import read_manifest

PAIRINGS = ("vt", "vv", "tt")


def _parse_bool(value):
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class RunConfig:
    d: int = 2
    d_state: int = 1
    H: int = 8
    W: int = 8
    scan_order: ScanOrder = ScanOrder.ROWS
    exchange_c: bool = True
    ff_paths: FfPaths = FfPaths.BIDIRECTIONAL
    residual: bool = False
    use_cp: bool = True
    use_sp: bool = True
    use_ff: bool = True
    delta_bias: bool = False
    seed: int = 0
    eps: float = 1e-4
    tol: float = 1e-9
    trials: int = 8
    center_row: Optional[int] = None
    center_col: Optional[int] = None
    erf_block: str = "ms2fusion"
    input_pairing: str = "vt"
    f_v: str = "f_v.sst"
    f_t: str = "f_t.sst"
    out: str = "fused.sst"
    weights: Optional[str] = None
    ledger: str = "ssfuse.db"
    log_file: str = "ssfuse.log"

    def __post_init__(self):
        for name in ("d", "d_state", "H", "W", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.tol < 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.input_pairing not in PAIRINGS:
            raise ConfigError(
                f"input_pairing must be one of {', '.join(PAIRINGS)}, got {self.input_pairing!r}"
            )
        row, col = self.center
        if not (0 <= row < self.H and 0 <= col < self.W):
            raise ConfigError(f"center ({row}, {col}) is outside a {self.H}x{self.W} map")

    @property
    def center(self):
        row = self.H // 2 if self.center_row is None else self.center_row
        col = self.W // 2 if self.center_col is None else self.center_col
        return row, col

    @property
    def block_switches(self) -> dict:
        return {
            "exchange_c": self.exchange_c,
            "scan_order": self.scan_order,
            "ff_paths": self.ff_paths,
            "residual": self.residual,
            "use_cp": self.use_cp,
            "use_sp": self.use_sp,
            "use_ff": self.use_ff,
        }

    def override(self, **values) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        return replace(self, **values) if values else self

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls) if f.init}
        values = {}
        for key, value in raw.items():
            key = key.strip()
            if key not in known:
                raise ConfigError(f"Unknown config key {key!r}")
            try:
                values[key] = cls._coerce(key, value)
            except ValueError as exc:
                raise ConfigError(f"Bad value for {key}: {exc}") from None
        return cls(**values)

    @staticmethod
    def _coerce(key, value):
        if key == "scan_order":
            return value if isinstance(value, ScanOrder) else ScanOrder.parse(str(value))
        if key == "ff_paths":
            return value if isinstance(value, FfPaths) else FfPaths(str(value).strip().lower())
        if key in ("exchange_c", "residual", "use_cp", "use_sp", "use_ff", "delta_bias"):
            return _parse_bool(value)
        if key in ("d", "d_state", "H", "W", "seed", "trials"):
            return int(value)
        if key in ("center_row", "center_col"):
            return None if value in (None, "") else int(value)
        if key in ("eps", "tol"):
            return float(value)
        if key == "weights":
            return str(value).strip() or None
        return str(value).strip()

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            try:
                return cls.from_mapping(json.loads(text))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        parser = configparser.ConfigParser(
            delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=None,
            interpolation=None,
        )
        parser.optionxform = str
        try:
            parser.read_string("[run]\n" + text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_mapping(dict(parser["run"]))

    def build_weights(self) -> FusionBlockWeights:
        """Seeded block weights, or the manifest at ``weights`` when one is configured."""
        if self.weights is None:
            return init_weights(
                self.d, self.d_state, self.seed, delta_bias=self.delta_bias, **self.block_switches
            )
        params = read_manifest(self.weights)
        try:
            weights = from_named_parameters(params, **self.block_switches)
        except KeyError as exc:
            raise FormatError(f"{self.weights}: manifest is missing parameter {exc}") from None
        except (ParameterError, DimensionError) as exc:
            raise FormatError(f"{self.weights}: {exc}") from None
        if (weights.d, weights.d_state) != (self.d, self.d_state):
            raise DimensionError(
                f"weights have d={weights.d}, d_state={weights.d_state}; "
                f"config says d={self.d}, d_state={self.d_state}"
            )
        return weights
