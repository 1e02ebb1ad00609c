"""
Operator settings.

Values come from three layers: built-in defaults, an optional dotenv-style
config file of STEGO_* keys, and command-line flags. Flags win over the
file, the file wins over the defaults.
"""
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

from dotenv import dotenv_values

from src.audio.codecs import CodecId
from src.engine.session import DEFAULT_RESEND_LIMIT, SessionConfig
from src.errors import ConfigError
from src.metrics.quality import MetricDomain
from src.protocol.fields import HeaderDesign
from src.stego.embed import EmbedAlgorithm, Placement, PlacementMode

logger = logging.getLogger(__name__)

KEY_PREFIX = "STEGO_"


@dataclass(frozen=True)
class Settings:
    codec: CodecId = CodecId.ULAW
    alg: EmbedAlgorithm = EmbedAlgorithm.LSB1
    header: HeaderDesign = HeaderDesign.STATIC
    embedding: PlacementMode = PlacementMode.FIXED
    offset: int = 0
    frame: int = 160
    loss: float = 0.0
    reorder: float = 0.0
    seed: int = 0
    ack_every: int = 1
    offset_seed: Optional[int] = None
    resend_limit: int = DEFAULT_RESEND_LIMIT
    scenario: Optional[int] = None
    domain: MetricDomain = MetricDomain.CODE
    pace_ms: int = 20
    input: Optional[Path] = None
    payload: Optional[Path] = None
    peer: Optional[str] = None
    listen: Optional[str] = None
    report: Optional[Path] = None
    plot: Optional[Path] = None
    transcript: Optional[Path] = None
    pesq_tool: Optional[str] = None

    def session_config(self, **overrides: Any) -> SessionConfig:
        if self.offset < 0:
            raise ConfigError("offset must be >= 0")
        values = dict(
            header_design=self.header,
            codec=self.codec,
            alg=self.alg,
            placement=Placement(self.embedding, self.offset),
            frame_codes=self.frame,
            ack_every_n=self.ack_every,
            resend_limit=self.resend_limit,
            schedule_seed=self.offset_seed,
            dummy_seed=self.seed,
        )
        values.update(overrides)
        return SessionConfig(**values)


def _enum_parser(kind) -> Callable[[str], Any]:
    def parse(text: str):
        try:
            return kind(text.strip().lower())
        except ValueError:
            choices = ", ".join(member.value for member in kind)
            raise ConfigError(f"{text!r} is not one of {choices}") from None
    return parse


def _alg(text: str) -> EmbedAlgorithm:
    try:
        return EmbedAlgorithm[text.strip().upper()]
    except KeyError:
        raise ConfigError(f"unknown algorithm {text!r}; use lsb1, lsb2, msb or lsb6") from None


def _typed(kind) -> Callable[[str], Any]:
    def parse(text: str):
        try:
            return kind(text.strip())
        except ValueError:
            raise ConfigError(f"{text!r} is not a valid {kind.__name__}") from None
    return parse


_PARSERS: Dict[str, Callable[[str], Any]] = {
    "codec": _enum_parser(CodecId),
    "alg": _alg,
    "header": _enum_parser(HeaderDesign),
    "embedding": _enum_parser(PlacementMode),
    "offset": _typed(int),
    "frame": _typed(int),
    "loss": _typed(float),
    "reorder": _typed(float),
    "seed": _typed(int),
    "ack_every": _typed(int),
    "offset_seed": _typed(int),
    "resend_limit": _typed(int),
    "scenario": _typed(int),
    "domain": _enum_parser(MetricDomain),
    "pace_ms": _typed(int),
    "input": Path,
    "payload": Path,
    "peer": str,
    "listen": str,
    "report": Path,
    "plot": Path,
    "transcript": Path,
    "pesq_tool": str,
}


def parse_value(name: str, raw: Union[str, Any]) -> Any:
    if not isinstance(raw, str):
        return raw
    return _PARSERS[name](raw)


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read STEGO_* keys from a dotenv-style file into typed settings values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values: Dict[str, Any] = {}
    for key, raw in dotenv_values(path).items():
        name = key[len(KEY_PREFIX):].lower() if key.startswith(KEY_PREFIX) else None
        if name not in _PARSERS:
            logger.warning("ignoring unknown config key %s in %s", key, path)
            continue
        if raw is None or raw == "":
            continue
        values[name] = parse_value(name, raw)
    return values


def resolve_settings(flags: Mapping[str, Any], config_path: Optional[Union[str, Path]] = None) -> Settings:
    """Defaults, then the config file, then every flag that was given (not None)."""
    settings = Settings()
    if config_path is not None:
        settings = replace(settings, **load_config_file(config_path))
    known = {f.name for f in fields(Settings)}
    given = {name: parse_value(name, value) for name, value in flags.items()
             if name in known and value is not None}
    return replace(settings, **given)
