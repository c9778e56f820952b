"""
Configuration layer.
Environment settings (MCS_KPI_*) and the weight/normalization config file.
"""
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.schema import KpiEngineError, WeightConfig

load_dotenv()

logger = logging.getLogger(__name__)


class ConfigError(KpiEngineError):
    """Raised when the config file cannot be read or validated."""
    pass


class Settings(BaseSettings):
    """Process-level settings read from the environment or a .env file."""
    model_config = SettingsConfigDict(env_prefix="MCS_KPI_", env_file=".env", extra="ignore")

    config: Optional[Path] = None
    log_level: str = "INFO"
    trace_exporter: str = "none"


def _read_document(path: Path) -> Dict[str, Any]:
    try:
        if path.suffix.lower() == ".toml":
            with path.open("rb") as fh:
                return tomllib.load(fh)
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Config file {path} is malformed: {str(e)}")


def load_weight_config(path: Optional[Path] = None, settings: Optional[Settings] = None) -> WeightConfig:
    """
    Load the weight config from `path`, falling back to MCS_KPI_CONFIG.

    Args:
        path: Explicit config file (TOML or JSON)
        settings: Environment settings (created when omitted)

    Returns:
        WeightConfig: Parsed config, or the documented defaults when no file is given

    Raises:
        ConfigError: If the file is missing, malformed or fails validation
    """
    settings = settings or Settings()
    path = path or settings.config
    if path is None:
        logger.info("No config file given; using default weights")
        return WeightConfig.default()

    path = Path(path)
    document = _read_document(path)
    document.pop("schemaVersion", None)
    logger.info(f"Loading weight config from {path}")

    try:
        if "weights" not in document:
            return WeightConfig.default(**document)
        return WeightConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Config file {path} is invalid: {str(e)}")
