from .config import ScenarioConfig, load_config, parse_config
from .runner import run_scenario

__all__ = ["ScenarioConfig", "load_config", "parse_config", "run_scenario"]
