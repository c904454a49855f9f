import os
from dataclasses import dataclass, asdict, fields
from typing import Dict, Optional

from dotenv import load_dotenv, dotenv_values

# Load environment variables from .env file
load_dotenv()

ARTIFACT_VERSION = '1.0.0'

# Game defaults
DEFAULT_PAYOFF = os.getenv('PDLEARN_PAYOFF', '5,3,1,0')

# Learning dynamics defaults
DEFAULT_DT = float(os.getenv('PDLEARN_DT', '0.01'))
DEFAULT_T_MAX = float(os.getenv('PDLEARN_T_MAX', '10000'))
DEFAULT_EPSILON = float(os.getenv('PDLEARN_EPSILON', '1e-4'))
DEFAULT_WINDOW_FRACTION = float(os.getenv('PDLEARN_WINDOW_FRACTION', '0.1'))
DEFAULT_STRIDE = int(os.getenv('PDLEARN_STRIDE', '10'))
DEFAULT_FP_TOL = float(os.getenv('PDLEARN_FP_TOL', '1e-8'))
DEFAULT_CYCLE_TOL = float(os.getenv('PDLEARN_CYCLE_TOL', '1e-3'))
DEFAULT_DRIFT_RATIO = float(os.getenv('PDLEARN_DRIFT_RATIO', '0.25'))
DEFAULT_NEUTRAL_TOL = float(os.getenv('PDLEARN_NEUTRAL_TOL', '1e-2'))
DEFAULT_PIN_MARGIN = float(os.getenv('PDLEARN_PIN_MARGIN', '1e-2'))

# Outcome classification
DEFAULT_DELTA = float(os.getenv('PDLEARN_DELTA', '0.05'))
DEFAULT_STRUCTURE_TOL = float(os.getenv('PDLEARN_STRUCTURE_TOL', '0.02'))

# Ensembles
DEFAULT_SAMPLES = int(os.getenv('PDLEARN_SAMPLES', '1000'))
DEFAULT_SEED = int(os.getenv('PDLEARN_SEED', '1'))
DEFAULT_CHUNK_SIZE = int(os.getenv('PDLEARN_CHUNK_SIZE', '100'))
DEFAULT_JOBS = int(os.getenv('PDLEARN_JOBS', '1'))
DEFAULT_EQUILIBRIA = int(os.getenv('PDLEARN_EQUILIBRIA', '100'))

# File Configuration
OUTPUT_DIR = os.getenv('PDLEARN_OUTPUT_DIR', 'results')
NUMBER_FORMAT = '%.12g'


@dataclass
class RunConfig:
    """
    Fully resolved settings of one CLI run.

    Every field has a default, so a partial config file or a bare command line is
    completed here and the whole object is echoed into the output metadata.
    """
    command: str = 'simulate'
    class_x: str = '1234'
    class_y: str = '1212'
    classes: str = 'four'
    payoff: str = DEFAULT_PAYOFF
    matrices: str = '5,3,1,0;5,4,2,0'
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    dt: float = DEFAULT_DT
    t_max: float = DEFAULT_T_MAX
    epsilon: float = DEFAULT_EPSILON
    delta: float = DEFAULT_DELTA
    window: float = DEFAULT_WINDOW_FRACTION
    stride: int = DEFAULT_STRIDE
    mode: str = 'mutual'
    fixed_opponent: str = '0.9,0.1'
    starts: str = 'matched'
    init_x: str = ''
    init_y: str = ''
    equilibria: int = DEFAULT_EQUILIBRIA
    chunk_size: int = DEFAULT_CHUNK_SIZE
    drop_r_edge: bool = False
    jobs: int = DEFAULT_JOBS
    out: str = ''

    @classmethod
    def field_types(cls) -> Dict[str, type]:
        return {f.name: f.type for f in fields(cls)}

    @classmethod
    def resolve(cls, flags: Dict[str, object], config_file: Optional[str] = None) -> 'RunConfig':
        """
        Build a config from defaults, an optional KEY=VALUE file and explicit flags.

        Args:
            flags (dict): Flag values; entries that are None were not given
            config_file (str): Optional dotenv-format file, keys like CLASS_X

        Returns:
            RunConfig: The resolved config
        """
        values: Dict[str, object] = {}
        types = cls.field_types()

        if config_file:
            if not os.path.exists(config_file):
                raise FileNotFoundError(f"Config file not found: {config_file}")
            for key, raw in dotenv_values(config_file).items():
                name = key.strip().lower().replace('-', '_')
                if name not in types or name == 'command':
                    raise ValueError(f"Unknown config key '{key}' in {config_file}")
                values[name] = _coerce(raw, types[name], key)

        for name, value in flags.items():
            if value is None:
                continue
            if name not in types:
                raise ValueError(f"Unknown option '{name}'")
            values[name] = _coerce(value, types[name], name)

        return cls(**values)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def output_dir(self) -> str:
        return self.out or os.path.join(OUTPUT_DIR, self.command)


def _coerce(raw, target: type, key: str):
    if raw is None:
        raise ValueError(f"Missing value for '{key}'")
    if target is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ('1', 'true', 'yes', 'on'):
            return True
        if text in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError(f"Invalid boolean for '{key}': {raw}")
    try:
        return target(raw) if not isinstance(raw, target) else raw
    except (TypeError, ValueError):
        raise ValueError(f"Invalid value for '{key}': {raw}")
