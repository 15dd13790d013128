# flake8: noqa

__version__ = "0.1.0"

from . import exceptions
from .config import ExperimentConfig
from .config import load_config
from .harness import fit_log_curve
from .harness import plateau_metric
from .harness import run_experiment
from .harness import run_replication
from .oracle import SynthOracle
from .policy import CFUCBPolicy
from .theory import lambert_w_minus1
from .theory import lemma6_check
