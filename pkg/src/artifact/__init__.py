"""Two-beam stochastic-optics CHSH simulator and global-section certifier."""

from .errors import ArtifactError
from .linalg import DensityOperator, Ket, Operator
from .measure import TSIRELSON_ANGLES, ChshAngles, SettingPair, chsh, correlation
from .model import EmpiricalModel, Scenario, chsh_scenario
from .sheaf import SectionResult, chsh_family_value, global_section, induce_model

__all__ = [
    "ArtifactError",
    "ChshAngles",
    "DensityOperator",
    "EmpiricalModel",
    "Ket",
    "Operator",
    "Scenario",
    "SectionResult",
    "SettingPair",
    "TSIRELSON_ANGLES",
    "chsh",
    "chsh_family_value",
    "chsh_scenario",
    "correlation",
    "global_section",
    "induce_model",
]
