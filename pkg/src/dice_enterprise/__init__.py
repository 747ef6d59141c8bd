"""Perfect sampling of rational functions of a die's probabilities."""

from .enterprise import DiceEnterprise, bounds, build, from_ladder, sample
from .errors import (CapExceeded, ConfigError, DiceEnterpriseError, IterationCapExceeded,
                     NormalizationError, NotApplicable, ParseError, PolyaExhausted)
from .ladder import Ladder, decompose
from .sampling import RandomnessMode, SimulatedDie

__all__ = [
    "DiceEnterprise", "bounds", "build", "from_ladder", "sample", "Ladder", "decompose",
    "RandomnessMode", "SimulatedDie", "CapExceeded", "ConfigError", "DiceEnterpriseError",
    "IterationCapExceeded", "NormalizationError", "NotApplicable", "ParseError", "PolyaExhausted",
]
