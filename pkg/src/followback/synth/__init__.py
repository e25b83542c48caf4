"""Synthetic corpora with planted follow-back communities and a honeypot simulator."""

from .delays import DelayModel, delay_model, observed
from .generator import BACKGROUND, Planted, SyntheticCorpus, generate
from .honeypot import (STRATEGIES, HoneypotConfig, HoneypotSimulator, StageResult, WorldTargets,
                       honeypot_world, run_protocol)
from .specs import DEFAULT_PIVOT, CommunitySpec, GeneratorParams, GroupProfile, default_specs, load_specs, save_specs

__all__ = [
    "BACKGROUND", "DEFAULT_PIVOT", "STRATEGIES", "CommunitySpec", "DelayModel", "GeneratorParams",
    "GroupProfile", "HoneypotConfig", "HoneypotSimulator", "Planted", "StageResult", "SyntheticCorpus",
    "WorldTargets", "default_specs", "delay_model", "generate", "honeypot_world", "load_specs",
    "observed", "run_protocol", "save_specs",
]
