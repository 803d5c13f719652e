"""Noisy prediction-based control of one-dimensional maps."""
from .maps import MapProbe, MapSpec, get_map, parse_map, probe_map
from .noise import InfeasibleError, NoiseSpec
from .stability import ControlSpec, Verdict

__all__ = [
    "MapSpec", "MapProbe", "get_map", "parse_map", "probe_map",
    "NoiseSpec", "InfeasibleError", "ControlSpec", "Verdict",
]
