"""Python interface to the coevolution core.

Configurations, networks and reports cross the boundary as JSON; this module
converts them to and from plain Python objects.
"""

import json

from . import _core
from ._core import (
    PROTOCOL_VERSION,
    CheckpointError,
    ConfigError,
    NetworkError,
    ProtocolError,
    pareto_front,
    pareto_fronts,
)

__all__ = [
    "PROTOCOL_VERSION",
    "CheckpointError",
    "ConfigError",
    "NetworkError",
    "ProtocolError",
    "count_parameters",
    "decode_frames",
    "effective_config",
    "encode_frame",
    "pareto_front",
    "pareto_fronts",
    "report",
    "resume",
    "run",
    "surrogate_fitness",
    "validate_network",
]


def _text(network):
    return network if isinstance(network, str) else json.dumps(network)


def count_parameters(network):
    """Trainable parameters of an interchange network (str or dict)."""
    return _core.count_parameters(_text(network))


def validate_network(network):
    return _core.validate_network(_text(network))


def surrogate_fitness(network, weights=None):
    return _core.surrogate_fitness(_text(network), json.dumps(weights) if weights else "")


def effective_config(config):
    """Fully expanded run configuration; raises ConfigError on bad fields."""
    return json.loads(_core.effective_config(json.dumps(config)))


def run(config, out_dir, stop_after=None):
    return json.loads(_core.run(json.dumps(config), str(out_dir), stop_after))


def resume(checkpoint, stop_after=None):
    return json.loads(_core.resume(str(checkpoint), stop_after))


def report(run_dir):
    return json.loads(_core.report(str(run_dir)))


def encode_frame(message):
    return _core.encode_frame(json.dumps(message))


def decode_frames(data):
    return [json.loads(m) for m in _core.decode_frames(data)]
