"""cpsim: deterministic V2X collective-perception simulation.

Stations exchange awareness, perception, and event messages over an
abstract lossy channel; an injection layer reproduces a 17-attack catalog;
a nine-detector suite raises misbehavior reports; a risk engine rates the
catalog. Everything is a pure function of (scenario, seed).
"""

__version__ = "0.1.0"

from . import attacks, cps, detectors, geometry, messages, risk, world  # noqa: F401

__all__ = ["attacks", "cps", "detectors", "geometry", "messages", "risk", "world", "__version__"]
