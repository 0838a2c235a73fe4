"""wavebranch: rotational solitary water waves in the partial-hodograph frame.

Subpackages follow the pipeline: vorticity -> stream (uniform streams and flow
force) -> spectrum1d (continuous-spectrum edge) -> strip (Newton solver for
the height equation) -> branch (pseudo-arclength continuation and spectral
monitoring) -> lyapunov (reduction and branch switching) -> physical
(reconstruction and same-Bernoulli-constant pairs) -> cli.
"""

__version__ = "0.1.0"

from .vorticity import VorticitySpec  # noqa: F401
