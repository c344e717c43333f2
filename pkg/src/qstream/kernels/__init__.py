"""Backend selection for the simulation kernels.

The compiled extension is preferred when importable; the pure-Python
reference implementation is the fallback.  Both produce bit-identical
output, so the choice only affects speed.  QSTREAM_BACKEND=python|compiled
forces a backend (useful for the equivalence tests and benchmarks).
"""

import os

from . import pykernels

_requested = os.environ.get("QSTREAM_BACKEND", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _fast as impl
        BACKEND = "compiled"
    except ImportError:
        impl = pykernels
        BACKEND = "python"
elif _requested in ("compiled", "fast", "c"):
    from . import _fast as impl
    BACKEND = "compiled"
elif _requested in ("python", "py", "pure"):
    impl = pykernels
    BACKEND = "python"
else:
    raise ImportError(f"QSTREAM_BACKEND={_requested!r} not recognized "
                      "(expected auto, compiled, or python)")

KIND_FREE = pykernels.KIND_FREE
KIND_BOTH = pykernels.KIND_BOTH
KIND_OFFLINE = pykernels.KIND_OFFLINE
KIND_SAFE = pykernels.KIND_SAFE
KIND_RISKY = pykernels.KIND_RISKY

poisson_paths = impl.poisson_paths
crossing_paths = impl.crossing_paths
hitting_paths = impl.hitting_paths
fluid_paths = impl.fluid_paths
manifold_paths = impl.manifold_paths
