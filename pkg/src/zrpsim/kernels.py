"""Kernel backend selection.

The hot loops exist twice: a compiled Cython extension and a pure-Python
reference.  Both produce bit-identical results; the compiled one is
selected when importable.  Set ZRPSIM_BACKEND=python (or =cython) to force
a choice; forcing cython raises if the extension is missing.
"""

from __future__ import annotations

import os

_choice = os.environ.get("ZRPSIM_BACKEND", "auto").lower()

if _choice in ("auto", "cython", "cy"):
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        if _choice != "auto":
            raise
        from . import _kernels_py as _impl
elif _choice in ("python", "py"):
    from . import _kernels_py as _impl
else:
    raise RuntimeError(f"unknown ZRPSIM_BACKEND={_choice!r}")

BACKEND = _impl.BACKEND

evolve_zrp = _impl.evolve_zrp
evolve_pair = _impl.evolve_pair
evolve_coupled = _impl.evolve_coupled
run_walks = _impl.run_walks
