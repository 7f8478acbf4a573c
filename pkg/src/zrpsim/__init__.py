"""Event-driven zero-range process simulator with site-disordered rates.

Subpackages by role: `environment` (rate fields, jump kernels),
`measures` (stationary laws), `dynamics` (event stream and evolution),
`coupling` (paired runs and discrepancy tracking), `walkers` (absorbed
random walks), `oracle` (exact small-system stationarity), `experiments`
(runnable studies behind the `zrp` command line).
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
