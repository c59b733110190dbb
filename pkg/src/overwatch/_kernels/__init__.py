"""Hot-loop kernels: compiled extension with a pure-Python fallback.

Backend selection happens once at import. Set ``OVERWATCH_KERNELS`` to
``compiled`` or ``python`` to force one side (``compiled`` raises if the
extension is missing); the default picks the extension when available.
"""

import os

_prefer = os.environ.get("OVERWATCH_KERNELS", "auto")

if _prefer == "python":
    from . import _impl_py as _impl
elif _prefer == "compiled":
    from . import _impl_cy as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _impl_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _impl_py as _impl

BACKEND = _impl.BACKEND
plant_step = _impl.plant_step
rollout = _impl.rollout
rollout_gradient = _impl.rollout_gradient

__all__ = ["BACKEND", "plant_step", "rollout", "rollout_gradient"]
