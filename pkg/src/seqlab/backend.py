"""Kernel backend selection.

The hot dynamic-programming kernels exist twice: a Cython extension
(`seqlab._ctcore`) and a pure-numpy fallback (`seqlab._ctcore_py`).  The
compiled version is preferred; set SEQLAB_PURE_PYTHON=1 to force the
fallback (used by the parity tests and the benchmark).
"""

import os

if os.environ.get("SEQLAB_PURE_PYTHON"):
    from . import _ctcore_py as _impl
else:
    try:
        from . import _ctcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _ctcore_py as _impl

BACKEND = _impl.BACKEND_NAME
ctc_forward_backward = _impl.ctc_forward_backward
ctl_forward_backward = _impl.ctl_forward_backward


def get_backends():
    """Return {name: module} for every available kernel backend."""
    from . import _ctcore_py
    backends = {_ctcore_py.BACKEND_NAME: _ctcore_py}
    try:
        from . import _ctcore  # type: ignore[attr-defined]
        backends[_ctcore.BACKEND_NAME] = _ctcore
    except ImportError:
        pass
    return backends
