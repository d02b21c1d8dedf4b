"""Hot-kernel dispatch: compiled Cython extension when built, numpy fallback.

Set PIPEFORGE_KERNELS=pure|compiled to force a backend; the default tries
the extension and silently falls back.  `benchmarks/bench_kernels.py`
compares the two.
"""

import os

from . import _pure

_requested = os.environ.get("PIPEFORGE_KERNELS", "auto").strip().lower()
if _requested not in ("auto", "pure", "compiled"):
    raise ValueError(f"PIPEFORGE_KERNELS must be auto|pure|compiled, got {_requested!r}")

_impl = _pure
_backend = "pure"
if _requested != "pure":
    try:
        from . import _ckern as _compiled

        _impl = _compiled
        _backend = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise


def backend_name() -> str:
    return _backend


forward_single = _impl.forward_single
puct_argmax = _impl.puct_argmax
sgd_fit_logistic = _impl.sgd_fit_logistic
sgd_fit_squared = _impl.sgd_fit_squared

__all__ = [
    "backend_name",
    "forward_single",
    "puct_argmax",
    "sgd_fit_logistic",
    "sgd_fit_squared",
]
