"""Hot kernels: compiled when available, numpy otherwise.

The compiled module is picked at import unless ``OPENKROTOV_PURE_PYTHON`` is
set to a non-empty value other than ``0``. ``BACKEND`` names the active one.

The number of threads used to advance independent states in the compiled
kernels comes from `set_num_threads`, initialised from ``OPENKROTOV_THREADS``
(unset means one thread, ``0`` means one per CPU).
"""
import os

from . import _pykernels

if os.environ.get("OPENKROTOV_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

_num_threads = 1


def set_num_threads(n: int) -> int:
    """Set the kernel thread count; ``0`` selects the CPU count. Returns the value in use."""
    global _num_threads
    n = int(n)
    if n < 0:
        raise ValueError(f"thread count must be >= 0, got {n}")
    _num_threads = n if n > 0 else (os.cpu_count() or 1)
    return _num_threads


def get_num_threads() -> int:
    return _num_threads


set_num_threads(int(os.environ.get("OPENKROTOV_THREADS", "1") or 1))

expm = _impl.expm


def forward(l0, lcs, samples, dt, states0):
    return _impl.forward(l0, lcs, samples, dt, states0, num_threads=_num_threads)


def backward(props, costates_final):
    return _impl.backward(props, costates_final, num_threads=_num_threads)


def sweep(l0, lcs, cmts, samples, shape, inv_lambda, u_max, costates, states0, dt):
    return _impl.sweep(
        l0, lcs, cmts, samples, shape, inv_lambda, u_max, costates, states0, dt,
        num_threads=_num_threads,
    )


def get_backend(name: str):
    """Return the kernel module called `name` (``"python"`` or ``"compiled"``)."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
