"""Dispatch to the selected kernel backend (see ``_backend``)."""

from ._backend import BACKEND, USE_NUMBA

if USE_NUMBA:
    from . import _kernels_numba as _impl
else:
    from . import _kernels_numpy as _impl

STATUS_CONVERGED = _impl.STATUS_CONVERGED
STATUS_MAXITER = _impl.STATUS_MAXITER
STATUS_DIVERGED = _impl.STATUS_DIVERGED

iterate_batch = _impl.iterate_batch
first_escape_batch = _impl.first_escape_batch
green_batch = _impl.green_batch
newton_batch = _impl.newton_batch

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "STATUS_CONVERGED",
    "STATUS_MAXITER",
    "STATUS_DIVERGED",
    "iterate_batch",
    "first_escape_batch",
    "green_batch",
    "newton_batch",
]
