"""Kernel selection: compiled extension when available, pure Python otherwise.

Set FLATMC_PURE=1 to force the pure-Python kernel (used by the benchmark and
for debugging miscompiles).
"""

import os

if os.environ.get("FLATMC_PURE"):
    from flatmc import _evalcore_py as _impl
else:
    try:
        from flatmc import _evalcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        from flatmc import _evalcore_py as _impl

BACKEND = _impl.BACKEND
bnot = _impl.bnot
band = _impl.band
bor = _impl.bor
next_shift = _impl.next_shift
prev_shift = _impl.prev_shift
since_pass = _impl.since_pass
until_pass = _impl.until_pass
prog_step = _impl.prog_step
