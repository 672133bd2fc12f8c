"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``_fast``, Cython) and the reference module
(``_ref``, numpy) implement the same accumulation contract and produce
bit-identical float64 results; which one backs the public names is decided
once at import. Set ``PLANLOC_PURE=1`` to force the fallback.
"""

import os

from . import _ref

if os.environ.get("PLANLOC_PURE", "") not in ("", "0"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

score_naive = _impl.score_naive
splat_rotated = _impl.splat_rotated
bilinear_gather = _impl.bilinear_gather
rotated_offsets = _ref.rotated_offsets


def backend_name() -> str:
    """'compiled' when the Cython extension is active, else 'pure-numpy'."""
    return "pure-numpy" if _impl is _ref else "compiled"
