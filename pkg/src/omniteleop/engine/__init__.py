"""Stepping-kernel backend selection.

Two interchangeable engines step the closed teleoperation loop: a
compiled extension and a pure-Python fallback composed from the public
module operations. They are formula-identical (same arithmetic, same
operation order, contraction disabled in the compiled build), so their
outputs agree bitwise; selection is therefore purely a speed choice.

Set OMNITELEOP_PURE=1 to force the fallback; otherwise the compiled
kernel is used when the extension built successfully.
"""

import os

from ._pure import MODE_POSE, MODE_WRENCH, PureEngine

if os.environ.get("OMNITELEOP_PURE") == "1":
    Engine = PureEngine
    BACKEND = "pure"
else:
    try:
        from ._core import CoreEngine

        Engine = CoreEngine
        BACKEND = "compiled"
    except ImportError:
        Engine = PureEngine
        BACKEND = "pure"

__all__ = ["Engine", "BACKEND", "PureEngine", "MODE_WRENCH", "MODE_POSE"]
