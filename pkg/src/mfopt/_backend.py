"""Selects the compiled kernel core when it is importable.

The pure-Python kernels are used when the extension was not built. Call
:func:`use` to switch explicitly (the benchmark script does this).
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

kernels = _ckernels if _ckernels is not None else _pykernels
name = "compiled" if _ckernels is not None else "python"


def use(backend):
    """Switch the active kernel implementation (``"compiled"`` or ``"python"``)."""
    global kernels, name
    if backend == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not available; build the extension")
        kernels = _ckernels
    elif backend == "python":
        kernels = _pykernels
    else:
        raise ValueError(f"unknown backend {backend!r}")
    name = backend


def available():
    return ["compiled", "python"] if _ckernels is not None else ["python"]
