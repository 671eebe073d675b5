"""Subdivision-shell / boundary-integral flow solver."""

import importlib
import importlib.util
import os
import sys


def _load_core():
    try:
        return importlib.import_module("._core", __name__)
    except ImportError:
        pass
    # in-tree runs: the extension lives in the build directory
    core_dir = os.environ.get("FEBE_CORE_DIR")
    if not core_dir:
        raise ImportError(
            "febe._core is not built; install the package or set FEBE_CORE_DIR "
            "to the directory containing the extension module"
        )
    for name in os.listdir(core_dir):
        if name.startswith("_core") and name.endswith((".so", ".pyd")):
            spec = importlib.util.spec_from_file_location(
                __name__ + "._core", os.path.join(core_dir, name)
            )
            module = importlib.util.module_from_spec(spec)
            sys.modules[spec.name] = module
            spec.loader.exec_module(module)
            return module
    raise ImportError(f"no _core extension found in {core_dir}")


_core = _load_core()

Mesh = _core.Mesh
Surface = _core.Surface
Scenario = _core.Scenario
Simulation = _core.Simulation
SolverError = _core.SolverError
load_mesh = _core.load_mesh
make_scenario = _core.make_scenario
default_config = _core.default_config
shell_energy = _core.shell_energy
shell_gradient = _core.shell_gradient
volume = _core.volume
stokes_solve = _core.stokes_solve

__version__ = _core.__version__
__all__ = [
    "Mesh",
    "Surface",
    "Scenario",
    "Simulation",
    "SolverError",
    "load_mesh",
    "make_scenario",
    "default_config",
    "shell_energy",
    "shell_gradient",
    "volume",
    "stokes_solve",
]
