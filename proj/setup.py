"""CMake-driven build of the pybind11 extension.

The extension is configured and compiled by the project's CMake tree
(QFIELD_BUILD_PYTHON=ON) and the resulting module is dropped into the
``qfield`` package.
"""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        out_dir.mkdir(parents=True, exist_ok=True)
        cfg_args = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DQFIELD_BUILD_TESTS=OFF",
            "-DQFIELD_BUILD_PYTHON=ON",
            f"-DPython_EXECUTABLE={sys.executable}",
            f"-DQFIELD_PYMODULE_OUTPUT_DIR={out_dir}",
        ]
        subprocess.run(cfg_args, check=True)
        jobs = str(os.cpu_count() or 1)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_qfield", "-j", jobs],
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("qfield._qfield")],
    cmdclass={"build_ext": CMakeBuild},
)
