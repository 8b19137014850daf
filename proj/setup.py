import os

from pybind11.setup_helpers import ParallelCompile, Pybind11Extension, build_ext
from setuptools import setup

HERE = os.path.abspath(os.path.dirname(__file__))


def eigen_include():
    for candidate in (
        os.environ.get("EIGEN3_INCLUDE_DIR", ""),
        "/usr/include/eigen3",
        "/usr/local/include/eigen3",
    ):
        if candidate and os.path.isdir(candidate):
            return candidate
    raise RuntimeError("Eigen3 headers not found; set EIGEN3_INCLUDE_DIR")


sources = [
    "bindings/py_core.cpp",
    "src/rng.cpp",
    "src/linalg.cpp",
    "src/retraction.cpp",
    "src/observation.cpp",
    "src/solver.cpp",
    "src/baselines.cpp",
    "src/diagnostics.cpp",
    "src/experiments.cpp",
    "src/verify.cpp",
]

ext_modules = [
    Pybind11Extension(
        "dbflow._core",
        sources,
        include_dirs=[
            os.path.join(HERE, "include"),
            os.path.join(HERE, "vendor"),
            eigen_include(),
        ],
        cxx_std=20,
    )
]

ParallelCompile("NPY_NUM_BUILD_JOBS").install()

setup(ext_modules=ext_modules, cmdclass={"build_ext": build_ext})
