import os
import platform
import sys

from setuptools import Extension, setup

# FEDWARDS_NO_EXT=1 installs the pure NumPy package only.
ext_modules = []
if not os.environ.get("FEDWARDS_NO_EXT"):
    from Cython.Build import cythonize

    # -ffast-math lets gcc call glibc's vector exp (libmvec); results stay
    # deterministic for a given binary.
    flags = ["-O3", "-ffast-math"]
    link = []
    if sys.platform.startswith("linux") and platform.machine() in ("x86_64", "AMD64"):
        link.append("-lmvec")

    ext_modules = cythonize(
        [
            Extension(
                "fedwards._localtime_c",
                ["src/fedwards/_localtime_c.pyx"],
                extra_compile_args=flags,
                extra_link_args=link,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
