"""Build hook for the optional GMP-backed Sturm chain extension.

The package works without the extension (a gmpy2 fallback implements the
same integer chain), but exact root counting at degree ~100 is ~30x faster
with it. The build is best-effort: if gmp.h or a compiler is missing the
extension is skipped.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError
from setuptools.extension import Extension


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except (CCompilerError, ExecError, PlatformError, OSError):
            print("warning: building rhlab._sturmchain failed; "
                  "falling back to the pure gmpy2 chain")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, OSError):
            print(f"warning: {ext.name} skipped (no GMP headers or compiler?)")


ext = Extension(
    "rhlab._sturmchain",
    sources=[os.path.join("src", "rhlab", "_sturmchain.c")],
    libraries=["gmp"],
    optional=True,
)

setup(ext_modules=[ext], cmdclass={"build_ext": OptionalBuildExt})
