"""Build hook for the optional compiled shortest-path kernel.

The extension is best-effort: when Cython or a C compiler is missing the
package installs anyway and latoracle.dp falls back to the pure-Python
kernel at import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "latoracle._dp_cy",
                ["src/latoracle/_dp_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"latoracle: skipping compiled kernel ({exc}); pure-Python fallback will be used")
    ext_modules = []

setup(ext_modules=ext_modules)
