import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off: the reference (numpy) kernels and the compiled kernels
# must produce bit-identical doubles, so FMA contraction is disabled.
extensions = [
    Extension(
        "planloc.kernels._fast",
        ["src/planloc/kernels/_fast.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
