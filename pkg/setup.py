from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "auvformation.kernels._core",
                ["src/auvformation/kernels/_core.pyx"],
                # -ffp-contract=off keeps results bit-identical to the
                # pure-Python backend (no fused multiply-add contraction)
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
