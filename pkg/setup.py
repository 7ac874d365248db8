from setuptools import setup
from setuptools_rust import Binding, RustExtension

setup(
    rust_extensions=[
        RustExtension(
            "pployalty._native",
            path="rust/Cargo.toml",
            binding=Binding.PyO3,
            # the pure-Python backend takes over when no Rust toolchain is present
            optional=True,
            debug=False,
        )
    ],
    zip_safe=False,
)
