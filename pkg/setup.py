"""
TWINDOT Setup
Coherent reflectivity and photon statistics of two dipole-coupled quantum dots in a cavity
"""

from setuptools import setup, find_packages
from pathlib import Path

# Read README for long description
readme_file = Path(__file__).parent / "README.md"
long_description = readme_file.read_text() if readme_file.exists() else ""

setup(
    name="twindot",
    version="1.0.0",
    author="TWINDOT Development Team",
    description="Driven-dissipative simulator for two dipole-coupled quantum dots in a lossy cavity",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["examples", "examples.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Physics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.3",
        "scipy>=1.10.1",
        "pydantic>=2.5.0",
        "matplotlib>=3.7.1",
        "python-json-logger>=2.0.7",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-cov>=4.1.0",
            "black>=23.11.0",
            "flake8>=6.1.0",
            "mypy>=1.7.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "twindot=twindot.cli.cli:main",
        ],
    },
    include_package_data=True,
    package_data={
        "twindot": [
            "data/presets/*.json",
        ],
    },
    keywords=[
        "quantum-dots",
        "cavity-qed",
        "master-equation",
        "dipole-dipole-coupling",
        "reflectivity",
        "photon-statistics",
    ],
)
