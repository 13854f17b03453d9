from setuptools import setup, find_packages

setup(
    name="axiomlib",
    version="0.1",
    packages=find_packages(exclude=["examples", "examples.*"]),
    install_requires=[
        "numpy>=2.0",
        "scipy>=1.11",
        "PyYAML>=6.0",
    ],
    extras_require={
        "test": ["pytest>=8.0", "hypothesis>=6.100"],
    },
    entry_points={
        "console_scripts": ["axiomlib=axiomlib.main:main"],
    },
    description="Permissioned-ledger mechanisms and agent-based containment scenarios for AGI safety axioms",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
)
