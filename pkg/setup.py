from setuptools import find_packages, setup

setup(
    name="moduler-dbarsolver",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "typer>=0.9,<0.26",
        "rich>=13.0",
        "python-dotenv>=1.0",
    ],
    entry_points={
        "console_scripts": [
            "dbarsolver=dbar_solver.cli:app"
        ]
    },
)
