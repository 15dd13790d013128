import re

from setuptools import find_packages
from setuptools import setup


def get_version():
    filename = "cfucb/__init__.py"
    with open(filename) as f:
        match = re.search(
            r"""^__version__ = ['"]([^'"]*)['"]""", f.read(), re.M
        )
    if not match:
        raise RuntimeError("{} doesn't contain __version__".format(filename))
    version = match.groups()[0]
    return version


version = get_version()


def get_long_description():
    with open("README.md") as f:
        return f.read()


setup(
    name="cfucb",
    version=version,
    packages=find_packages(exclude=["new"]),
    python_requires=">=3.8",
    install_requires=[
        "filelock",
        "numpy>=1.17",
        "pandas",
        "scipy",
        "tqdm",
    ],
    extras_require={"test": ["pytest"]},
    description="Counterfactual UCB bandits with a synthetic control oracle.",
    long_description=get_long_description(),
    long_description_content_type="text/markdown",
    keywords="Bandits Synthetic-Control Simulation",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Natural Language :: English",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: Implementation :: CPython",
    ],
    entry_points={"console_scripts": ["cfucb=cfucb.cli:main"]},
)
