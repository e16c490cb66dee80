from setuptools import setup
from epi_denoise._version import __version__

setup(version=__version__)
