from setuptools import find_packages
from setuptools import setup

from mindkit import __version__


with open("README.md", encoding="utf8") as readme_file:
    readme = readme_file.read()

setup(
    name="mindkit",
    version=__version__,
    description=(
        "Multiscale constrained estimators: wavelet thresholding, "
        "TV and Sobolev denoising, Dantzig selector and multiscale segmentation."
    ),
    long_description=readme,
    long_description_content_type="text/markdown",
    license="BSD license",
    include_package_data=True,
    packages=find_packages(include=["mindkit", "mindkit.*"]),
    python_requires=">=3.9",
    install_requires=["numpy>=1.22", "scipy>=1.8"],
    entry_points={"console_scripts": ["mindkit = mindkit.cli:main"]},
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3 :: Only",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
