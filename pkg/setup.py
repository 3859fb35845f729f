#!/usr/bin/env python3


from setuptools import find_packages, setup


setup(
    entry_points={"console_scripts": ["exits=exits.cli:main"]},
    install_requires=[
        "aws-lambda-powertools[tracer]>=2.26,<3",
        "jsonschema>=4.0",
        "numpy>=1.22",
        "PyYAML>=6.0",
        "scipy>=1.8"
    ],
    license="MIT-0",
    name="exits",
    package_data={"exits": ["schemas/*.json"]},
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    tests_require=["pytest"],
    version="0.1.0"
)
