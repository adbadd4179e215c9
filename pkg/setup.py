from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="qnc-toolkit",
    version="0.2.0",
    author="sleroy",
    author_email="your.email@example.com",
    description="Quantized network coding simulator with BP, l1 and packet-forwarding baselines",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/sleroy/qnc_toolkit",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "networkx>=2.6",
        "pandas>=1.3.0",
        "xlsxwriter>=1.3.0",
        "matplotlib>=3.5.0",
        "tqdm>=4.60.0",
    ],
    entry_points={
        "console_scripts": [
            "qnc-toolkit=qnc_toolkit.cli:main",
        ],
    },
)
