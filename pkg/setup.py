from setuptools import setup, find_packages

setup(
    name="swarmrec",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.9.0",
        "pandas>=1.5.0",
        "tqdm>=4.60.0",
        "requests>=2.25.0",
        "sqlalchemy>=2.0.0",
        "pydantic>=2.0.0",
        "python-dotenv>=0.15.0",
        "gensim>=4.0.0",
    ],
    entry_points={
        "console_scripts": [
            "swarmrec = swarmrec.cli:main",
        ],
    },
    description="Hypergraph social recommendation pipeline with consensus-dynamics verification",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
)
