from setuptools import find_packages, setup

setup(
    name="flyclient-sim",
    packages=find_packages(include=["flyclient_sim", "flyclient_sim.*"]),
    install_requires=[
        "fastapi",
        "httpx",
        "numpy",
        "pydantic",
        "pytest",
        "requests",
        "scipy",
        "tqdm",
        "uvicorn",
    ],
)
