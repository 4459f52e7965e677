"""Example programs shipped with the package."""

from importlib import resources
from typing import List

from .syntax import Program, parse_program


def names() -> List[str]:
    files = resources.files(__package__).joinpath("programs")
    return sorted(f.name[:-5] for f in files.iterdir() if f.name.endswith(".dlge"))


def source(name: str) -> str:
    return resources.files(__package__).joinpath("programs", f"{name}.dlge").read_text(encoding="utf-8")


def load(name: str) -> Program:
    return parse_program(source(name))
