"""Bundled example scenarios."""
from __future__ import annotations

from importlib import resources

NAMES = ("pair", "chain", "paradox", "network_no_interact", "network_with_G", "great_grand")


def source(name: str) -> str:
    name = name.removesuffix(".qrf")
    if name not in NAMES:
        raise KeyError(f"no bundled scenario {name!r}; known: {', '.join(NAMES)}")
    return resources.files(__package__).joinpath("data", f"{name}.qrf").read_text(encoding="utf-8")


def load(name: str):
    from .parser import parse

    return parse(source(name))
