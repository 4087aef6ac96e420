"""The closed set of API aspects that sentences can be labeled with."""

from __future__ import annotations

import enum


class Aspect(enum.Enum):
    """One of the 11 qualities of a software API discussed in forum text."""

    PERFORMANCE = "Performance"
    USABILITY = "Usability"
    SECURITY = "Security"
    COMMUNITY = "Community"
    COMPATIBILITY = "Compatibility"
    PORTABILITY = "Portability"
    DOCUMENTATION = "Documentation"
    BUG = "Bug"
    LEGAL = "Legal"
    ONLY_SENTIMENT = "OnlySentiment"
    OTHERS = "Others"

    def __str__(self) -> str:
        return self.value


ALL_ASPECTS: tuple[Aspect, ...] = tuple(Aspect)

_BY_NAME = {a.value: a for a in Aspect}


def parse_aspect(name: str) -> Aspect:
    """Map a label string to an Aspect; anything outside the 11 is rejected."""
    try:
        return _BY_NAME[name]
    except KeyError:
        known = ", ".join(a.value for a in Aspect)
        raise ValueError(f"unknown aspect {name!r}; expected one of: {known}") from None
