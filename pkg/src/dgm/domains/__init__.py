"""Shipped design domains, looked up by name."""
from .circuit import CircuitDomain
from .pipeline import PipelineDomain

DOMAINS = {"circuit": CircuitDomain, "pipeline": PipelineDomain}


def get(name):
    from ..errors import UsageError

    if name not in DOMAINS:
        raise UsageError(f"unknown domain {name!r}; choose from {', '.join(sorted(DOMAINS))}")
    return DOMAINS[name]()
