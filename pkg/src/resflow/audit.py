"""Call-count audit hooks.

The trainer uses these to assert that training never touches the ODE
sampler (the whole point of velocity matching is being simulation-free).
"""

from collections import defaultdict

COUNTS: dict = defaultdict(int)


def record(name: str) -> None:
    COUNTS[name] += 1


def snapshot() -> dict:
    return dict(COUNTS)
