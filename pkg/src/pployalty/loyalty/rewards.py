"""Loyalty-point reward schedule.

Each accepted claim earns ``base_per_level * (d - level)``: the less a
purchase is generalized, the more it pays. On top, claims linked through a
shared ``y`` earn a group bonus following the superlinear total

    R(n) = round(link_base * n * (1 + link_gamma * ln n))

paid incrementally: when a group grows from n_prev to n claims the vendor
pays ``R(n) - R(n_prev)``. Only claims spent inside the time window count
towards n.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass

DAY_MS = 86_400_000
DEFAULT_DENOMINATIONS = (1, 2, 5, 10, 20, 50)


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class RewardPolicy:
    base_per_level: float = 10
    link_base: float = 10
    link_gamma: float = 0.1
    window_days: int = 30

    def validate(self):
        if self.base_per_level < 0 or self.link_base < 0:
            raise PolicyError("reward constants must be non-negative")
        if self.link_gamma < 0:
            raise PolicyError("link_gamma must be >= 0")
        if self.window_days <= 0:
            raise PolicyError("window_days must be positive")
        return self

    def group_total(self, n):
        if n <= 0:
            return 0
        return max(0, _round(self.link_base * n * (1 + self.link_gamma * math.log(n))))

    def claim_base(self, level, height):
        return max(0, _round(self.base_per_level * (height - level)))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise PolicyError(str(exc)) from exc


def _round(x):
    # half-up, independent of Python's banker's rounding
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class AcceptedClaim:
    level: int
    height: int
    y: int
    timestamp: int


def compute_reward(policy, claims, group_size):
    """Points for a batch of claims already committed to the ledger.

    ``group_size(y)`` returns how many claims with link identifier ``y``
    fall inside the policy window *including* this batch.
    """
    amount = sum(policy.claim_base(c.level, c.height) for c in claims)
    for y, k in Counter(c.y for c in claims).items():
        n = group_size(y)
        amount += policy.group_total(n) - policy.group_total(max(0, n - k))
    return max(0, amount)


def decompose(amount, denominations=DEFAULT_DENOMINATIONS):
    """Greedy split of ``amount`` into denominations, largest first."""
    if amount < 0:
        raise ValueError("amount must be non-negative")
    out = []
    for d in sorted(denominations, reverse=True):
        k, amount = divmod(amount, d)
        out.extend([d] * k)
    if amount:
        raise ValueError("amount not representable in these denominations")
    return out


def validate_denominations(denominations):
    ds = list(denominations)
    if not ds:
        raise PolicyError("denominations must be non-empty")
    if any(type(d) is not int for d in ds) or ds != sorted(set(ds)):
        raise PolicyError("denominations must be strictly ascending integers")
    if ds[0] != 1:
        raise PolicyError("smallest denomination must be 1")
    return tuple(ds)
