"""Public info strings ``c`` agreed at issuance.

Two variants, both encoded as canonical compact JSON arrays so that the
encoding is injective and parses back to the same value::

    ["R", "2026-10", "Inception"]          purchase receipt: epoch, label
    ["P", "acme", 20, "2027-10-16"]        loyalty points: vendor, value, expiry
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass

_EPOCH = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")


class InfoError(ValueError):
    pass


@dataclass(frozen=True)
class ReceiptInfo:
    label: str
    epoch: str  # calendar month, YYYY-MM

    def encode(self):
        return _dump(["R", self.epoch, self.label])


@dataclass(frozen=True)
class PointsInfo:
    vendor_id: str
    denomination: int
    expiry: dt.date

    def encode(self):
        return _dump(["P", self.vendor_id, self.denomination, self.expiry.isoformat()])

    def expired(self, today):
        return today > self.expiry


def _dump(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def epoch_of(when):
    return f"{when.year:04d}-{when.month:02d}"


def parse_info(c):
    try:
        obj = json.loads(c)
    except (TypeError, ValueError) as exc:
        raise InfoError("public info is not JSON") from exc
    if not isinstance(obj, list) or not obj:
        raise InfoError("public info must be a non-empty array")
    try:
        if obj[0] == "R" and len(obj) == 3:
            _, epoch, label = obj
            if not isinstance(label, str) or not isinstance(epoch, str) or not _EPOCH.match(epoch):
                raise InfoError("bad receipt info")
            info = ReceiptInfo(label, epoch)
        elif obj[0] == "P" and len(obj) == 4:
            _, vendor, denom, expiry = obj
            if not isinstance(vendor, str) or type(denom) is not int or denom < 1:
                raise InfoError("bad points info")
            info = PointsInfo(vendor, denom, dt.date.fromisoformat(expiry))
        else:
            raise InfoError(f"unknown public info variant {obj[0]!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InfoError):
            raise
        raise InfoError(str(exc)) from exc
    if info.encode() != c:
        raise InfoError("public info is not in canonical form")
    return info
