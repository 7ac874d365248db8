"""Wire protocol, vendor daemon and customer transport."""

from .client import RemoteSession, RemoteVendor, TransportError, parse_endpoint
from .messages import KINDS, MAX_LINE, VERSION, WireError, WireMessage
from .server import VendorServer, vendor_serve
from .transcript import Transcript

__all__ = [
    "RemoteSession", "RemoteVendor", "TransportError", "parse_endpoint", "KINDS", "MAX_LINE",
    "VERSION", "WireError", "WireMessage", "VendorServer", "vendor_serve", "Transcript",
]
