"""Loyalty program built on partially blind tokens: vendor, wallet, rewards."""

from ..crypto_core import setup as system_setup
from .info import InfoError, PointsInfo, ReceiptInfo, epoch_of, parse_info
from .rewards import (
    DEFAULT_DENOMINATIONS,
    AcceptedClaim,
    PolicyError,
    RewardPolicy,
    compute_reward,
    decompose,
)
from .vendor import (
    BundleError,
    ProtocolReject,
    Vendor,
    VendorBundle,
    VendorSession,
    vendor_setup,
)
from .wallet import (
    CustomerWallet,
    OfferRejected,
    PointToken,
    PurchaseGroup,
    WalletError,
    enroll,
    redeem,
    select_points,
    submit,
    use,
)

__all__ = [
    "system_setup", "InfoError", "PointsInfo", "ReceiptInfo", "epoch_of", "parse_info",
    "DEFAULT_DENOMINATIONS", "AcceptedClaim", "PolicyError", "RewardPolicy", "compute_reward",
    "decompose", "BundleError", "ProtocolReject", "Vendor", "VendorBundle", "VendorSession",
    "vendor_setup", "CustomerWallet", "OfferRejected", "PointToken", "PurchaseGroup",
    "WalletError", "enroll", "redeem", "select_points", "submit", "use",
]
