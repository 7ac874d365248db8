"""Privacy-preserving loyalty program on partially blind signatures.

Subpackages and modules:

- ``crypto_core``: curve groups, hashes, encodings (compiled or pure-Python backend)
- ``pbsig``: partially blind signatures with aggregation
- ``tokens``: tokens, issuance, spent ledger with linkage
- ``taxonomy``: product taxonomy and generalization
- ``loyalty``: vendor, customer wallet, reward policy
- ``wire``: JSON-lines protocol, daemon and client
- ``bench``: primitive timings and cost model
"""

from ._backend import NAME as BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
