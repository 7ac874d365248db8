"""Command line: customer wallet commands and the vendor daemon.

Exit codes:

    0  success
    2  usage error (bad flags or arguments)
    3  local validation failure (wallet missing or inconsistent, unknown
       purchase, points not payable exactly); nothing was sent
    4  network failure (vendor unreachable, connection dropped, garbage reply)
    5  protocol rejection (the vendor refused a request or a claim, or its
       reply failed the wallet's checks)
"""

from __future__ import annotations

import json
import logging
import os
import signal
import sys
from importlib import resources

import click

from . import __version__, crypto_core
from .loyalty import vendor as vendor_mod
from .loyalty import wallet as wallet_mod
from .loyalty.vendor import BundleError, ProtocolReject, Vendor
from .loyalty.wallet import CustomerWallet, OfferRejected, WalletError
from .tokens import IssuanceError
from .wire import RemoteVendor, Transcript, TransportError, vendor_serve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOCAL = 3
EXIT_NETWORK = 4
EXIT_REJECT = 5

DEFAULT_WALLET = "wallet.json"
DEFAULT_VENDOR = "127.0.0.1:7480"


class Failure(click.ClickException):
    def __init__(self, message, code):
        super().__init__(message)
        self.exit_code = code


def sample_taxonomy():
    return resources.files("pployalty").joinpath("data/movies.txt").read_text()


class Ctx:
    def __init__(self, wallet_path, endpoint, as_json, timeout):
        self.wallet_path = wallet_path
        self.endpoint = endpoint
        self.as_json = as_json
        self.timeout = timeout

    def remote(self):
        try:
            return RemoteVendor(self.endpoint, timeout=self.timeout)
        except ValueError as exc:
            raise Failure(str(exc), EXIT_USAGE) from exc

    def load_wallet(self):
        if not os.path.exists(self.wallet_path):
            raise Failure(f"no wallet at {self.wallet_path}; run 'enroll' first", EXIT_LOCAL)
        try:
            return CustomerWallet.load(self.wallet_path)
        except (OSError, ValueError, KeyError, TypeError, WalletError, BundleError) as exc:
            raise Failure(f"cannot read wallet: {exc}", EXIT_LOCAL) from exc

    def emit(self, doc, text):
        if self.as_json:
            click.echo(json.dumps(doc, sort_keys=True))
        else:
            click.echo(text)


def _guard(fn):
    """Map library exceptions to the documented exit codes."""
    try:
        return fn()
    except (WalletError,) as exc:
        raise Failure(str(exc), EXIT_LOCAL) from exc
    except TransportError as exc:
        raise Failure(f"network: {exc}", EXIT_NETWORK) from exc
    except ProtocolReject as exc:
        raise Failure(f"vendor rejected: {exc}", EXIT_REJECT) from exc
    except (OfferRejected, IssuanceError) as exc:
        raise Failure(f"vendor reply rejected: {exc}", EXIT_REJECT) from exc


@click.group()
@click.version_option(__version__)
@click.option("--wallet", "wallet_path", envvar="PPLOYALTY_WALLET", default=DEFAULT_WALLET,
              show_default=True, help="Wallet file (env PPLOYALTY_WALLET).")
@click.option("--vendor", "endpoint", envvar="PPLOYALTY_VENDOR", default=DEFAULT_VENDOR,
              show_default=True, help="Vendor HOST:PORT (env PPLOYALTY_VENDOR).")
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON document per command.")
@click.option("--timeout", default=30.0, show_default=True, help="Network timeout in seconds.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx, wallet_path, endpoint, as_json, timeout, verbose):
    """Privacy-preserving loyalty wallet and vendor daemon."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = Ctx(wallet_path, endpoint, as_json, timeout)


# -- customer ------------------------------------------------------------------

@cli.command()
@click.option("--force", is_flag=True, help="Overwrite an existing wallet.")
@click.pass_obj
def enroll(obj, force):
    """Fetch the vendor's public bundle and create an empty wallet."""
    if os.path.exists(obj.wallet_path) and not force:
        raise Failure(f"wallet {obj.wallet_path} exists (use --force)", EXIT_LOCAL)
    w = _guard(lambda: wallet_mod.enroll(obj.remote().bundle()))
    w.save(obj.wallet_path)
    b = w.bundle
    obj.emit(
        {"vendor_id": b.vendor_id, "taxonomy_height": b.taxonomy.height,
         "products": b.taxonomy.leaves(), "denominations": list(b.denominations)},
        f"enrolled with vendor {b.vendor_id!r}; {len(b.taxonomy.leaves())} products, "
        f"wallet at {obj.wallet_path}",
    )


@cli.command()
@click.argument("product")
@click.option("--persona", help="Reuse (or create) this named link identifier.")
@click.option("--fresh", is_flag=True, help="Use a fresh link identifier (default).")
@click.pass_obj
def buy(obj, product, persona, fresh):
    """Buy PRODUCT and collect receipts for its whole generalization path."""
    if persona and fresh:
        raise click.UsageError("--persona and --fresh are mutually exclusive")
    w = obj.load_wallet()
    try:
        g = _guard(lambda: wallet_mod.use(w, obj.remote(), product, persona=persona))
    finally:
        w.save(obj.wallet_path)
    obj.emit(_group_doc(g), f"purchase {g.id}: {' > '.join(g.labels)}"
             + (f" (persona {g.persona})" if g.persona else ""))


@cli.command("wallet")
@click.pass_obj
def show_wallet(obj):
    """List purchases and loyalty points."""
    w = obj.load_wallet()
    doc = {
        "purchases": [_group_doc(g) for g in w.purchases],
        "points": [{"denomination": p.denomination, "expiry": p.expiry.isoformat()} for p in w.points],
        "balance": w.balance,
        "credited": w.credited,
    }
    lines = [f"vendor {w.bundle.vendor_id}"]
    for g in w.purchases:
        state = "consumed" if g.consumed else "open"
        who = f" persona={g.persona}" if g.persona else ""
        lines.append(f"  {g.id}  {g.product:<14} {g.epoch}  {len(g.tokens)} tokens  {state}{who}")
        lines.append(f"      {' > '.join(g.labels)}")
    lines.append(f"points: {sorted((p.denomination for p in w.points), reverse=True)}  balance {w.balance}")
    lines.append(f"credited so far: {w.credited}")
    obj.emit(doc, "\n".join(lines))


def _group_doc(g):
    return {"id": g.id, "product": g.product, "epoch": g.epoch, "persona": g.persona,
            "consumed": g.consumed, "labels": g.labels, "tokens": len(g.tokens)}


def _parse_claim(text):
    gid, sep, level = text.rpartition(":")
    if not sep or not level.isdigit():
        raise click.BadParameter(f"expected ID:LEVEL, got {text!r}")
    return gid, int(level)


@cli.command()
@click.option("--level", type=int, help="Generalization level for every --purchase.")
@click.option("--purchase", "purchases", multiple=True, help="Purchase id (default: all open).")
@click.option("--claim", "claims", multiple=True, help="ID:LEVEL, for mixed levels.")
@click.pass_obj
def submit(obj, level, purchases, claims):
    """Disclose purchases at a chosen level and collect loyalty points."""
    pairs = [_parse_claim(c) for c in claims]
    if level is not None:
        w_ids = purchases
        if not w_ids and not pairs:
            w_ids = [g.id for g in obj.load_wallet().open_purchases()]
        pairs += [(gid, level) for gid in w_ids]
    elif purchases:
        raise click.UsageError("--purchase needs --level")
    if not pairs:
        raise Failure("nothing to submit", EXIT_LOCAL)
    w = obj.load_wallet()
    try:
        rep = _guard(lambda: wallet_mod.submit(w, obj.remote(), pairs))
    finally:
        w.save(obj.wallet_path)
    doc = {"accepted": rep.accepted, "rejected": [{"id": i, "reason": r} for i, r in rep.rejected],
           "amount": rep.amount, "points": [p.denomination for p in rep.new_points],
           "balance": w.balance}
    text = [f"accepted {len(rep.accepted)} claim(s), awarded {rep.amount} points "
            f"as {[p.denomination for p in rep.new_points]}; balance {w.balance}"]
    text += [f"rejected {i}: {r}" for i, r in rep.rejected]
    obj.emit(doc, "\n".join(text))
    if rep.rejected:
        sys.exit(EXIT_REJECT)


@cli.command()
@click.option("--points", "amount", type=int, help="Redeem exactly this many points (default: all).")
@click.pass_obj
def redeem(obj, amount):
    """Redeem loyalty points, aggregating tokens that share public info."""
    w = obj.load_wallet()
    if amount is None:
        chosen = list(w.points)
    else:
        chosen = wallet_mod.select_points(w, amount)
        if chosen is None:
            raise Failure(f"cannot pay exactly {amount} points from {w.balance} held", EXIT_LOCAL)
    if not chosen:
        raise Failure("no points to redeem", EXIT_LOCAL)
    try:
        rep = _guard(lambda: wallet_mod.redeem(w, obj.remote(), chosen))
    finally:
        w.save(obj.wallet_path)
    doc = {"credited": rep.credited, "tokens": len(rep.redeemed),
           "rejected": [{"c": c, "reason": r} for c, r in rep.rejected], "balance": w.balance}
    text = [f"credited {rep.credited} points from {len(rep.redeemed)} token(s); balance {w.balance}"]
    text += [f"rejected {c}: {r}" for c, r in rep.rejected]
    obj.emit(doc, "\n".join(text))
    if rep.rejected:
        sys.exit(EXIT_REJECT)


@cli.command()
@click.pass_obj
def personas(obj):
    """List named link identifiers and how many purchases use each."""
    w = obj.load_wallet()
    counts = {name: sum(1 for g in w.purchases if g.persona == name) for name in w.personas}
    obj.emit({"personas": counts},
             "\n".join(f"{n}: {k} purchase(s)" for n, k in sorted(counts.items())) or "no personas")


# -- operator ------------------------------------------------------------------

@cli.command()
@click.option("--state-dir", required=True, type=click.Path(file_okay=False),
              help="Vendor key, config, taxonomy and ledger live here.")
@click.option("--taxonomy", "taxonomy_file", type=click.File("r"),
              help="Taxonomy document for a new vendor (default: bundled sample).")
@click.option("--vendor-id", default="vendor", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=7480, show_default=True, type=int, help="0 picks a free port.")
@click.option("--transcript", type=click.Path(dir_okay=False), help="Append every wire message here (NDJSON).")
@click.pass_obj
def serve(obj, state_dir, taxonomy_file, vendor_id, host, port, transcript):
    """Run the vendor daemon."""
    if os.path.exists(os.path.join(state_dir, "vendor.json")):
        if taxonomy_file is not None:
            raise Failure("state dir already initialised; --taxonomy only applies to new vendors", EXIT_LOCAL)
        vendor = Vendor.load(state_dir)
    else:
        doc = taxonomy_file.read() if taxonomy_file is not None else sample_taxonomy()
        try:
            vendor = vendor_mod.vendor_setup(crypto_core.setup(), doc, vendor_id=vendor_id)
        except ValueError as exc:
            raise Failure(f"cannot set up vendor: {exc}", EXIT_LOCAL) from exc
        vendor.save(state_dir)
        vendor.ledger.close()
        vendor = Vendor.load(state_dir)
    tr = Transcript(transcript) if transcript else None
    try:
        server = vendor_serve(vendor, host, port, tr)
    except OSError as exc:
        raise Failure(f"cannot listen on {host}:{port}: {exc}", EXIT_NETWORK) from exc
    h, p = server.address
    obj.emit({"listening": f"{h}:{p}", "vendor_id": vendor.vendor_id}, f"listening on {h}:{p}")
    sys.stdout.flush()
    signal.signal(signal.SIGTERM, lambda *_: sys.exit(0))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        vendor.ledger.close()
        if tr is not None:
            tr.close()


@cli.command()
@click.option("--samples", default=100, show_default=True, help="Timed calls per row (min 100).")
@click.option("--backend", type=click.Choice(["native", "python"]), help="Default: the active backend.")
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="Also write the JSON report here.")
@click.pass_obj
def bench(obj, samples, backend, seed, out):
    """Time curve primitives and check the protocol cost model."""
    from . import bench as bench_mod

    if samples < bench_mod.MIN_SAMPLES:
        raise click.BadParameter(f"need at least {bench_mod.MIN_SAMPLES}", param_hint="--samples")
    try:
        report = bench_mod.run_bench(samples=samples, seed=seed, backend=backend)
    except ImportError as exc:
        raise Failure(f"backend unavailable: {exc}", EXIT_LOCAL) from exc
    if out:
        with open(out, "w") as fh:
            fh.write(report.to_json())
    obj.emit(report.to_dict(), report.table())


def main(argv=None):
    return cli.main(args=argv, prog_name="pployalty")


if __name__ == "__main__":
    main()
