"""Command-line interface.

Exit codes: 0 pass/valid, 2 fail/invalid, 1 operational error.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from mlcert.certificate import (
    load_public_key,
    load_signing_key,
    public_key_hex,
    signing_key_from_seed,
    verify_certificate,
    write_certificate,
    write_keypair,
)
from mlcert.config import parse_certification_model
from mlcert.core import FactorOutcome, MergeRule
from mlcert.engine import DEFAULT_ISSUER, CertificationRun, certify, reference_config_text
from mlcert.errors import CertError
from mlcert.scenario import SCENARIOS, build_scenario, demo_key_seed
from mlcert.util import fixed_clock, parse_timestamp, system_clock, write_bytes

log = logging.getLogger("mlcert")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

_MARK = {"pass": "✓", "fail": "✗"}


class _Failure(Exception):
    """Operational error already phrased for the user."""


def _clock(timestamp: str | None):
    if timestamp is None:
        return system_clock
    try:
        return fixed_clock(parse_timestamp(timestamp))
    except ValueError as exc:
        raise click.BadParameter(f"not an RFC 3339 timestamp: {timestamp}", param_hint="--timestamp") from exc


def _read_config(path: str | None) -> str:
    if path is None:
        return reference_config_text()
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _Failure(f"cannot read config {path}: {exc}") from exc


def _evidence_cell(outcome: FactorOutcome) -> str:
    ev = {r.name: r.value for r in outcome.evidence}
    if "flagged_count" in ev:
        return f"flagged samples: {ev['flagged_count']} ({ev['flagged_fraction']:.3f})"
    if "techniques" in ev:
        techniques = ", ".join(ev["techniques"]) or "none"
        return f"techniques: {techniques}; checkpoints {ev.get('checkpoint_integrity')}"
    if "recall" in ev:
        return f"adversarial recall: {ev['recall']:.3f} ({ev.get('attack')}, eps={ev.get('epsilon')}, n={ev.get('n_samples')})"
    return f"{len(outcome.evidence)} records"


def summary_table(run: CertificationRun) -> str:
    rows = [("factor", "property", "evidence", "outcome")]
    for o in run.outcomes:
        name = o.spec.name if o.spec is not None else "-"
        rows.append((o.factor.value, name, _evidence_cell(o), _MARK[o.verdict.value]))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if run.merge_rule is MergeRule.ALL_PASS:
        lines.append(f"overall ({run.merge_rule.value}): {run.merged.value}")
    else:
        lines.append(f"per-factor certificates: {', '.join(f'{k.value}={v.value}' for k, v in run.merged.items())}")
    return "\n".join(lines)


def _certificate_paths(out: Path, run: CertificationRun) -> list[Path]:
    if len(run.certificates) == 1:
        return [out]
    return [out.with_name(f"{out.stem}.{o.factor.value}{out.suffix or '.json'}") for o in run.outcomes]


def _run_certify(config_text: str, target_dir: Path, out: Path, signing_key, seed: int,
                 clock, issuer: str) -> int:
    cert_model = parse_certification_model(config_text, default_seed=seed)
    if not target_dir.is_dir():
        raise _Failure(f"target directory {target_dir} does not exist")
    run = certify(cert_model, target_dir, signing_key, issuer=issuer, clock=clock)
    for cert, path in zip(run.certificates, _certificate_paths(out, run)):
        write_certificate(cert, path)
        click.echo(f"certificate written to {path}")
    click.echo(summary_table(run))
    return EXIT_OK if run.passed else EXIT_FAIL


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to standard error.")
def cli(verbose: bool) -> None:
    """Multi-factor certification of ML-based applications."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command("certify")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="Certification model (TOML). Defaults to the bundled reference model.")
@click.option("--target-dir", required=True, type=click.Path(file_okay=False),
              help="Directory holding dataset.csv, manifest.json, checkpoints/ and model.json.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Where to write the certificate.")
@click.option("--key", "key_path", required=True, type=click.Path(dir_okay=False),
              help="Hex-encoded Ed25519 signing seed (.hex).")
@click.option("--seed", default=42, show_default=True, type=click.IntRange(min=0),
              help="Seed for evidence sections that do not set one.")
@click.option("--timestamp", default=None, help="Fixed RFC 3339 issuance time.")
@click.option("--issuer", default=DEFAULT_ISSUER, show_default=True)
def cmd_certify(config_path, target_dir, out_path, key_path, seed, timestamp, issuer) -> int:
    """Assess a target on all three factors and issue a signed certificate."""
    clock = _clock(timestamp)
    key = load_signing_key(key_path)
    return _run_certify(_read_config(config_path), Path(target_dir), Path(out_path), key, seed, clock, issuer)


@cli.command("verify")
@click.argument("cert_path", type=click.Path(dir_okay=False))
@click.option("--pubkey", "pubkey_path", required=True, type=click.Path(dir_okay=False),
              help="Hex-encoded Ed25519 public key (.hex).")
def cmd_verify(cert_path, pubkey_path) -> int:
    """Check a certificate's payload digest and signature."""
    public_key = load_public_key(pubkey_path)
    try:
        data = Path(cert_path).read_bytes()
    except OSError as exc:
        raise _Failure(f"cannot read certificate {cert_path}: {exc}") from exc
    result = verify_certificate(data, public_key)
    click.echo(f"{'valid' if result.valid else 'invalid'}: {result.reason}")
    return EXIT_OK if result.valid else EXIT_FAIL


@cli.command("demo")
@click.option("--scenario", type=click.Choice(SCENARIOS), default="baseline", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              help="Output directory. Defaults to ./mlcert-demo-<scenario>.")
@click.option("--seed", default=42, show_default=True, type=click.IntRange(min=0))
@click.option("--timestamp", default=None, help="Fixed RFC 3339 issuance time.")
@click.option("--key", "key_path", type=click.Path(dir_okay=False),
              help="Signing key. Without it a demo key is derived from --seed.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="Certification model. Defaults to the bundled reference model.")
def cmd_demo(scenario, out_dir, seed, timestamp, key_path, config_path) -> int:
    """Build a demo target from scratch and certify it."""
    clock = _clock(timestamp)
    out = Path(out_dir or f"mlcert-demo-{scenario}")
    config_text = _read_config(config_path)
    keys = out / "keys"
    if key_path is None:
        key = write_keypair(demo_key_seed(seed), keys / "issuer.key.hex", keys / "issuer.pub.hex")
    else:
        key = load_signing_key(key_path)
        write_bytes(keys / "issuer.pub.hex", public_key_hex(key).encode("ascii") + b"\n")

    log.info("building %s scenario in %s", scenario, out)
    built = build_scenario(scenario, out, seed)
    click.echo(f"{scenario} target built in {built.target_dir}")
    return _run_certify(config_text, built.target_dir, out / "cert.json", key, seed, clock, DEFAULT_ISSUER)


@cli.command("keygen")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for issuer.key.hex and issuer.pub.hex.")
@click.option("--name", default="issuer", show_default=True, help="File name stem.")
def cmd_keygen(out_dir, name) -> int:
    """Generate a fresh Ed25519 issuer key pair."""
    out = Path(out_dir)
    key = write_keypair(os.urandom(32), out / f"{name}.key.hex", out / f"{name}.pub.hex")
    click.echo(f"public key {public_key_hex(key)} written to {out / f'{name}.pub.hex'}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="mlcert", standalone_mode=False)
    except click.exceptions.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_ERROR
    except (_Failure, CertError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    return rv if isinstance(rv, int) else EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
