#!/usr/bin/env python3
"""Generate the golden crypto vectors checked by the C++ suite.

Uses python `cryptography` + hashlib as a reference implementation that is
fully independent of the libsodium-backed C++ code. The output file is
committed at tests/vectors/crypto_vectors.txt; rerun this script only to
regenerate it.

Line formats (hex fields, `-` for empty):
  sha256 <msg> <digest>
  ed25519 <seed32> <pub> <msg> <sig>
  x25519 <priv_a> <pub_a> <priv_b> <pub_b> <shared>
  chacha20poly1305 <key> <nonce> <ad> <plaintext> <ciphertext>
  hkdf <salt> <ikm> <info> <len> <okm>
"""
import hashlib
import sys

from cryptography.hazmat.primitives.asymmetric import ed25519, x25519
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives import hashes, serialization


def h(b: bytes) -> str:
    return b.hex() if b else "-"


def main() -> None:
    out = []

    for msg in [b"", b"abc", b"hello", bytes(range(64))]:
        out.append(f"sha256 {h(msg)} {hashlib.sha256(msg).hexdigest()}")

    # RFC 8032 style: seed is the 32-byte private key.
    ed_cases = [
        (bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"), b""),
        (bytes.fromhex("4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb"), bytes.fromhex("72")),
        (bytes.fromhex("c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7"), bytes.fromhex("af82")),
        (hashlib.sha256(b"sras signing vector").digest(), b"the quick brown fox"),
    ]
    for seed, msg in ed_cases:
        sk = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
        pub = sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        sig = sk.sign(msg)
        out.append(f"ed25519 {h(seed)} {h(pub)} {h(msg)} {h(sig)}")

    kx_cases = [
        (hashlib.sha256(b"kx a").digest(), hashlib.sha256(b"kx b").digest()),
        (hashlib.sha256(b"kx c").digest(), hashlib.sha256(b"kx d").digest()),
    ]
    for pa, pb in kx_cases:
        ka = x25519.X25519PrivateKey.from_private_bytes(pa)
        kb = x25519.X25519PrivateKey.from_private_bytes(pb)
        pub_a = ka.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        pub_b = kb.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        shared = ka.exchange(kb.public_key())
        out.append(f"x25519 {h(pa)} {h(pub_a)} {h(pb)} {h(pub_b)} {h(shared)}")

    aead_cases = [
        (hashlib.sha256(b"aead key 1").digest(), bytes(12), b"attested", b"hello world"),
        (hashlib.sha256(b"aead key 2").digest(), bytes.fromhex("000000000100000000000000"), b"", b""),
    ]
    for key, nonce, ad, pt in aead_cases:
        ct = ChaCha20Poly1305(key).encrypt(nonce, pt, ad if ad else None)
        out.append(f"chacha20poly1305 {h(key)} {h(nonce)} {h(ad)} {h(pt)} {h(ct)}")

    hkdf_cases = [
        (b"salt", b"input keying material", b"ctx", 32),
        (b"", b"\x0b" * 22, b"", 42),
    ]
    for salt, ikm, info, ln in hkdf_cases:
        okm = HKDF(algorithm=hashes.SHA256(), length=ln, salt=salt if salt else None,
                   info=info).derive(ikm)
        out.append(f"hkdf {h(salt)} {h(ikm)} {h(info)} {ln} {h(okm)}")

    text = "\n".join(out) + "\n"
    if len(sys.argv) > 1:
        with open(sys.argv[1], "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
