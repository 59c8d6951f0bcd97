"""Seeded random generators shared by the fuzz and acceptance tests."""

from __future__ import annotations

import random
import string

from servnet.model import Handle
from servnet.wire import CallEnvelope, ParamEncoding, encode_param, new_message_id

NAME_ALPHABET = string.ascii_letters + string.digits + "_-. ~:@"
TEXT_ALPHABET = NAME_ALPHABET + "äöüßéλ中文🙂\"'&\t\n"


def random_name(rng: random.Random, max_len: int = 12) -> str:
    return "".join(rng.choice(NAME_ALPHABET) for _ in range(rng.randint(1, max_len)))


def random_text(rng: random.Random, max_len: int = 20) -> str:
    return "".join(rng.choice(TEXT_ALPHABET) for _ in range(rng.randint(0, max_len)))


def random_handle(rng: random.Random, max_depth: int = 5) -> Handle:
    host = ".".join(str(rng.randint(0, 999)) for _ in range(4))
    port = rng.randint(1, 65535)
    scheme = rng.choice(("http", "https"))
    path = tuple(random_name(rng) for _ in range(rng.randint(1, max_depth)))
    return Handle(f"{scheme}://{host}:{port}", path)


def random_value(rng: random.Random, depth: int = 0):
    kinds = ["int", "float", "bool", "str", "none"]
    if depth < 3:
        kinds += ["list", "map", "list", "map"]
    kind = rng.choice(kinds)
    if kind == "int":
        return rng.randint(-(10 ** 12), 10 ** 12)
    if kind == "float":
        return rng.choice([
            rng.uniform(-1e6, 1e6), 0.0, -0.0, 1.5e-300, float(rng.randint(-5, 5)),
        ])
    if kind == "bool":
        return rng.random() < 0.5
    if kind == "str":
        return random_text(rng)
    if kind == "none":
        return None
    if kind == "list":
        return [random_value(rng, depth + 1) for _ in range(rng.randint(0, 4))]
    keys = {random_text(rng, 8) for _ in range(rng.randint(0, 4))}
    return {k: random_value(rng, depth + 1) for k in keys}


def random_param(rng: random.Random):
    if rng.random() < 0.2:
        blob = rng.randbytes(rng.randint(0, 64))
        return encode_param(blob, ParamEncoding.OPAQUE)
    return encode_param(random_value(rng))


def random_envelope(rng: random.Random) -> CallEnvelope:
    return CallEnvelope(
        message_id=new_message_id(),
        target=random_handle(rng),
        method=random_name(rng),
        params=tuple(random_param(rng) for _ in range(rng.randint(0, 4))),
        credential=random_text(rng) if rng.random() < 0.5 else None,
        reply_to=random_handle(rng) if rng.random() < 0.3 else None,
    )
