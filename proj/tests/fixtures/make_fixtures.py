#!/usr/bin/env python3
"""Writes the byte-level fixtures read by the C++ tests.

Everything here is computed independently of the C++ code: the binary
layouts are packed with struct (little-endian) and the TF-IDF reference
vectors come from a direct Python implementation.

    python3 tests/fixtures/make_fixtures.py
"""

import json
import math
import struct
from collections import Counter
from pathlib import Path

HERE = Path(__file__).resolve().parent


def lp_str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def write_embeddings():
    dim = 3
    rows = [
        ("d/c0/0", [0.1, -2.5, 3.0e-7]),
        ("d/c0/1", [1.0, 0.0, -0.0]),
        ("d/c1/0", [65504.0, -1.0e-3, 0.333333]),
        ("café/€/2", [-7.25, 8.5, 1.0]),
    ]
    out = b"RPEMB1" + struct.pack("<B", 1) + struct.pack("<I", dim) + struct.pack("<Q", len(rows))
    for ident, vec in rows:
        out += lp_str(ident) + struct.pack("<%df" % dim, *vec)
    (HERE / "embeddings_small.rpemb").write_bytes(out)


def write_model():
    out = b"RPMOD1" + struct.pack("<B", 1)
    labels = ["F", "M"]
    out += struct.pack("<I", len(labels)) + b"".join(lp_str(l) for l in labels)
    weights = [0.5, -1.25, 3.0e-7]
    out += struct.pack("<B", 1)  # dense feature space
    out += struct.pack("<Q", len(weights)) + lp_str("encoder-x")
    out += struct.pack("<%dd" % len(weights), *weights)
    out += struct.pack("<d", -0.125)  # bias
    out += struct.pack("<Q", 7) + struct.pack("<I", 3) + struct.pack("<I", 32)
    out += struct.pack("<d", 2e-5) + struct.pack("<d", 0.0)
    out += struct.pack("<B", 0)  # sgd
    out += lp_str("abc")
    (HERE / "model_small.rpmod").write_bytes(out)


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def ascii_lower(s):
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in s)


def ngram_keys(text, word=(1, 2), char=(3, 5), lowercase=True):
    s = ascii_lower(text) if lowercase else text
    keys = []
    words = s.split()
    for n in range(word[0], word[1] + 1):
        for i in range(len(words) - n + 1):
            keys.append("w:" + " ".join(words[i:i + n]))
    for n in range(char[0], char[1] + 1):
        for i in range(len(s) - n + 1):
            keys.append("c:" + s[i:i + n])
    return keys


def write_tfidf_reference():
    dims = 1024
    docs = [
        "The cat sat on the mat",
        "the dog sat",
        "Café au lait, s'il vous plaît",
        "a",
    ]
    queries = docs + ["the cat and the unseen zebra", ""]
    df = Counter()
    for d in docs:
        df.update({fnv1a64(k.encode("utf-8")) % dims for k in ngram_keys(d)})
    n = len(docs)
    idf = {i: math.log((1 + n) / (1 + c)) + 1 for i, c in df.items()}
    vectors = []
    for q in queries:
        counts = Counter(fnv1a64(k.encode("utf-8")) % dims for k in ngram_keys(q))
        weighted = {i: c * idf.get(i, 1.0) for i, c in counts.items()}
        norm = math.sqrt(sum(v * v for v in weighted.values()))
        vectors.append([[i, weighted[i] / norm] for i in sorted(weighted)] if norm else [])
    ref = {
        "hash_dims": dims,
        "documents": docs,
        "idf": [[i, idf[i]] for i in sorted(idf)],
        "queries": queries,
        "vectors": vectors,
    }
    (HERE / "tfidf_reference.json").write_text(json.dumps(ref, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


if __name__ == "__main__":
    write_embeddings()
    write_model()
    write_tfidf_reference()
