#!/usr/bin/env python3
"""Minimal external target for harness tests.

Reads input from argv[1] (or stdin), folds byte pairs into a 65536-cell edge
map, and writes it to GRAMFUZZ_COV_FILE.  Inputs starting with CRASH kill the
process with SIGSEGV; inputs starting with SPIN loop forever.
"""

import os
import signal
import sys


def main():
    if len(sys.argv) > 1:
        with open(sys.argv[1], "rb") as f:
            data = f.read()
    else:
        data = sys.stdin.buffer.read()

    cov = bytearray(65536)
    prev = 0
    for b in data:
        e = (b ^ (prev >> 1)) % 65536
        if cov[e] < 255:
            cov[e] += 1
        prev = b

    path = os.environ.get("GRAMFUZZ_COV_FILE")
    if path:
        with open(path, "wb") as f:
            f.write(bytes(cov))

    if data.startswith(b"CRASH"):
        os.kill(os.getpid(), signal.SIGSEGV)
    if data.startswith(b"SPIN"):
        while True:
            pass


main()
