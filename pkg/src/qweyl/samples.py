"""Reproducible random objects for round-trip and identity suites.

Everything is driven by one Random instance so a fixed seed fixes the
whole stream; the seed comes from QWEYL_SEED (default 0) unless the
caller passes one.  Sizes stay small on purpose: the point is coverage
of the shapes, not stress.
"""

import os
import random
from fractions import Fraction

from .delta import system_from_label
from .patchwork import assemble
from .qconn import QConnection, Stratification
from .qdiff import DiffOp
from .ring import RingElt
from .sections import Section

__all__ = [
    "seed_from_env",
    "rng_from_env",
    "random_ring_elt",
    "random_system",
    "random_diffop",
    "random_section",
    "random_connection",
    "random_stratification",
    "random_bundle",
    "SAMPLERS",
]


def seed_from_env():
    return int(os.environ.get("QWEYL_SEED", "0"))


def rng_from_env():
    return random.Random(seed_from_env())


def _coeff(rng):
    num = rng.randint(-9, 9)
    den = rng.choice([1, 1, 2, 3, 4, 7])
    return Fraction(num, den)


def random_ring_elt(rng, n=None, m=None, N=None):
    n = rng.randint(1, 3) if n is None else n
    m = rng.randint(0, 2) if m is None else m
    N = rng.randint(1, 5) if N is None else N
    terms = {}
    for _ in range(rng.randint(0, 6)):
        te = rng.randrange(N)
        xe = tuple(rng.randint(0, 3) for _ in range(n))
        ee = tuple(rng.randint(0, 2) for _ in range(m))
        terms[(te, xe, ee)] = _coeff(rng)
    return RingElt(n, m, N, terms)


def random_system(rng, n=None):
    n = rng.randint(1, 2) if n is None else n
    p = rng.choice([3, 3, 5, 7])
    label = rng.choice(["standard", "shift-1", "shift-2", "shift--1", "shift-3"])
    return system_from_label(label, p, n)


def random_diffop(rng, n=None, N=None):
    n = rng.randint(1, 2) if n is None else n
    N = rng.randint(2, 5) if N is None else N
    terms = {}
    for _ in range(rng.randint(0, 4)):
        K = tuple(rng.randint(0, 3) for _ in range(n))
        terms[K] = random_ring_elt(rng, n, 0, N)
    return DiffOp(n, N, terms)


def _t_multiple(rng, n, N):
    v = random_ring_elt(rng, n, 0, N)
    return v - v.t_layer(0)


def random_section(rng):
    psi = random_system(rng)
    n, N = psi.n, rng.randint(2, 4)
    terms = {(0,) * n: RingElt.one(n, 0, N)}
    for _ in range(rng.randint(0, 3)):
        K = tuple(rng.randint(0, 2) for _ in range(n))
        if any(K):
            terms[K] = _t_multiple(rng, n, N)
    shift = rng.randint(-2, 2)
    tau = [RingElt.x(i, n, 0, N) + shift for i in range(n)]
    return Section(DiffOp(n, N, terms), psi, psi, tau)


def random_connection(rng):
    psi = random_system(rng)
    n, N = psi.n, rng.randint(2, 4)
    rank = rng.randint(1, 2)
    mats = [
        [[_t_multiple(rng, n, N) for _ in range(rank)] for _ in range(rank)]
        for _ in range(n)
    ]
    return QConnection(rank, psi, N, mats)


def random_stratification(rng):
    psi = random_system(rng)
    n, N = psi.n, rng.randint(2, 4)
    rank = rng.randint(1, 2)
    one = RingElt.one(n, 0, N)
    zero = RingElt.zero(n, 0, N)
    table = {(0,) * n: [[one if i == j else zero for j in range(rank)] for i in range(rank)]}
    for _ in range(rng.randint(0, 3)):
        I = tuple(rng.randint(0, 2) for _ in range(n))
        if any(I):
            table[I] = [[_t_multiple(rng, n, N) for _ in range(rank)] for _ in range(rank)]
    return Stratification(rank, psi, N, table)


_BUNDLE_CACHE = {}


def random_bundle(rng):
    # Assembly is deterministic, so distinct label pairs are the only
    # source of variety worth paying for; reuse anything already built.
    labels = ["standard", "shift-1", "shift-2", "shift--1"]
    key = (rng.choice(labels), rng.choice(labels))
    if key not in _BUNDLE_CACHE:
        _BUNDLE_CACHE[key] = assemble(key[0], key[1], 3, 3)
    return _BUNDLE_CACHE[key]


SAMPLERS = {
    "RingElt": random_ring_elt,
    "CoordinateSystem": random_system,
    "DiffOp": random_diffop,
    "Section": random_section,
    "QConnection": random_connection,
    "Stratification": random_stratification,
    "PatchBundle": random_bundle,
}
