"""Canonical JSON for every object the command line touches.

Printing is deterministic: terms in the canonical monomial order,
operator indices sorted by total order then lexicographically, keys
emitted in a fixed sequence, and integers carried as decimal strings so
nothing is lost to a reader with small native integers.  parse(print(v))
returns an equal object, and printing again reproduces the same bytes.

Each schema is distinguishable by its key set, so loads() needs no type
tag; dumps()/loads() round-trip any supported object through one line
of text.
"""

import json
from fractions import Fraction

from .delta import CoordinateSystem, system_from_label
from .patchwork import PatchBundle
from .qconn import QConnection, Stratification
from .qdiff import DiffOp, order_key
from .ring import RingElt
from .sections import Section

__all__ = ["to_json", "from_json", "dumps", "loads", "detect_kind"]


def _ring_elt_json(v):
    terms = []
    for (te, xe, ee), c in v.sorted_terms():
        terms.append(
            {
                "t": te,
                "x": list(xe),
                "eps": list(ee),
                "num": str(c.numerator),
                "den": str(c.denominator),
            }
        )
    return {"N": v.N, "terms": terms}


def _ring_elt_parse(data, n=None, m=None):
    # The shape rides along in the exponent vectors; zero keeps whatever
    # the caller knows (equality ignores dangling empty slots anyway).
    terms = {}
    for row in data["terms"]:
        xe, ee = tuple(row["x"]), tuple(row["eps"])
        if n is None:
            n = len(xe)
        if m is None:
            m = len(ee)
        if len(xe) != n or len(ee) != m:
            raise ValueError("inconsistent monomial shapes")
        terms[(row["t"], xe, ee)] = Fraction(int(row["num"]), int(row["den"]))
    return RingElt(n or 0, m or 0, data["N"], terms)


def _system_json(psi):
    return {
        "p": psi.p,
        "n": psi.n,
        "phi": [f.to_str() for f in psi.phi],
        "label": psi.label,
    }


def _system_parse(data):
    p, n, label = data["p"], data["n"], data["label"]
    if label == "standard" or label.startswith("shift-"):
        psi = system_from_label(label, p, n)
    else:
        phi = [RingElt.from_str(s, n, 0, 1) for s in data["phi"]]
        psi = CoordinateSystem(p, n, phi, label=label)
    got = [f.to_str() for f in psi.phi]
    if got != list(data["phi"]):
        raise ValueError(f"frame {label!r} does not match its recorded lift")
    return psi


def _diffop_json(D):
    return {
        "N": D.N,
        "n": D.n,
        "terms": [{"K": list(K), "coeff": _ring_elt_json(c)} for K, c in D.sorted_terms()],
    }


def _diffop_parse(data):
    n, N = data["n"], data["N"]
    terms = {tuple(row["K"]): _ring_elt_parse(row["coeff"], n, 0) for row in data["terms"]}
    return DiffOp(n, N, terms)


def _section_json(s):
    return {
        "src": _system_json(s.src),
        "tgt": _system_json(s.tgt),
        "tau": [f.to_str() for f in s.tau],
        "op": _diffop_json(s.op),
    }


def _section_parse(data):
    src = _system_parse(data["src"])
    tgt = _system_parse(data["tgt"])
    op = _diffop_parse(data["op"])
    tau = [RingElt.from_str(s, src.n, 0, op.N) for s in data["tau"]]
    return Section(op, src, tgt, tau)


def _matrix_json(rows):
    return [[c.to_str() for c in row] for row in rows]


def _matrix_parse(rows, n, N):
    return [[RingElt.from_str(s, n, 0, N) for s in row] for row in rows]


def _connection_json(M):
    return {
        "rank": M.rank,
        "base": _system_json(M.psi),
        "N": M.N,
        "matrices": [_matrix_json(A) for A in M.matrices],
    }


def _connection_parse(data):
    psi = _system_parse(data["base"])
    N = data["N"]
    mats = [_matrix_parse(A, psi.n, N) for A in data["matrices"]]
    return QConnection(data["rank"], psi, N, mats)


def _stratification_json(E):
    rows = sorted(E.table, key=order_key)
    return {
        "rank": E.rank,
        "base": _system_json(E.psi),
        "N": E.N,
        "table": [{"I": list(I), "matrix": _matrix_json(E.table[I])} for I in rows],
    }


def _stratification_parse(data):
    psi = _system_parse(data["base"])
    N = data["N"]
    table = {
        tuple(row["I"]): _matrix_parse(row["matrix"], psi.n, N) for row in data["table"]
    }
    return Stratification(data["rank"], psi, N, table)


def _bundle_json(b):
    return {
        "label1": b.label1,
        "label2": b.label2,
        "N": b.N,
        "K": b.K,
        "locals": [{"p": p, "section": _section_json(s)} for p, s in b.locals],
        "glob": _section_json(b.glob),
    }


def _bundle_parse(data):
    locals = [(row["p"], _section_parse(row["section"])) for row in data["locals"]]
    glob = _section_parse(data["glob"])
    return PatchBundle(data["label1"], data["label2"], data["N"], data["K"], locals, glob)


_WRITERS = [
    (PatchBundle, _bundle_json),
    (Stratification, _stratification_json),
    (QConnection, _connection_json),
    (Section, _section_json),
    (DiffOp, _diffop_json),
    (CoordinateSystem, _system_json),
    (RingElt, _ring_elt_json),
]


def to_json(obj):
    for klass, writer in _WRITERS:
        if isinstance(obj, klass):
            return writer(obj)
    raise TypeError(f"no canonical form for {type(obj).__name__}")


def detect_kind(data):
    """Which schema a parsed JSON object follows; key sets never collide."""
    keys = set(data)
    if "locals" in keys:
        return "PatchBundle"
    if "table" in keys:
        return "Stratification"
    if "matrices" in keys:
        return "QConnection"
    if "op" in keys:
        return "Section"
    if "phi" in keys:
        return "CoordinateSystem"
    if "terms" in keys and "n" in keys:
        return "DiffOp"
    if "terms" in keys:
        return "RingElt"
    raise ValueError(f"unrecognized object with keys {sorted(keys)}")


_PARSERS = {
    "RingElt": _ring_elt_parse,
    "CoordinateSystem": _system_parse,
    "DiffOp": _diffop_parse,
    "Section": _section_parse,
    "QConnection": _connection_parse,
    "Stratification": _stratification_parse,
    "PatchBundle": _bundle_parse,
}


def from_json(data, kind=None):
    if kind is None:
        kind = detect_kind(data)
    if kind not in _PARSERS:
        raise ValueError(f"unknown kind {kind!r}")
    try:
        return _PARSERS[kind](data)
    except (KeyError, IndexError, TypeError) as e:
        raise ValueError(f"not a valid {kind} document ({type(e).__name__}: {e})") from None


def dumps(obj):
    return json.dumps(to_json(obj), separators=(",", ":"))


def loads(text, kind=None):
    return from_json(json.loads(text), kind)
