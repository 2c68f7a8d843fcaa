"""Command-line front end.

Every command reads JSON, runs exact arithmetic, and writes a JSON-lines
report: zero or more data rows, then one summary object.  Output bytes
are a pure function of the inputs, so reports can be diffed or frozen.
Human-readable rendering is opt-in via --human; exit codes are 0 when
every requested check passed, 1 when one failed (or the math refused an
input, e.g. a divisibility gate), and 2 for configs or input documents
that never reached the math, with an error object on stderr either way.

Frames come from --coords, a JSON file {"src": ..., "tgt": ...} whose
entries are labels ("standard", "shift-1") or full frame documents; the
default pair is standard -> shift-1.  Commands that transform an object
read it from --in (stdin by default).
"""

import argparse
import json
import sys
from fractions import Fraction

from .checks import CheckContext, run_checks
from .delta import Thickening, gamma_basis, system_from_label
from .errors import InvalidConfig, PrimeTwoUnsupported, QweylError
from .patchwork import assemble, relevant_primes, verify_uniqueness
from .qconn import (
    QConnection,
    Stratification,
    cocycle_check,
    quasi_nilpotent,
    recover,
    stratify,
    transport,
)
from .qdiff import DiffOp, a_psi_member, compose, dual_basis, to_nabla_basis
from .ring import is_prime
from .sections import Section, canonical_section, compose_sections, conjugate, invert, qcrys_member
from .serialize import dumps, from_json, to_json

__all__ = ["JobConfig", "run", "main"]

COMMANDS = (
    "normalize",
    "gamma-basis",
    "dual-basis",
    "section",
    "invert",
    "conjugate",
    "stratify",
    "cocycle",
    "transport",
    "patch",
    "verify-suite",
)


class JobConfig:
    """One validated invocation: command, window parameters, and paths."""

    __slots__ = (
        "command",
        "p",
        "N",
        "K",
        "n",
        "coords",
        "convention",
        "invert_2",
        "in_path",
        "out_path",
        "human",
    )

    def __init__(
        self,
        command,
        p=3,
        N=3,
        K=4,
        n=1,
        coords=None,
        convention="stratification",
        invert_2=False,
        in_path="-",
        out_path="-",
        human=False,
    ):
        if command not in COMMANDS:
            raise InvalidConfig(f"unknown command {command!r}")
        if p == 2:
            raise PrimeTwoUnsupported("p = 2 is outside every construction here")
        if p != "global" and not (isinstance(p, int) and is_prime(p) and p % 2):
            raise InvalidConfig(f"p must be an odd prime or 'global', got {p!r}")
        if p == "global" and command != "normalize":
            raise InvalidConfig("p='global' only makes sense for normalize")
        if not (isinstance(N, int) and 1 <= N <= 16):
            raise InvalidConfig(f"N must lie in 1..16, got {N!r}")
        if not (isinstance(K, int) and 0 <= K <= 12):
            raise InvalidConfig(f"K must lie in 0..12, got {K!r}")
        if not (isinstance(n, int) and 1 <= n <= 8):
            raise InvalidConfig(f"n must lie in 1..8, got {n!r}")
        if convention not in ("retraction", "stratification"):
            raise InvalidConfig(f"unknown convention {convention!r}")
        self.command = command
        self.p = p
        self.N = N
        self.K = K
        self.n = n
        self.coords = coords
        self.convention = convention
        self.invert_2 = invert_2
        self.in_path = in_path
        self.out_path = out_path
        self.human = human

    def base_prime(self):
        return 3 if self.p == "global" else self.p

    def frames(self):
        """The (src, tgt) pair from --coords, defaulting to standard -> shift-1."""
        doc = {}
        if self.coords:
            with open(self.coords) as fh:
                doc = json.load(fh)
        out = []
        for slot, fallback in (("src", "standard"), ("tgt", "shift-1")):
            entry = doc.get(slot, fallback)
            if isinstance(entry, str):
                psi = system_from_label(entry, self.base_prime(), self.n)
            else:
                psi = from_json(entry, "CoordinateSystem")
                if self.p != "global" and psi.p != self.p:
                    raise InvalidConfig(
                        f"{slot} frame is bound to p={psi.p}, config says p={self.p}"
                    )
                if psi.n != self.n:
                    raise InvalidConfig(f"{slot} frame has n={psi.n}, config says n={self.n}")
            out.append(psi)
        variant = doc.get("variant", "modified")
        if variant not in ("modified", "generic"):
            raise InvalidConfig(f"unknown section variant {variant!r}")
        return out[0], out[1], variant


# keys under which command reports carry a reusable document
_PAYLOAD_KEYS = ("section", "operator", "connection", "stratification", "bundle", "normal_form")


def _extract_payload(rows):
    for row in rows:
        if not isinstance(row, dict):
            continue
        body = row.get("summary", row)
        for key in _PAYLOAD_KEYS:
            if isinstance(body, dict) and isinstance(body.get(key), dict):
                return body[key]
    raise InvalidConfig("report contains no document payload")


def _read_document(cfg):
    if cfg.in_path == "-":
        text = sys.stdin.read()
    else:
        with open(cfg.in_path) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    else:
        if isinstance(doc, dict) and "summary" in doc:
            return _extract_payload([doc])
        return doc
    # not a single document: accept a report from another command and pull
    # out the first embedded document, so --out files chain into --in
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"input is neither a document nor a report: {e}") from None
    return _extract_payload(rows)


def _membership_mode(cfg):
    if cfg.p == "global":
        return "global", ((2,) if cfg.invert_2 else ())
    return cfg.p, None


# -- command bodies: each returns (rows, summary_fields, ok) -----------------


def _cmd_normalize(cfg):
    D = from_json(_read_document(cfg), "DiffOp")
    src, _, _ = cfg.frames()
    if D.n != src.n:
        raise InvalidConfig(f"operator has n={D.n}, frames have n={src.n}")
    coeffs = to_nabla_basis(D, src)
    rows = [
        {"K": list(K), "coeff": to_json(coeffs[K])}
        for K in sorted(coeffs, key=lambda K: (sum(K), K))
    ]
    mode, allowed = _membership_mode(cfg)
    member = (
        a_psi_member(D, src, mode, allowed) if allowed is not None else a_psi_member(D, src, mode)
    )
    fields = {"member": member, "mode": str(mode), "normal_form": to_json(D)}
    return rows, fields, member


def _cmd_gamma_basis(cfg):
    src, tgt, variant = cfg.frames()
    th = Thickening(src, tgt, convention=cfg.convention)
    basis = gamma_basis(th, cfg.N, cfg.K, variant=variant)
    rows = [
        {
            "I": list(I),
            "scalar": basis.scalar(I).to_str(),
            "body": to_json(basis[I].body),
        }
        for I in basis.indices()
    ]
    return rows, {"variant": variant, "indices": len(rows)}, True


def _cmd_dual_basis(cfg):
    src, _, _ = cfg.frames()
    duals = dual_basis(src, cfg.N, cfg.K)
    rows = [
        {"I": list(I), "body": to_json(duals[I].body)}
        for I in sorted(duals, key=lambda I: (sum(I), I))
    ]
    return rows, {"indices": len(rows)}, True


def _cmd_section(cfg):
    src, tgt, variant = cfg.frames()
    s = canonical_section(src, tgt, None, cfg.p, cfg.N, cfg.K, variant=variant)
    member = qcrys_member(s, cfg.p)
    rows = [{"section": to_json(s)}]
    return rows, {"variant": variant, "member": member}, member


def _cmd_invert(cfg):
    s = from_json(_read_document(cfg), "Section")
    inv = invert(s)
    ident = DiffOp.identity(s.src.n, s.op.N)
    two_sided = (
        compose_sections(inv, s).op == ident and compose_sections(s, inv).op == ident
    )
    rows = [{"section": to_json(inv)}]
    return rows, {"two_sided": two_sided}, two_sided


def _cmd_conjugate(cfg):
    doc = _read_document(cfg)
    if not isinstance(doc, dict) or "section" not in doc or "operator" not in doc:
        raise InvalidConfig('conjugate expects {"section": ..., "operator": ...}')
    s = from_json(doc["section"], "Section")
    zeta = from_json(doc["operator"], "DiffOp")
    moved = conjugate(s, zeta)
    member = a_psi_member(moved, s.tgt, cfg.p) if cfg.p != "global" else None
    rows = [{"operator": to_json(moved)}]
    return rows, {"member": member}, True


def _cmd_stratify(cfg):
    M = from_json(_read_document(cfg), "QConnection")
    E = stratify(M)
    rows = [
        {"mode": mode, "quasi_nilpotent": quasi_nilpotent(M, mode=mode)}
        for mode in ("strict", "p-adic")
    ]
    roundtrip = recover(E) == M
    rows.append({"roundtrip": roundtrip})
    rows.append({"stratification": to_json(E)})
    return rows, {"indices": len(E.table), "roundtrip": roundtrip}, roundtrip


def _cmd_cocycle(cfg):
    E = from_json(_read_document(cfg), "Stratification")
    ok = cocycle_check(E)
    return [], {"cocycle": ok}, ok


def _cmd_transport(cfg):
    doc = _read_document(cfg)
    if not isinstance(doc, dict) or "section" not in doc or "connection" not in doc:
        raise InvalidConfig('transport expects {"section": ..., "connection": ...}')
    s = from_json(doc["section"], "Section")
    M = from_json(doc["connection"], "QConnection")
    out = transport(s, M)
    rows = [{"connection": to_json(out)}]
    return rows, {"rank": out.rank}, True


def _cmd_patch(cfg):
    src, tgt, _ = cfg.frames()
    b = assemble(src.label, tgt.label, cfg.N, cfg.K, n=cfg.n)
    probes = verify_uniqueness(b, DiffOp.identity(cfg.n, cfg.N))
    rows = [
        {"primes": relevant_primes(cfg.N)},
        {"identity_probe": probes},
        {"bundle": to_json(b)},
    ]
    return rows, {"primes": relevant_primes(cfg.N), "identity_probe": probes}, probes


def _cmd_verify_suite(cfg):
    ctx = CheckContext(cfg.p, cfg.N, cfg.K, cfg.n, cfg.convention)
    rows = sorted(run_checks(ctx), key=lambda r: r["check"])
    ok = all(r["ok"] for r in rows)
    passed = sum(r["ok"] for r in rows)
    return rows, {"passed": passed, "failed": len(rows) - passed}, ok


_BODIES = {
    "normalize": _cmd_normalize,
    "gamma-basis": _cmd_gamma_basis,
    "dual-basis": _cmd_dual_basis,
    "section": _cmd_section,
    "invert": _cmd_invert,
    "conjugate": _cmd_conjugate,
    "stratify": _cmd_stratify,
    "cocycle": _cmd_cocycle,
    "transport": _cmd_transport,
    "patch": _cmd_patch,
    "verify-suite": _cmd_verify_suite,
}


def _render(rows, summary, human):
    if not human:
        lines = [json.dumps(r, separators=(",", ":")) for r in rows]
        lines.append(json.dumps({"summary": summary}, separators=(",", ":")))
        return "\n".join(lines) + "\n"
    lines = []
    for r in rows:
        if set(r) == {"check", "ok", "detail"}:
            mark = "PASS" if r["ok"] else "FAIL"
            lines.append(f"{mark}  {r['check']}: {r['detail']}")
        else:
            lines.append(json.dumps(r, separators=(", ", ": ")))
    status = "ok" if summary["ok"] else "FAILED"
    rest = ", ".join(f"{k}={v}" for k, v in summary.items() if k != "ok")
    lines.append(f"{status} ({rest})")
    return "\n".join(lines) + "\n"


def run(cfg):
    """Execute one job; returns the exit status and writes the report."""
    rows, fields, ok = _BODIES[cfg.command](cfg)
    summary = {"command": cfg.command, "ok": bool(ok)}
    summary.update(fields)
    text = _render(rows, summary, cfg.human)
    if cfg.out_path == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out_path, "w") as fh:
            fh.write(text)
    return 0 if ok else 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("InvalidConfig", message)
        raise SystemExit(2)


def _emit_error(kind, detail):
    sys.stderr.write(json.dumps({"error": kind, "detail": str(detail)}) + "\n")


def _parse_p(text):
    return text if text == "global" else int(text)


def build_parser():
    parser = _Parser(prog="qweyl", description="exact q-deformed differential operators")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--p", type=_parse_p, default=3, help="odd prime, or 'global'")
        cmd.add_argument("--N", type=int, default=3, help="t-adic truncation order")
        cmd.add_argument("--K", type=int, default=4, help="operator window")
        cmd.add_argument("--n", type=int, default=1, help="number of coordinates")
        cmd.add_argument("--coords", default=None, help="path to a frame-pair JSON")
        cmd.add_argument(
            "--convention",
            choices=["retraction", "stratification"],
            default="stratification",
        )
        cmd.add_argument("--invert-2", action="store_true", dest="invert_2")
        cmd.add_argument("--in", dest="in_path", default="-", help="input document")
        cmd.add_argument("--out", dest="out_path", default="-", help="report path")
        cmd.add_argument("--json", action="store_true", help="JSON-lines report (default)")
        cmd.add_argument("--human", action="store_true", help="render for reading")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        cfg = JobConfig(
            ns.command,
            p=ns.p,
            N=ns.N,
            K=ns.K,
            n=ns.n,
            coords=ns.coords,
            convention=ns.convention,
            invert_2=ns.invert_2,
            in_path=ns.in_path,
            out_path=ns.out_path,
            human=ns.human and not ns.json,
        )
    except QweylError as e:
        _emit_error(type(e).__name__, e)
        return 2
    try:
        return run(cfg)
    except (InvalidConfig, FileNotFoundError, ValueError, KeyError) as e:
        _emit_error(type(e).__name__, e)
        return 2
    except QweylError as e:
        _emit_error(type(e).__name__, e)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
