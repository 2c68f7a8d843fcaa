"""Changing the Frobenius lift: sections, conjugation, and transport.

Two lifts of Frobenius disagree at order p, and the gap is measured by a
delta-value on the nilpotent e adjoined between them.  A section of the
two-lift thickening repairs the gap; conjugating by it carries operators
(and whole connections) from one lift's algebra into the other's.
"""

from qweyl import (
    DiffOp,
    QConnection,
    RingElt,
    Thickening,
    canonical_section,
    cocycle_check,
    compose_sections,
    conjugate,
    delta_on_epsilon,
    gamma_basis,
    invert,
    nabla,
    qcrys_member,
    recover,
    shift_system,
    standard_system,
    stratify,
    transport,
)

p, N = 3, 3
std = standard_system(p)
sh1 = shift_system(p, 1)
print("== two lifts of Frobenius on Z[x]")
print("  standard:", std.phi[0].to_str(), "   shift-1:", sh1.phi[0].to_str())

print("\n== delta on the connecting nilpotent, both conventions")
[d_r] = delta_on_epsilon(std, std, convention="retraction", N=N)
[d_s] = delta_on_epsilon(std, std, convention="stratification", N=N)
print("  retraction:    ", d_r.to_str())
print("  stratification:", d_s.to_str())

print("\n== the modified divided-power basis comes with clearing scalars")
th = Thickening(std, sh1)
basis = gamma_basis(th, N, 3, variant="modified")
for I in basis.indices():
    print(f"  n_{I[0]} =", basis.scalar(I).to_str())

print("\n== the canonical section between the two lifts")
s = canonical_section(std, sh1, None, p, N, p)
print("  s =", s.op)
print("  integral at p:", qcrys_member(s, p))
back = invert(s)
print("  s^-1 composes to the trivial section:",
      compose_sections(back, s).op == DiffOp.identity(1, N))

print("\n== conjugation moves nabla between the two operator algebras")
moved = conjugate(s, nabla(std, 0, N))
print("  s nabla s^-1 =", moved)

print("\n== transport of a q-connection along the section")
t, x = RingElt.t(1, 0, N), RingElt.x(0, 1, 0, N)
M = QConnection(1, sh1, N, [[[t * x]]])
Mstd = transport(s, M)
print("  matrix over shift-1: ", M.matrices[0][0][0].to_str())
print("  matrix over standard:", Mstd.matrices[0][0][0].to_str())

print("\n== the transported connection still stratifies consistently")
E = stratify(Mstd)
print("  cocycle holds:", cocycle_check(E), "  round-trip exact:", recover(E) == Mstd)
