"""The coreference metric suite on a worked example.

key:      {1,2,3} {4,5}
response: {1,2} {3,4,5}

MUC counts link breaks, B3 averages per-mention overlaps, CEAF_e
aligns clusters one-to-one (Hungarian assignment over phi4), and BLANC
averages the F1 over coreferent pairs with the F1 over non-coreferent
pairs.  CoNLL and AVG are the 3- and 4-way F1 means.
"""

from evcoref.metrics import (
    b_cubed,
    blanc,
    ceaf_e,
    document_report,
    format_report,
    hungarian,
    muc,
    phi4,
)

key = [[1, 2, 3], [4, 5]]
response = [[1, 2], [3, 4, 5]]

print("key:     ", key)
print("response:", response)
print()
for name, metric in (("MUC", muc), ("B3", b_cubed), ("CEAF_e", ceaf_e), ("BLANC", blanc)):
    triple = metric(key, response)
    print(f"{name:7s} P={triple.precision:.4f} R={triple.recall:.4f} F1={triple.f1:.4f}")

print()
print("phi4 similarity matrix and its optimal alignment:")
sim = [[phi4(kc, rc) for rc in response] for kc in key]
for row in sim:
    print("  ", [round(v, 3) for v in row])
print("hungarian total:", hungarian(sim))

print()
print(format_report(document_report(key, response)))

print()
print("degenerate conventions:")
singles = [[1], [2], [3]]
print("  all singletons, MUC  :", muc(singles, singles))
print("  all singletons, BLANC:", blanc(singles, singles))
