"""Close the rank-1 (conformal Killing vector) system on a curved manifold,
print the rules and compare the jet count with the flat polynomial kernel."""

from ckt_prolong import flatpoly
from ckt_prolong.prolong import close_system, prolongation_dimension, prolongation_dimension_symbolic

js = close_system(1, "curved")
print(js.to_text())
print()
print("dimension:", prolongation_dimension_symbolic(js).short())
for n in (3, 4, 5):
    print("n = %d: jets %d, polynomial kernel %d"
          % (n, prolongation_dimension(js, n), flatpoly.kernel(1, n).dimension))
