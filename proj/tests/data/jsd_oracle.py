"""Reference JSD values (base 2) from scipy, pasted into test_jsd.cpp."""
from scipy.spatial.distance import jensenshannon

cases = [
    ([1, 0], [0, 1]),
    ([1, 0], [0.5, 0.5]),
    ([3, 1, 0, 6], [1, 1, 1, 1]),
    ([10, 20, 30, 0, 5], [0, 25, 25, 10, 5]),
    ([1, 2, 3, 4, 5, 6, 7, 8], [8, 7, 6, 5, 4, 3, 2, 1]),
]
for p, q in cases:
    print(p, q, "%.12f" % (jensenshannon(p, q, base=2) ** 2))
