"""Hand Pearson correlation over the published per-million-block average times."""
import math

series = {
    "SLOAD": [5738, 8367, 8254, 18893, 37951, 51847, 68499, 82265],
    "SSTORE": [3751, 5844, 7025, 9646, 8130, 11512, 18952, 21480],
    "PUSH1": [85.4, 79.2, 92.2, 94.3, 85.9, 79.6, 80.7, 78.2],
    "MSTORE": [158.5, 107.5, 224.1, 214.4, 175.6, 157.7, 149.0, 153.9],
}


def pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


for name, ys in series.items():
    print(name, repr(pearson(list(range(8)), ys)))
