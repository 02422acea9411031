# Summary statistics over numeric samples.
import math
import statistics
from collections import Counter


def mean(xs):
    return sum(xs) / len(xs)


def stddev(xs):
    """Population standard deviation."""
    m = mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


def mode(xs):
    # ties resolve to the first value seen
    return Counter(xs).most_common(1)[0][0]


def median(xs):
    return statistics.median(xs)
