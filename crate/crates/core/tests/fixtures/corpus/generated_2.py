"""Generated module 2."""

import math


def fn2_0(a, b):
    # step 0
    return a * 0 + b


def fn2_1(a, b):
    # step 1
    return a * 1 + b


class Gen2_2:
    """Class 2."""

    def m0(self, x):
        return math.sqrt(x) + 0

    def m1(self, x):
        return math.sqrt(x) + 1


def fn2_3(a, b):
    # step 3
    return a * 3 + b


class Gen2_4:
    """Class 4."""

    def m0(self, x):
        return math.sqrt(x) + 0

    def m1(self, x):
        return math.sqrt(x) + 1

    def m2(self, x):
        return math.sqrt(x) + 2

    def m3(self, x):
        return math.sqrt(x) + 3


class Gen2_5:
    """Class 5."""

    def m0(self, x):
        return math.sqrt(x) + 0

