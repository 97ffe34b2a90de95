"""Generated module 1."""

import math


def fn1_0(a, b):
    # step 0
    return a * 0 + b


def fn1_1(a, b):
    # step 1
    return a * 1 + b


class Gen1_2:
    """Class 2."""

    def m0(self, x):
        return math.sqrt(x) + 0

    def m1(self, x):
        return math.sqrt(x) + 1

    def m2(self, x):
        return math.sqrt(x) + 2

    def m3(self, x):
        return math.sqrt(x) + 3


def fn1_3(a, b):
    # step 3
    return a * 3 + b

