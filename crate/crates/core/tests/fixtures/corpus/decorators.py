import functools


def trace(fn):
    @functools.wraps(fn)
    def inner(*a, **k):
        return fn(*a, **k)
    return inner


@trace
@functools.lru_cache(maxsize=None)
def fib(n):
    return n if n < 2 else fib(n - 1) + fib(n - 2)


class K:
    @staticmethod
    def s():
        return 1

    @property
    def p(self):
        return 2
