"""Module doc."""
import os


class Base:
    pass


class Shape(Base):
    """A shape."""

    def __init__(self, size):
        self.size = size

    def area(self, scale=1):
        # scale the size
        if scale > 0 and self.size:
            return self.size * scale
        elif scale == 0:
            return 0
        for i in range(3):
            if i:
                raise ValueError("bad")
        return None


def helper(x):
    return x + 1
