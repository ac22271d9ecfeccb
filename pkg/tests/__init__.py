import math
import unittest
from typing import *

import numpy as np

import kglab


def two_arm_instance(means=(0.0, 1.0), stds=(1.0, 1.0)) -> kglab.BanditInstance:
    return kglab.make_instance(means, stds, label="two arms")


class BaseKGTest(unittest.TestCase):
    def assertRelClose(self, first: float, second: float, rel_tol: float, msg: Optional[str] = None):
        if not math.isclose(first, second, rel_tol=rel_tol):
            self.fail(msg or f"{first!r} != {second!r} within relative tolerance {rel_tol}")

    def assertArrayEqual(self, first, second):
        np.testing.assert_array_equal(np.asarray(first), np.asarray(second))
