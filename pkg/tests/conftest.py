import math
import sys

import numpy as np
import pytest

from nhwalk.fisher import align_phase
from nhwalk.walk import Boundary, WalkConfig

PI = math.pi


def point_gap(n, estimated=0.1 * PI, boundary=Boundary.OBC, gamma=0.3):
    return WalkConfig.domain_wall(n, 0.9 * PI, estimated, gamma, boundary)


def line_gap(n, estimated=0.779 * PI, boundary=Boundary.OBC, gamma=0.3):
    return WalkConfig.domain_wall(n, 0.05 * PI, estimated, gamma, boundary)


def kron_operator(config):
    """Step operator from explicit Kronecker products of the four factors."""
    size = config.size
    t1, t2 = config.site_angles()
    hh = np.diag([1.0, 0.0])
    vv = np.diag([0.0, 1.0])
    shift = np.zeros((2 * size, 2 * size))
    for i in range(size):
        for dest, proj in ((i - 1, hh), (i + 1, vv)):
            if config.boundary is Boundary.CBC:
                dest %= size
            elif not 0 <= dest < size:
                continue
            e = np.zeros((size, size))
            e[dest, i] = 1.0
            shift += np.kron(e, proj)

    def rot(a):
        return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])

    def blockdiag(blocks):
        out = np.zeros((2 * size, 2 * size))
        for i, b in enumerate(blocks):
            out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = b
        return out

    r1 = blockdiag([rot(a / 2) for a in t1])
    r2 = blockdiag([rot(a / 2) for a in t2])
    loss = np.kron(np.eye(size), np.diag([math.exp(config.gamma), math.exp(-config.gamma)]))
    return r1 @ shift @ r2 @ loss


def fidelity_oracle(family, theta, h=1e-4):
    """Fidelity-based QFI, Richardson-extrapolated over h and 2h.

    1 - |<a|b>| is evaluated as |b' - a|^2 / 2 with b' phase-aligned to a,
    which is the same quantity without cancellation.
    """
    a = family(theta)

    def one_minus_overlap(step):
        vals = []
        for s in (step, -step):
            b = align_phase(a, family(theta + s))
            vals.append(0.5 * np.linalg.norm(b - a) ** 2)
        return np.mean(vals)

    f1 = 8 * one_minus_overlap(h) / h ** 2
    f2 = 8 * one_minus_overlap(2 * h) / (2 * h) ** 2
    return (4 * f1 - f2) / 3


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
