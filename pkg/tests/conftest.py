import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hardmono.autodiff import Tensor

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def numeric_grad(f, arrays, eps=1e-5):
    """Central differences of scalar ``f(*arrays)`` w.r.t. each array."""
    grads = []
    for x in arrays:
        g = np.zeros_like(x)
        it = np.nditer(x, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = x[i]
            x[i] = old + eps
            plus = f(*arrays)
            x[i] = old - eps
            minus = f(*arrays)
            x[i] = old
            g[i] = (plus - minus) / (2 * eps)
        grads.append(g)
    return grads


def check_op_gradient(build, *shapes, seed=0, rtol=1e-6, positive=False):
    """Compare autodiff and finite-difference gradients of ``sum(build(*inputs) * w)``."""
    rng = np.random.default_rng(seed)
    arrays = [rng.uniform(0.5, 2.0, s) if positive else rng.normal(size=s) for s in shapes]
    probe = None

    def value(*arrs):
        nonlocal probe
        out = build(*[Tensor(a) for a in arrs])
        if probe is None:
            probe = rng.normal(size=out.shape)
        return float(np.sum(out.data * probe))

    value(*arrays)
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = build(*tensors)
    (out * probe).sum().backward()
    numeric = numeric_grad(value, arrays)
    for t, n in zip(tensors, numeric):
        denom = np.maximum(np.abs(t.grad) + np.abs(n), 1e-8)
        assert np.max(np.abs(t.grad - n) / denom) < rtol, (t.grad, n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
