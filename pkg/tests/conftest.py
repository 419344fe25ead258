import numpy as np
import pytest


def central_difference(loss, param, index, h=1e-5):
    """Central finite difference of ``loss()`` w.r.t. ``param[index]``, in place."""
    old = param[index]
    param[index] = old + h
    up = loss()
    param[index] = old - h
    down = loss()
    param[index] = old
    return (up - down) / (2 * h)


def rel_error(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradcheck(loss, params, grads, n_coords=100, seed=0, h=1e-5):
    """Worst relative error over ``n_coords`` random parameter coordinates."""
    rng = np.random.default_rng(seed)
    sizes = np.array([p.size for p in params])
    worst = 0.0
    for _ in range(n_coords):
        k = rng.choice(len(params), p=sizes / sizes.sum())
        idx = np.unravel_index(rng.integers(params[k].size), params[k].shape)
        numeric = central_difference(loss, params[k], idx, h)
        worst = max(worst, rel_error(grads[k][idx], numeric))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_probs(rng, n, p, concentration=1.0):
    return rng.dirichlet(np.full(p, concentration), size=n)


def small_pool(seed_size=40, per_class=60, seed=0):
    """Four-class multi-modal blobs pool, small enough for quick bilevel runs."""
    from autoal.pool import init_pool, make_blobs

    ds = make_blobs(4, [per_class] * 4, spread=1.0, noise=0.3, seed=seed, clusters_per_class=4)
    return init_pool(ds, seed_size, seed=seed)


def quick_config(**kw):
    from autoal.search import AutoALConfig

    base = dict(budget=10, rounds=2, warmup_epochs=10, joint_epochs=3, batch_size=10,
                hidden=(16, 16), mc_samples=4)
    base.update(kw)
    return AutoALConfig(**base)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
