"""Per-iteration cost of each loss variant on 25 s of Lorenz data, compiled and numpy backends."""

import time

import numpy as np

from wmsindy import get_system, simulate_truth
from wmsindy.joint import VARIANTS, JointLoss
from wmsindy.testfn import test_functions_from_data


def main(repeats: int = 200):
    system = get_system("lorenz")
    spec = system.library()
    truth = simulate_truth(system, system.x0, 25.0, 0.01)
    rng = np.random.default_rng(0)
    Y = truth.states + 0.4 * truth.states.std(axis=0) * rng.normal(size=truth.states.shape)
    xi = system.true_coefficients(spec)
    noise = np.zeros_like(Y)
    testfns = test_functions_from_data(Y, 0.01)
    for variant in VARIANTS:
        for backend in ("compiled", "numpy"):
            loss = JointLoss(Y, spec, 0.01, testfns=testfns, variant=variant, backend=backend)
            loss.evaluate(xi, noise)
            n = repeats if backend == "compiled" else max(1, repeats // 10)
            start = time.perf_counter()
            for _ in range(n):
                loss.evaluate(xi, noise)
            print(f"{variant:<15} {backend:<9} {1e3 * (time.perf_counter() - start) / n:7.2f} ms/iter")


if __name__ == "__main__":
    main()
