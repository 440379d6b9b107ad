"""Independent oracles and plant builders shared by the test modules."""

import itertools
import math

import numpy as np

from vlident.regressor import Dataset
from vlident.simulate import PlantBranch, SyntheticPlant, exponential_response, generate_inputs, simulate_plant


def laguerre_factorial_sum(n, t, a):
    """Orthonormal Laguerre function from the explicit factorial sum (no recurrence)."""
    x = 2.0 * a * t
    poly = sum((-1) ** k * math.comb(n, k) * x ** k / math.factorial(k) for k in range(n + 1))
    return math.sqrt(2.0 * a) * math.exp(-a * t) * poly


def laguerre_uncorrected(n, t, a):
    """The closed form with the extra 2^(n-k) factor; not normalized."""
    total = 0.0
    for k in range(n + 1):
        total += ((-1) ** k * math.factorial(n) * 2 ** (n - k)
                  / (math.factorial(k) * math.factorial(n - k) ** 2) * (2 * a * t) ** (n - k))
    return math.sqrt(2 * a) * total * math.exp(-a * t)


def brute_reduced_kronecker(v, n):
    """Enumerate every ordered n-tuple, keep one representative per multiset, sort."""
    multisets = sorted({tuple(sorted(p)) for p in itertools.product(range(len(v)), repeat=n)})
    return np.array([math.prod(v[j] for j in m) for m in multisets]), multisets


def direct_volterra_design(u, k, rows, memory, degree):
    """Columns u(t-i) and products u(t-i1)...u(t-in), i1 <= ... <= in, by explicit loops."""
    cols = []
    for n in range(1, degree + 1):
        for lags in itertools.combinations_with_replacement(range(memory + 1), n):
            col = np.empty(rows)
            for d in range(rows):
                t = k + d
                col[d] = math.prod(u[t - i] for i in lags)
            cols.append(col)
    return np.column_stack(cols)


def sign_changes(values):
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def heterogeneous_plant(slow=0.05, fast=2.0, memory=40, noise_std=0.0):
    """Input 1 reaches the output linearly and slowly; input 2 quadratically and fast."""
    return SyntheticPlant([
        PlantBranch(0, "wiener", impulse_response=exponential_response(slow, memory, 0.3),
                    polynomial=[0.0, 1.0]),
        PlantBranch(1, "wiener", impulse_response=exponential_response(fast, memory),
                    polynomial=[0.0, 0.0, 1.0]),
    ], noise_std)


def heterogeneous_dataset(length=600, seed=0, memory=40):
    u = generate_inputs("two-level", length, 2, seed=seed, dwell=2)
    y = simulate_plant(heterogeneous_plant(memory=memory), u, seed=seed).output
    return Dataset(u, y, ("u1", "u2"))


def first_order_dataset(pole=0.2, memory=60, length=1000, seed=3, dwell=3):
    u = generate_inputs("two-level", length, 1, seed=seed, dwell=dwell)
    plant = SyntheticPlant([PlantBranch(0, "wiener", impulse_response=exponential_response(pole, memory),
                                        polynomial=[0.0, 1.0])])
    return Dataset(u, simulate_plant(plant, u).output, ("u",))


def tank_dataset(length=800, seed=11, memory=30):
    """Level of a tank whose net inflow is a first-order response to the input (an integrator)."""
    u = generate_inputs("two-level", length, 1, seed=seed, dwell=5)
    inflow = SyntheticPlant([PlantBranch(0, "wiener", impulse_response=exponential_response(0.3, memory, 0.1),
                                         polynomial=[0.0, 1.0])])
    return Dataset(u, np.cumsum(simulate_plant(inflow, u).output), ("u",))
