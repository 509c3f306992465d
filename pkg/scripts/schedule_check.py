"""Coefficient sums of the reference schedules next to their asymptotic expressions.

Prints the first-order closed form and the expansion with the extra (p - 1) a / 2 term,
so the gap between them is visible at a glance.
"""

import math
import warnings

from smlb import schedules as sc


def main(T=100_000):
    slack = 20 * (math.log(T) / T) ** 2
    const = sc.make_constant(T, 2.0)
    print(f"constant schedule T={T} c=2, tolerance {slack:.3g}")
    for p in (1.0, 2.0, 3.0):
        s = sc.coefficient_sum(const, p)
        first = sc.constant_sum_closed_form(T, 2.0, p)
        second = sc.constant_sum_second_order(T, 2.0, p)
        print(f"  p={p:g}  sum={s:.10f}  first-order err={abs(s - first):.3g}  second-order err={abs(s - second):.3g}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        exp = sc.make_exp_then_const(T, 5.0, 0.01)
    s = sc.coefficient_sum(exp, 1.0)
    bound = sc.exp_sum_upper_bound(T, 5.0, 1.0)
    print(f"exp-then-const T={T} c=5 delta=0.01: sum={s:.10f} upper bound={bound:.10f} holds={s <= bound + slack}")


if __name__ == "__main__":
    main()
