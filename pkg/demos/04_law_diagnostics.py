"""Diagnostics for an environment law: h-function, Poincare constant, kappa.

Every admissible disorder law exposes the auxiliary function
h(x) = E[(X - m) 1{X > x}] / f(x); its supremum K controls the
concentration machinery, and kappa(d) is the temperature scale past
which the localization bounds kick in.  This script evaluates all of
them for the uniform law and for a tabulated triangular density, and
runs the integration-by-parts identity as a self-check.
"""

import numpy as np

from polylab.laws import (check_ibp, kappa, make_table_law, make_uniform,
                          phi, poincare_constant)

for law in [
    make_uniform(-1.0, 1.0),
    make_table_law(np.linspace(-1, 1, 401),
                   1.0 - np.abs(np.linspace(-1, 1, 401))),  # triangular
]:
    print(f"law: {law.name}")
    print(f"  support  = ({law.support_lo}, {law.support_hi})")
    print(f"  mean     = {law.mean:.6f}")

    K = poincare_constant(law)
    print(f"  K = sup h = {K:.6f}")

    xs = law.interior_grid(5)
    print("  h on a coarse grid:",
          np.array2string(np.asarray([float(law.h_eval(x)) for x in xs]),
                          precision=4))

    for d in (1, 2, 3):
        kap = kappa(law, d)
        lam = 1.0 / kap
        print(f"  kappa(d={d}) = {kap:.6f}   "
              f"log phi(1/kappa) = {np.log(phi(law, lam)):.3f}")

    # IBP identity E[(X-m) g(X)] = E[h(X) g'(X)] on a smooth test function
    resid = check_ibp(law, np.sin, np.cos)
    print(f"  IBP residual on g=sin: {resid:.2e}")
    print()
