"""Error of the defect-based local error estimate as the time step is refined.

For EC on the centred soliton state, compare L = dt/3 R with the local error
against a fine-step RK4 reference flow, for three parameter laws: alpha = 0,
alpha fixed at 0.01, and alpha scaled with dt^2. Prints the log-log slopes.
"""
import numpy as np

from optparam import kdv
from optparam.benchmarks import get_benchmark, kdv_soliton
from optparam.defect import defect, discrete_norm

REFERENCE_STEP = 2.5e-5  # explicit RK4 is stable on this grid for steps below ~1.3e-4


def reference_flow(grid, u, T):
    n = int(np.ceil(T / REFERENCE_STEP))
    h = T / n
    f = lambda w: kdv.kdv_rhs(w, grid)  # noqa: E731
    for _ in range(n):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def main():
    grid = get_benchmark("kdv-soliton").grid()
    u = kdv_soliton(grid.x, 5.0)
    dts = np.array([0.2, 0.1, 0.05])
    laws = {"alpha = 0": lambda dt: 0.0, "alpha = 0.01": lambda dt: 0.01, "alpha = 0.25 dt^2": lambda dt: 0.25 * dt**2}
    sc = kdv.EC(grid)
    for label, law in laws.items():
        errs = []
        for dt in dts:
            rep = defect(sc, dt, u, [law(dt)])
            local = rep.u_next - reference_flow(grid, u, dt)
            errs.append(discrete_norm(rep.estimator - local, grid.dx))
        slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        print(f"{label:>18}: " + "  ".join(f"{e:.3e}" for e in errs) + f"   slope {slope:.2f}")


if __name__ == "__main__":
    main()
