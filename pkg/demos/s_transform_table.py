"""Finite-lag S-transforms of the Hermite variation approaching their limit."""

from hermite_limits import FunctionalKind, KernelContext, TestFunction, s_transform


def main():
    ctx = KernelContext.calibrate(0.6)
    xi = TestFunction.hermite(1)
    kind = FunctionalKind.hermite(2)
    limit = s_transform(ctx, kind, xi, 1.0, 0.0)
    print(f"c_H = {ctx.c_H:.12f}, limit = {limit:.10f}")
    for j in range(2, 11):
        eps = 2.0 ** -j
        value = s_transform(ctx, kind, xi, 1.0, eps)
        print(f"eps=2^-{j:<3d} value={value:.10f} gap={abs(value - limit):.3e}")


if __name__ == "__main__":
    main()
