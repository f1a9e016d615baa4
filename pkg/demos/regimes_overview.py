"""Regime, normalization and limit constant of every functional across Hurst indices."""

from hermite_limits import BREVE, HAT, TILDE, FunctionalKind, limit_prediction


def main():
    kinds = [FunctionalKind.hermite(2), FunctionalKind.hermite(3), TILDE, BREVE, HAT]
    for h in (0.1, 0.25, 0.3, 0.5, 0.7, 0.75, 0.8, 0.9):
        for kind in kinds:
            pred = limit_prediction(kind, h)
            exponent = pred.normalization_exponent
            shown = f"{exponent:.3f}" if isinstance(exponent, float) else str(exponent)
            print(f"H={h:<5} {kind.label:<22} {pred.regime.value:<12} exponent={shown:<7} "
                  f"constant={pred.limit_constant:.6g}")


if __name__ == "__main__":
    main()
