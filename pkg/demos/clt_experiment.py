"""Monte Carlo check of the Gaussian regime of the quadratic Hermite variation."""

from hermite_limits import FunctionalKind, mc_lab


def main():
    config = mc_lab.ExperimentConfig.build(FunctionalKind.hermite(2), 0.3, 1.0,
                                           ["2^-5", "2^-6", "2^-7"], replicas=1000, base_seed=1)
    report = mc_lab.run_experiment(config)
    print(f"predicted limit variance: {report.prediction['constant']:.5f}")
    for row in report.per_eps:
        print(f"eps={row['eps']:<10g} normalized variance={row['normalized_variance']:.5f} "
              f"exact second moment={row['exact_second_moment']:.5g} KS p={row['p_value']:.3f}")
    print(f"variance slope {report.regression['slope']:.3f} "
          f"(expected {report.regression['expected_slope']:.3f})")
    for verdict in report.verdicts:
        print(("PASS " if verdict.passed else "FAIL ") + verdict.criterion)


if __name__ == "__main__":
    main()
