"""Linear speedup: more nodes push the noise floor down.

With the per-network step rule n * alpha fixed, the centroid dynamics are
the same for every network size, but the effective gradient noise shrinks
like 1/n because n independent samples are averaged per round. The plateau
of the gradient norm should therefore drop roughly like 1/sqrt(n).

Scaled-down version of the experiment harness driver (fewer repetitions);
the full 20-seed version with significance tests runs in the acceptance
suite and via `rowgossip speedup`.

Run: python demos/linear_speedup.py
"""

from rowgossip import harness


def main():
    cfg = harness.ExperimentConfig(
        kind="speedup",
        topo_kind="exp",
        nodes="1,4,16",
        sigma=1.0,
        n_alpha=0.512,
        total_rounds=2000,
        record_every=10,
        repetitions=5,
        seed=42,
        problem="logistic",
        total_rows=12800,
        dim=10,
        rho=0.01,
        batch=50,
    ).validate()
    print("synthetic nonconvex logistic regression, exponential graphs,")
    print(f"n*alpha = 0.512, sigma = 1, {cfg.total_rounds} rounds, {cfg.repetitions} seeds per size\n")

    records = harness.run_speedup_experiment(cfg)
    print(f"{'n':>4s} {'plateau of |avg grad|':>22s} {'se':>10s}")
    for record in records:
        s = record.summary
        print(f"{s['n']:4d} {s['plateau_mean']:22.5f} {s['plateau_se']:10.5f}")

    base = records[0].summary["plateau_mean"]
    print("\nratios against the single node (theory ~ 1/sqrt(n)):")
    for record in records:
        s = record.summary
        print(f"  n={s['n']:3d}: {s['plateau_mean'] / base:6.3f}   (1/sqrt(n) = {1 / s['n'] ** 0.5:.3f})")


if __name__ == "__main__":
    main()
