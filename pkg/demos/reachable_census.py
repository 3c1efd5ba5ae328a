"""How little of the state space small circuits can reach.

Prints the log10 fraction of the K-qubit state sphere covered by eps-balls
around the outputs of all circuits with K^alpha gates from a set of M^K K^2
choices, and the gate budget for simulating a time-dependent model.
"""

from tdsim.counting import CountingParams, census, crossover, gate_counts


def main():
    print(" K  log10 circuits  log10 fraction")
    for row in census(range(2, 13)):
        print(f"{row.K:2d}  {row.log10_circuits:14.3f}  {row.log10_fraction:14.3f}")
    print(f"fraction decreases for every K >= {crossover(2, 2.0, 0.1)}")
    g = gate_counts(CountingParams(c_max=1.0, T=1.0, L=2, epsilon=0.1))
    print(f"gate budget for c_max=1, T=1, L=2, epsilon=0.1: G={g.G:g}, per-gate eps={g.eps_G:g}, "
          f"discrete gates={g.G_tot:.1f}")


if __name__ == "__main__":
    main()
