# SPDX-License-Identifier: Apache-2.0
#
# Independent NumPy reference for the two-branch toy circuit sweep.
# Regenerates tests/data/toy_oracle.csv, the frozen table the acceptance
# suite compares the C++ sweep against (statistically: means +/- 2 SE).
#
# Run from the repo root:  python3 scripts/reference_toy.py
import numpy as np

EPS, D, N_SEEDS = 1e-8, 32, 100
TAUS = np.linspace(0.0, 2.0, 11)
alpha, align = 1.0, 0.9


def rand_matrix(d, scale, rng):
    return scale * rng.normal(size=(d, d)) / np.sqrt(d)


def ei_proxy(J, alpha):
    s = np.linalg.svd(J, compute_uv=False)
    return 0.5 * np.sum(np.log1p(alpha * (s ** 2)))


def build_branch_mats(D, align, rng):
    U = rand_matrix(D, 0.8, rng)
    A = rand_matrix(D, 0.9, rng)
    W = rand_matrix(D, 0.9, rng)
    W13 = U
    W23 = (1 - align) * rand_matrix(D, 0.8, rng) + align * U
    W34 = A
    W35 = (1 - align) * rand_matrix(D, 0.9, rng) + align * A
    W46 = W
    W56 = (1 - align) * rand_matrix(D, 0.9, rng) + align * W
    return W13, W23, W34, W35, W46, W56


def metrics_at_tau(tau, rng):
    W13, W23, W34, W35, W46, W56 = build_branch_mats(D, align, rng)
    # Edge decoherence: remix the second branch toward fresh matrices.
    h = min(1.0, tau / 2.0)
    nrg = np.random.default_rng(rng.integers(10 ** 9))
    W56 = (1 - h) * W56 + h * rand_matrix(D, 0.9, nrg)
    W35 = (1 - h) * W35 + h * rand_matrix(D, 0.9, nrg)

    Jb1 = W46 @ W34 @ W13
    Jb2 = W56 @ W35 @ W23
    JM = Jb1 + Jb2

    EI_macro = ei_proxy(JM, alpha)
    EI_parts = ei_proxy(Jb1, alpha) + ei_proxy(Jb2, alpha)
    dEI_g = max(0.0, EI_macro - EI_parts) / (EPS + EI_macro)

    a1 = rng.normal(size=D)
    a2 = rng.normal(size=D)
    a3 = W13 @ a1 + W23 @ a2
    a4 = W34 @ a3
    a5 = W35 @ a3
    a6 = W46 @ a4 + W56 @ a5
    a1o = a1 + tau * rng.normal(size=D)
    a2o = a2 + tau * rng.normal(size=D)
    a3o = a3 + tau * rng.normal(size=D)
    a4o = a4 + tau * rng.normal(size=D)
    a5o = a5 + tau * rng.normal(size=D)
    a6o = a6 + tau * rng.normal(size=D)

    edges = [(a1o, a3o, W13), (a2o, a3o, W23), (a3o, a4o, W34),
             (a3o, a5o, W35), (a4o, a6o, W46), (a5o, a6o, W56)]
    num = den = 0.0
    for au, av, Wm in edges:
        r = Wm @ au - av
        num += r @ r
        den += au @ au + av @ av
    Csh = np.sqrt(num) / (EPS + np.sqrt(den))
    EICS = dEI_g / (1.0 + Csh)
    return Csh, dEI_g, EICS


def main():
    rows = []
    for tau in TAUS:
        Cs, ds, Ss, Is = [], [], [], []
        for k in range(N_SEEDS):
            rng = np.random.default_rng(1000 + k)
            Csh, dEIg, EICS = metrics_at_tau(tau, rng)
            Cs.append(Csh)
            ds.append(dEIg)
            Ss.append(EICS)
            Is.append(1.0 / (1.0 + Csh))
        Cs, ds, Ss, Is = map(np.array, (Cs, ds, Ss, Is))

        def se(x):
            return x.std(ddof=1) / np.sqrt(N_SEEDS)

        rows.append((tau, Ss.mean(), se(Ss), Cs.mean(), se(Cs),
                     Is.mean(), se(Is), ds.mean(), se(ds), N_SEEDS))

    with open("tests/data/toy_oracle.csv", "w") as f:
        f.write("tau,eics_mean,eics_se,csh_mean,csh_se,"
                "invcsh_mean,invcsh_se,dei_mean,dei_se,n_seeds\n")
        for r in rows:
            f.write(",".join("%.17g" % v for v in r[:9]) + ",%d\n" % r[9])
    for r in rows:
        print("tau=%.1f  eics=%.4f+-%.4f  csh=%.4f  inv=%.4f  dei=%.4f"
              % (r[0], r[1], r[2], r[3], r[5], r[7]))


if __name__ == "__main__":
    main()
