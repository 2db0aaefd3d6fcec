"""Tour of the SPD primitives: spectral maps, distances, projection.

Run with:  python3 demos/01_spd_geometry.py
"""

import numpy as np

from spdcast import (
    SpdMatrix,
    dist_euclidean,
    dist_frobenius,
    dist_log_euclidean,
    dist_procrustes,
    expm,
    logm,
    project_to_spd,
    sqrtm_psd,
)


def section(title):
    print()
    print(title)
    print("-" * len(title))


def main():
    rng = np.random.default_rng(7)

    section("Construction and spectral maps")
    q, r = np.linalg.qr(rng.standard_normal((4, 4)))
    q = q * np.sign(np.diag(r))
    a = SpdMatrix((q * [0.3, 1.0, 2.5, 6.0]) @ q.T)
    print("eigenvalues:", np.round(np.linalg.eigvalsh(a.data), 4))

    log_a = logm(a)
    back = expm(log_a)
    print("log then exp, round trip error:", np.linalg.norm(back.data - a.data))

    root = sqrtm_psd(a)
    print("sqrt check, ||L L^T - A|| =", np.linalg.norm(root @ root.T - a.data))

    section("Four distances on one pair")
    b = SpdMatrix(a.data + 0.5 * np.eye(4))
    print(f"frobenius (squared):  {dist_frobenius(a, b):.6f}")
    print(f"euclidean (vech):     {dist_euclidean(a, b):.6f}")
    print(f"log-euclidean:        {dist_log_euclidean(a, b):.6f}")
    print(f"procrustes:           {dist_procrustes(a, b):.6f}")

    section("Repairing an indefinite estimate")
    noisy = a.data - 2.0 * np.eye(4)
    print("smallest eigenvalue before:", np.linalg.eigvalsh(noisy)[0].round(4))
    fixed = project_to_spd(noisy, 1e-8)
    print("smallest eigenvalue after: ", np.linalg.eigvalsh(fixed.data)[0])
    print("distance moved:", np.linalg.norm(fixed.data - noisy))


if __name__ == "__main__":
    main()
