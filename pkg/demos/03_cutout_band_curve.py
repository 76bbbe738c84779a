"""The cut-out optimization behind the mis-segmentation bound.

For a converged solve, the bound on the mis-segmented area minimizes

    band_area(v, eta) + err_u^2 / eta^2

over the half-open band width eta.  This script tabulates the band-area
curve and the objective, and marks the optimum; with matplotlib installed
it also plots both curves.
"""
import numpy as np

from certseg import (
    AdaptConfig,
    ImageInput,
    ModelParams,
    SolverConfig,
    run_adaptive,
)
from certseg.adapt import finest_norm_bound


def main():
    n = 33
    xs = np.arange(n) / (n - 1)
    x, y = np.meshgrid(xs, xs, indexing="xy")
    u0 = np.where((x - 0.5) ** 2 / 0.16 + (y - 0.5) ** 2 / 0.04 < 1.0, 0.9, 0.1)
    image = ImageInput.from_array(u0)
    params = ModelParams(c1=0.9, c2=0.1, nu=2e-3)

    cfg = SolverConfig.for_bound(finest_norm_bound("fd", image.level), threshold=1e-9)
    result = run_adaptive(image, params, "fd", cfg, AdaptConfig(cycles=1, max_level=image.level))
    cert = result.final
    etas, band = cert.eta_curve
    objective = band + cert.err_u_sq / etas**2

    print(f"err_u^2 = {cert.err_u_sq:.6e}")
    print("eta     band(eta)   objective")
    for k in range(9, len(etas), 20):
        marker = "  <- optimum" if abs(etas[k] - cert.eta_opt) < 1e-12 else ""
        print(f"{etas[k]:.4f}  {band[k]:.6f}   {objective[k]:.6f}{marker}")
    print(f"optimum: eta = {cert.eta_opt:.4f}, err_chi = {cert.err_chi:.6e}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(etas, band, label="band area")
        ax.plot(etas, objective, label="band + err_u^2/eta^2")
        ax.axvline(cert.eta_opt, color="k", ls=":", label=f"eta_opt = {cert.eta_opt:.4f}")
        ax.set_xlabel("eta")
        ax.set_ylim(0, min(2.5, objective.max()))
        ax.legend()
        fig.tight_layout()
        fig.savefig("cutout_band_curve.png", dpi=120)
        print("wrote cutout_band_curve.png")
    except ImportError:
        print("matplotlib not installed; skipped the plot")


if __name__ == "__main__":
    main()
