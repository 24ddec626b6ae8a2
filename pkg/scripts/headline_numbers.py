#!/usr/bin/env python3
"""Print the headline quantities at reduced Monte Carlo budgets.

A quick tour (a couple of minutes): the sqrt(d) root-count law, the Kac
logarithm, the m = 1 determinant constants, peak-section concentration, a
circle barrier certificate, curve counts on RP^2, and a packing sweep.
"""
import math

import numpy as np

from rhlab.ensembles import AffinePolynomial, EnsembleSpec
from rhlab import fubini as fb
from rhlab import matrixstats as ms
from rhlab import transversality as tv
from rhlab.curves2d import betti_statistics
from rhlab.packing import Manifold, packing_sweep
from rhlab.roots1d import expected_roots_crofton, expected_roots_mc


def main():
    print("== real roots of random polynomials ==")
    for kind, d in (("kostlan", 25), ("kostlan", 100), ("kac", 100)):
        spec = EnsembleSpec(kind, 2, d, seed=7)
        est = expected_roots_mc(spec, 20_000)
        cro = expected_roots_crofton(spec)
        ref = math.sqrt(d) if kind == "kostlan" else (2 / math.pi) * math.log(d)
        print(f"  {kind} d={d}: MC {est.mean:.3f} +- {est.std_error:.3f} | "
              f"Crofton {cro:.3f} | reference {ref:.3f}")

    print("== symmetric-matrix determinant constants (m = 1) ==")
    t = ms.estimate_e_table(1, 200_000, seed=7)
    print(f"  E|a| = {t.mean_absdet:.4f} (exact sqrt(2/pi) = {math.sqrt(2/math.pi):.4f}); "
          f"sum c+ = {t.total:.4f} (exact sqrt(2)/pi = {math.sqrt(2)/math.pi:.4f})")

    print("== peak-section concentration, P = x^2 - 1 ==")
    P1 = AffinePolynomial.from_terms(1, 2, {(0,): -1.0, (2,): 1.0})
    for d in (50, 200):
        sec = fb.build_peak_section(P1, d, fb.ProjectivePoint(np.array([1.0, 0.0])))
        print(f"  d={d}: L2 norm {math.sqrt(fb.fs_l2_norm_sq(sec.section)):.4f}, "
              f"mass in B(x, 2/sqrt d) = {fb.peak_mass_fraction(P1, d, 2.0):.4f}")

    print("== barrier certificate for the unit circle ==")
    circle = AffinePolynomial.from_terms(2, 2, {(0, 0): -1.0, (2, 0): 1.0, (0, 2): 1.0})
    model = tv.HypersurfaceModel(circle, (0,), R=2.0, delta_K=0.2, delta_U=0.4)
    cert = tv.assemble_certificate(model, 60, trials=200, seed=7)
    pres = tv.presence_probability_mc(model, 40, 500, seed=7)
    print(f"  delta'={cert.delta:.4f} eps'={cert.epsilon:.4f} C1={cert.C1:.3f} "
          f"C2={cert.C2:.3f} M={cert.M:.1f} log c~ = {cert.log_c_tilde:.0f}")
    print(f"  presence probability at d=40: {pres.probability:.4f} +- {pres.std_error:.4f}")

    print("== curve component counts on RP^2 ==")
    for d in (4, 8):
        st = betti_statistics(d, 200, seed=7)
        print(f"  d={d}: mean b0 = {st.mean_b0:.3f} +- {st.std_error:.3f} "
              f"(Harnack bound {st.harnack_bound})")

    print("== packing on RP^2 ==")
    for s in packing_sweep(Manifold.projective(2), [0.2, 0.1], seed=7):
        print(f"  eps={s.epsilon:.3f}: N={s.count}, eps^2 N = {s.normalized:.3f} "
              f"(lower bound {s.bound:.3f})")


if __name__ == "__main__":
    main()
