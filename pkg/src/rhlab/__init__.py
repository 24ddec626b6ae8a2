"""rhlab: random real projective hypersurfaces at desk scale.

Expected real-root counts of Kac/Kostlan polynomials, symmetric-matrix
determinant constants, Fubini-Study peak sections, a quantitative
transversality barrier pipeline, plane-curve topology statistics, and the
sphere-packing bound that assembles them into lower-bound constants.
"""

__version__ = "0.1.0"
