"""Published reference values for the bundled cases.

Angle differences are in degrees and keyed by the line as listed.
"""

# 9-bus lossless, operating points A and B
NINE_BUS_A = {
    (1, 4): 2.21, (4, 5): 1.53, (5, 6): -5.96, (3, 6): 2.86, (6, 7): 1.38,
    (7, 8): -3.14, (8, 2): -5.85, (8, 9): 8.05, (9, 4): -1.85,
}
NINE_BUS_B = {
    (1, 4): 2.21, (4, 5): -22.04, (5, 6): -122.17, (3, 6): 2.86, (6, 7): -24.60,
    (7, 8): 338.33, (8, 2): -5.85, (8, 9): -145.71, (9, 4): -23.81,
}
POINT_B_CRITICAL = {(5, 6), (8, 9)}
POINT_B_UNSTABLE_EIG = 2.42  # T_D = 0.1, eps1 = 1e-4, eps2 = 1e-2

# 3-bus lossy mesh
LOSSY3_P_GEN = (0.5295, 3.0860, 3.0650)
LOSSY3_DIFFS = {(1, 2): -70.7, (1, 3): -68.6, (2, 3): 2.1}
LOSSY3_LAPLACIAN = (
    (0.183, -0.080, -0.103),
    (-0.559, 0.666, -0.106),
    (-0.600, -0.033, 0.634),
)
# four-decimal variant printed alongside; the leading sign of row 3 is a typo
# there (rows of a Laplacian sum to zero)
LOSSY3_LAPLACIAN_4DP = (
    (0.1830, -0.0802, -0.1028),
    (-0.5592, 0.6655, -0.1063),
    (-0.6004, -0.0332, 0.6336),
)
LOSSY3_R_STAR = 522.7692
LOSSY3_UNSTABLE_IMAG = 0.0861  # T_D = 1000

# 9-bus radial lossy (line (5,6) removed, R/X = 0.5)
RADIAL_DIFFS = {
    (1, 4): 4.3886, (4, 5): 6.1041, (3, 6): 3.5157, (6, 7): 5.8135,
    (7, 8): -1.1227, (8, 2): -7.0950, (8, 9): 14.3953, (9, 4): -0.5655,
}
RADIAL_BALANCE = 1.0831
RADIAL_K = (0.5958, 0.5138, 0.5089, 0.6191, 0.6532, 0.5248, 0.5523, 0.5469, 0.6222)

# counterexample matrices
SYM_COUNTER = ((0.2, -0.1, -0.1), (-0.6, 0.7, -0.1), (-0.6, -0.1, 0.7))
SYM_COUNTER_MIN_EIG = -0.1339
CYCLIC_COUNTER = ((0.9, -0.8, -0.1), (-0.1, 0.9, -0.8), (-0.8, -0.1, 0.9))
CYCLIC_COUNTER_EIG = complex(1.3500, 0.6062)
