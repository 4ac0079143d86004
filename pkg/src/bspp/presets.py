"""Reference parameter sets for the two-tier deployment studies.

Macro tier: repulsive Strauss at r=0.085, gamma=0.3547 (unit window).
MACRO_BETA=255 gives a mean of about 77 points, calibrated by simulation
(400 chains per beta; E[n] = 76.4 at 250, 77.6 at 260).
Micro tier: Matérn cluster with 71.552 parents, 2.641 offspring each, R=0.087.
"""
from .procsim import GibbsModel, MaternModel

MACRO_BETA = 255.0
MACRO_STRAUSS = GibbsModel.strauss(MACRO_BETA, 0.3547, 0.085)
MACRO_GEYER_R, MACRO_GEYER_SAT, MACRO_GEYER_GAMMA = 0.12, 3, 0.2448
MACRO_HC = 0.0047
MICRO_MATERN = MaternModel(71.552, 2.641, 0.087)
MICRO_GEYER_R, MICRO_GEYER_SAT, MICRO_GEYER_GAMMA = 0.05, 5, 1.4011
