"""Twisted-index toolkit: torsion classes, projective bundle data,
character forms, and family index verification at desk scale."""

__version__ = "0.1.0"

from .bundles import (KClassDifference, OrdinaryBundleData,
                      ProjectiveBundleData, check_equivalence_witness,
                      direct_sum, gauge_twist, tensor_ordinary,
                      tensor_power_descend, validate)
from .chernweil import (ConnectionData, a_hat_form, average_connection,
                        chern_character_form, curvature, det_line_c1,
                        integrate, thom_rr_check, todd_form)
from .family import (FamilySpec, FiberModel, IndexBundle, analytic_index,
                     berry_connection, check_elliptic,
                     check_projective_compat, stabilize)
from .gerbe import (CombinatorialCover, GerbeCocycle, PULift, dd_class,
                    dd_cocycle, gauge_transform)
from .intmat import IntegerMatrix, SmithDecomposition, smith_normal_form
from .simplicial import (CohomologyGroup, SimplicialComplex, bockstein,
                         classify_cocycle, cohomology_group, suspension)
from .verify import (SymbolClass, VerificationReport, dirac_index_chern,
                     symbol_class, topological_index_chern, verify_family)
