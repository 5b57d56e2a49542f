"""Multiple-output composite quantile regression via discrete optimal transport."""

from .baselines import (Coefficients, CqrConfig, SpqrConfig, fit_coorcqr, fit_cqr_1d,
                        fit_ols, fit_spqr)
from .core_math import (RngStream, check_spd, cholesky, mahalanobis_matrix_norm,
                        psd_sqrt, toeplitz_cov)
from .dataset import RegressionDataset
from .errors import (DegenerateInput, DimensionError, DomainError, DualRecoveryFailed,
                     EmptyInput, Infeasible, InvalidConfig, InvalidMatrix, IoError,
                     McqrError, NotPositiveDefinite, RankDeficient, SolverStalled)
from .estimator import (McqrConfig, McqrFit, fit_mcqr, fit_mcqr_lp, fit_mcqr_subgradient,
                        mcqr_loss)
from .ot_solver import (Coupling, OtSolution, PointCloud, gelbrich_wip, solve_ot,
                        w2_squared, wasserstein_product)
from .sampling import (CovariateModel, NoiseModel, ReferenceModel, draw_b_star,
                       make_dataset, sample_covariates, sample_noise, sample_reference)

__version__ = "0.1.0"
