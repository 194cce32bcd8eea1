"""Finite-section laboratory for Toeplitz-Pimsner and Cuntz-Pimsner
algebras over finite-dimensional coefficient algebras.

The package builds concrete correspondences E = l^2_n (x) A over
A = direct sums of matrix blocks, truncated Fock modules, finite-section
pipelines with exact Schur-coefficient oracles, conditional-expectation
towers, lifting machinery over the inductive-limit algebra, and completely
positive approximation certificates.
"""

from .star_core import (
    AElement,
    AlgebraSpec,
    Automorphism,
    ConfigurationError,
    DEFAULT_TOL,
    SpecMismatchError,
    Tolerances,
    sample,
)
from .hilbert_mod import (
    AMatrix,
    CPReport,
    LinearMapTable,
    choi_cp_check,
    cp_check_auto,
    inner,
    module_norm,
    positivity_probe,
    rank_one,
)
from .correspondence import CorrespondenceSpec, ValidationError
from .fock import (
    FockWindow,
    GradedOperator,
    SchurRow,
    TailSymbol,
    compress,
    creation_op,
    psi_amplify,
    schur_oracle,
    tail_compare,
    toeplitz_op,
    v_n,
    w_n,
)
from .expectation import eps_bar, eps_hat, ex_k, ex_trace, verify_cond_exp
from .lift import (
    CPAPCertificate,
    EInftyContext,
    FactorPair,
    bilateral_lift,
    compose_certificates,
    cpap_certificate,
    einfty_inner,
    lift_defect,
    pi_i,
    toeplitz_infty,
)
from .presets import PRESETS, build_preset, load_config, load_spec
from .lift import TOOL_VERSION as __version__

__all__ = [name for name in dir() if not name.startswith("_")]
