"""Robustly shuffle-private and pan-private protocols for distinct-element
counting and uniformity testing, with audit and experiment tooling."""

from .audit import (
    AuditReport,
    EmpiricalDist,
    EncodingMismatch,
    MonteCarloEstimate,
    OutcomeSpaceError,
    audit_pair,
    empirical_dist,
    encode_transcript,
    exact_joint_zsum,
    hockey_stick,
    tv_distance,
)
from .distinct import (
    DE_PROTOCOL,
    ZSUM_PROTOCOL,
    DeParams,
    ZsumParams,
    clamp_estimate,
    de_analyze,
    de_error_bound,
    de_randomize,
    delta_gamma,
    eps_gamma_bound,
    hde_error_bound,
    hde_run,
    parity_bias,
)
from .mod2sum import mod2_analyze, mod2_exact_tv, mod2_randomize, mod2_security_probe, share_count
from .pan import (
    PanHistogram,
    PanRun,
    PanState,
    QZsum,
    StreamError,
    intrusion_view,
    pan_from_shuffle_de,
    pan_from_shuffle_ut,
    pan_histogram,
    run_online,
    zsum_lambda,
    zsum_run,
)
from .sampling import (
    ParameterError,
    PrivacyParams,
    RandomSource,
    binomial_mechanism,
    binomial_privacy_eps,
    binomial_privacy_ok,
)
from .shuffle import MalformedTranscript, ProtocolSpec, Transcript, run_protocol, run_with_dropout, shuffle
from .uniformity import (
    NOT_UNIFORM,
    UNIFORM,
    UT_PROTOCOL,
    CategoricalDist,
    FullTestConfig,
    Partition,
    UtParams,
    compress,
    half_flat,
    khat_rule,
    sample_partition,
    uniform_dist,
    ut_analyze,
    ut_full_test,
    ut_lambda,
    ut_randomize,
    ut_sample_complexity,
    ut_tau,
)

__version__ = "0.1.0"
