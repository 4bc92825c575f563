"""Instantaneous heartbeat-interval estimation from CW radar displacement.

Feature points extracted from the body-displacement waveform are matched
across beats by a pair of correlations -- an ordinary waveform correlation
and a phase-invariant "topology" correlation over complex feature-value
sequences -- and adjacent same-kind matches yield interval estimates.  The
library also carries the analysis that fixes the optimal inflection-point
weight at gamma = 5/8, a synthetic-scene generator with exact ground
truth, and an evaluation harness (RMS error, time coverage rate, gamma
sweeps, random-gamma baseline).
"""

from .dsp import (
    FirSpec,
    IQRecord,
    Waveform,
    apply_fir_zero_delay,
    decimate,
    design_fir,
    extract_phase,
    iq_to_displacement,
    remove_dc,
    unwrap_phase,
)
from .features import FeatureKind, FeaturePoint, derivatives, extract_features
from .harness import (
    PipelineConfig,
    RecordError,
    SweepResult,
    SweepSpec,
    default_gamma_grid,
    load_record,
    load_ref,
    parse_config,
    prepare_waveform,
    run_monte_carlo,
    run_record,
    run_sweep,
    scene_from_config,
    write_estimates_csv,
    write_features_csv,
    write_iq_csv,
    write_ref_csv,
    write_sweep_csv,
    write_waveform_csv,
)
from .metrics import (
    EvalReport,
    ReferenceBeats,
    evaluate,
    reference_ibi_at,
    rms_error,
    tcr,
)
from .model import (
    OPTIMAL_GAMMA,
    HarmonicModel,
    SyntheticRecord,
    SyntheticScene,
    constant_beats,
    eval_model,
    first_derivative_components,
    mean_rho_squared,
    optimal_gamma,
    random_walk_beats,
    rdv_conditions_hold,
    rho_bounds,
    synthesize,
)
from .topology import (
    AssignmentTable,
    IbiEstimate,
    TopologyParams,
    TopologySeries,
    assign_signal,
    build_series,
    estimate_ibis,
    ordinary_corr,
    topology_corr,
)

__version__ = "0.1.0"
