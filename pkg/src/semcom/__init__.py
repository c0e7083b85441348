"""Semantic communication over conceptual spaces: link-level simulation and analysis."""

from .space import (
    ContextSpec,
    DomainSpec,
    PiecewiseLinearMap,
    QualityDimension,
    SemanticPoint,
    SpaceSpec,
    circular_distance,
    color_domain_distance,
    contextual_distortion,
    semantic_distortion,
    smooth_circular_distance,
)
from .decode import (
    Concept,
    ConceptSet,
    DecodeResult,
    nearest_concept,
    tau,
    verify_tau_by_sampling,
)
from .bounds import (
    BoundReport,
    Empirical,
    Exponential,
    GaussianEncoder,
    InfeasibleDesignError,
    design_lambda2,
    hypoexp_pdf,
    hypoexp_survival,
    lemma1_bound,
    lemma2_bound,
)
from .encoders import (
    TheoreticalEncoderConfig,
    encode_theoretical,
    encoder_floor,
    sample_concept,
    sample_in_tau_ball,
)
from .phy import (
    ChannelSpec,
    CodecSpec,
    ModulationSpec,
    PacketSpec,
    PhyConfig,
    QuantizerSpec,
    channel_apply,
    conv_encode,
    demodulate,
    dequantize,
    modulate,
    quantize,
    transmit_packet,
    viterbi_decode,
)
from .sim import (
    RateReport,
    ScenarioConfig,
    SweepReport,
    TrialRecord,
    merge_reports,
    rate_accounting,
    run_packet,
    run_sweep,
    run_trial,
    sweep_to_csv,
    sweep_to_json,
)
from .config import ConfigError, load_concepts, load_space, parse_config

__version__ = "0.1.0"
