"""Layout-aware multi-reference composition toolkit.

Compiles a structured multi-reference input (visual/textual/spatial groups
plus an optional global interaction instruction) into a unified token
layout, derives the group-isolation and region-modulated attention masks as
exact boolean rules with bit-exact binary export, schedules the two-stage
denoising modes, verifies isolation in a deterministic toy attention
simulator, and scores layouts with inclusion/fill ratios and the background
similarity blend.
"""

from .composition import (
    BBox,
    Bitmap,
    CompositionError,
    CompositionSpec,
    ImageRef,
    Region,
    SelfAttributeDescription,
    ValidationReport,
    Violation,
    VtsGroup,
    derive_uncontrolled,
    normalize,
    parse_spec,
    rasterize,
    serialize_spec,
    validate,
)
from .layout import (
    CEI,
    UNCONTROLLED,
    LayoutFormatError,
    Modality,
    SpecialOwner,
    TokenLayout,
    TokenSpan,
    TokenTag,
    assign_canvas_tokens,
    export_layout,
    import_layout,
    latent_token_count,
    layout_digest,
    pack,
)
from .masks import (
    AttentionMaskArtifact,
    MaskFormatError,
    MaskMode,
    allow_rule,
    build_mask,
    expand_dense,
    export_blocks,
    export_mask,
    import_blocks,
    import_mask,
)
from .metrics import (
    AreaFilter,
    SimilarityInputs,
    area_filter,
    avg_report,
    bg_similarity,
    color_hist_sim,
    cosine_similarity,
    evaluate_manifest,
    evaluate_sample,
    fill_ratio,
    in_ratio,
    ssim,
)
from .schedule import StageSchedule, build_schedule, export_schedule, import_schedule
from .simulator import (
    SimulatorConfig,
    attention_weights,
    denoise_loop,
    embed,
    masked_attention,
    perturbation_probe,
    projections,
)

__version__ = "0.1.0"
