"""Scene-graph driven image editing on attention-modulated diffusion.

Parse an image into a scene graph through an LLM conversation protocol,
express edits as graph deltas, plan them as removal/insertion passes, and
execute them with attention-modulated sampling — on a small deterministic
reference backend in-process, or on a real diffusion worker over a JSON
wire protocol. Includes a checklist-based edit evaluator and an HTTP
service + CLI around the whole loop.
"""

from .attention import (
    CorrespondenceMatrix,
    LambdaSchedule,
    attention,
    build_correspondence,
    insertion_bias,
    lambda_schedule,
    modulated_attention,
    removal_attention,
    removal_bias,
)
from .backend import ToyDenoiser, decode_latent, embed_prompt, encode_image
from .concepts import (
    FinetuneJobSpec,
    FinetuneReceipt,
    apply_receipt,
    compose_training_prompt,
    emit_finetune_job,
    training_schedule,
)
from .controller import EditPlan, Insertion, non_object_prompt, plan_edit, plan_to_wire
from .evaluation import (
    BackgroundReport,
    EditReport,
    background_metrics,
    build_checklists,
    evaluate_edit,
    pearson,
)
from .gateway import (
    Attachment,
    ChatTurn,
    MalformedReply,
    MemoryRecordingProvider,
    PromptTemplate,
    ProviderUnavailable,
    RecordingProvider,
    ReplayMiss,
    ReplayProvider,
    fingerprint,
    parse_tagged_reply,
    render_template,
)
from .graph import (
    AddNode,
    GraphDelta,
    ModifyEdge,
    ObjectNode,
    RelationEdge,
    RemoveNode,
    ReplaceNode,
    SceneGraph,
    apply_delta,
    diff_graphs,
    graph_from_json,
    graph_from_wire,
    graph_to_json,
    graph_to_wire,
    validate_graph,
)
from .parser import ImageHandle, ParseResult, parse_scene
from .project import ProjectStore, export_archive, import_archive
from .regions import (
    BoundingBox,
    RegionMask,
    SegmentMap,
    compose_generation_map,
    downsample_mask,
    mask_from_rle,
    mask_to_rle,
    rasterize_box,
)
from .sampling import (
    ExecutionResult,
    ModulationSpec,
    PhaseSchedule,
    SamplingTrajectory,
    ddim_invert,
    execute_plan,
    run_insertion,
    run_removal,
)
from .scripted import SceneScript, ScriptedProvider
from .segmenter import MockSegmenter, SegmentCandidate, select_candidate
from .service import ServiceConfig, create_app
from .worker import RemoteWorker, ToyWorker, execute_plan_remote

__version__ = "0.1.0"
