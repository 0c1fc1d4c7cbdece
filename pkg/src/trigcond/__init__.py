"""Discovery of performance-limiting triggering conditions with Bayesian networks.

A discrete network over scene factors and a perception outcome (FN) is
learned from scene-grouped object data. Test scenes whose instances realise
unusually small conditional likelihoods are flagged as relevant, and
structural refinements are judged by whether they reduce the number of
relevant scenes.
"""

from .bn import (
    BnModel,
    BnStructure,
    Cbt,
    NodeSpec,
    build_structure,
    conditional_prob,
    joint_prob,
    load_model,
    load_structure,
    save_model,
)
from .dataset import (
    Dataset,
    MatchConfig,
    ObjectInstance,
    RawObjectRecord,
    SceneRecord,
    build_dataset,
    derive_fn,
    ingest,
    split,
)
from .annotations import export_annotations, import_annotations
from .learning import LearnConfig, learn_cbts, log_likelihood
from .hypothesis import (
    AnalysisConfig,
    PValueRange,
    RunReport,
    SceneReport,
    assign_cbls,
    pvalue_range,
    score_scenes,
    significance,
)
from .refinement import (
    RefinementKind,
    RefinementOp,
    ValidationReport,
    apply_refinement,
    confounder_workflow,
    validate,
    validate_splits,
)
from .synthgen import GeneratorConfig, generate, truth_sidecar

__version__ = "0.1.0"
