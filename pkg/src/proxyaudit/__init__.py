"""White-box auditing of decision models for proxy use of protected attributes.

Detect decompositions of a model whose cut subprogram is both
associated with a protected column and influential on the model output,
route them through a normative judgment source, and repair the ones
judged inappropriate while preserving validation utility.
"""

from .dataset import Dataset, dataset_from_arrays, load_dataset
from .decomp import (
    Decomposition,
    DecompositionSet,
    EnumerationCaps,
    enumerate_decompositions,
    local_expressions,
)
from .detect import (
    AuditConfig,
    Witness,
    emit_scatter,
    measure_decompositions,
    proxy_detect,
    scatter_rows,
    scatter_tsv,
    witness_report,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetError,
    EvaluationError,
    InputSchemaError,
    ModelSchemaError,
    OracleUnavailable,
    PolicyError,
    PositionError,
    ProxyAuditError,
    TypingError,
)
from .expr import (
    Arith,
    Bool,
    Const,
    Expr,
    IfThenElse,
    Rel,
    Var,
    evaluate,
    from_json_dict,
    program_digest,
    reaches,
    substitute,
    to_json_dict,
)
from .frontends import (
    from_decision_tree,
    from_linear_model,
    from_rule_list,
    parse_tree_text,
    train_cart,
)
from .measures import (
    association,
    discretize,
    influence_exact,
    influence_sampled,
    required_pair_samples,
    utility_accuracy,
)
from .oracle import (
    InteractiveOracle,
    Judgment,
    Policy,
    PolicyOracle,
    RecordedOracle,
    make_oracle,
    parse_policy,
    print_policy,
)
from .repair import (
    Checkpoint,
    RepairOutcome,
    RepairStep,
    optimal_constant,
    proxy_repair,
    repair_loop,
    resume_repair,
)

__version__ = "0.1.0"
