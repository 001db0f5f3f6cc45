from .ast import (
    RHO_MAX,
    Affine,
    Always,
    And,
    Distance,
    Eventually,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    Pred,
    Then,
    TrueF,
    Until,
    is_temporal,
    predicates,
    read_components,
    walk,
)
from .parser import ParseError, SpecError, VariableMap, parse, parse_file, parse_spec
from .printer import node_counts, to_spec, to_text, tree
from .semantics import as_states, batch_robustness, eval_boolean, robustness, robustness_signal
from .io import ColumnMismatch, read_trajectory_csv, write_trajectory_csv
