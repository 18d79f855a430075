"""Clinical-trial meta-analysis workbench.

Corpus storage and search, effect-size computation, classical and Bayesian
model-averaged pooling, SVG plots, an HTTP JSON API and a CLI.
"""

from .dataset import (
    ContinuousSummaries,
    DatabaseSnapshot,
    DichotomousCounts,
    EffectScale,
    MetaAnalysis,
    PrecomputedEstimate,
    Review,
    Selection,
    SelectionItem,
    Study,
    StudySet,
    Subgroup,
    export_csv,
    load_database,
    parse_rm5_subset,
    resolve_selection,
    save_database,
    serialize_database,
)
from .effectsize import EffectEstimate, Exclusion, compute_effects
from .errors import (
    ConvergenceError,
    DataError,
    NonEstimableError,
    NumericalError,
    QuadratureError,
    SelectionError,
    WorkbenchError,
)

__version__ = "0.1.0"
