"""Cloze-style passage-completion benchmarks from multiparty dialogue.

The toolkit turns scene-scoped dialogue transcripts plus aligned plot
summaries into three cloze tasks (sv, mvs, tv), splits them
chronologically or randomly, audits splits for plot-level leakage, scores
prediction files, and ships deterministic baseline predictors.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Corpus,
    CorpusStats,
    Dialogue,
    EntityRef,
    PlotSentence,
    Utterance,
    compute_stats,
    export_canonical,
    import_canonical,
)
from .datasplit import (  # noqa: F401
    LeakageReport,
    SplitAssignment,
    SplitPolicy,
    audit_leakage,
    split,
)
from .errors import PlotClozeError  # noqa: F401
from .evalkit import (  # noqa: F401
    EvalReport,
    PredictionRecord,
    export_worksheet,
    score,
    score_sv_mvs,
    score_tv,
)
from .ingest import import_corpus  # noqa: F401
from .taskgen import (  # noqa: F401
    Query,
    build_candidates,
    generate,
    generate_mvs,
    generate_sv,
    generate_tv,
)
