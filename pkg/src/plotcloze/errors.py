"""Exception types shared across the toolkit.

Every domain failure raises a subclass of :class:`PlotClozeError`; the CLI
maps these to exit code 1 and a single machine-parsable stderr line of the
form ``error:{ClassName}:{message}``.
"""


class PlotClozeError(Exception):
    """Base class for all domain errors."""


# corpus
class MalformedFile(PlotClozeError):
    """An input file failed to parse; message carries file and location."""


class DanglingPlot(PlotClozeError):
    """A plot sentence references a dialogue that does not exist."""


class BadSpan(PlotClozeError):
    """A mention span is out of bounds or overlaps another span."""


class IoFailure(PlotClozeError):
    """Reading or writing an artifact failed."""


class EmptyCorpus(PlotClozeError):
    """An operation that needs at least one dialogue got none."""


# taskgen
class UnknownDialogue(PlotClozeError):
    """A dialogue key does not resolve within the corpus."""


# datasplit
class EmptyQuerySet(PlotClozeError):
    """Splitting requires a non-empty query list."""


class MissingSeed(PlotClozeError):
    """A randomized policy was requested without a seed."""


class MissingProvenance(PlotClozeError):
    """A query lacks the plot_id provenance needed for leakage auditing."""


# evalkit
class UnknownQueryId(PlotClozeError):
    """A prediction names a query_id absent from the gold set."""


class DuplicatePrediction(PlotClozeError):
    """The same query_id appears more than once in a prediction file."""


class IllegalVariable(PlotClozeError):
    """A prediction assigns a variable not legal for the query's task."""


# baselines
class EmptyCandidates(PlotClozeError):
    """A predictor needs a non-empty candidate set."""


class NoTrainableQueries(PlotClozeError):
    """Training data contained no query with its answer in candidates."""


class DivergenceDetected(PlotClozeError):
    """Training loss became non-finite."""


class DimensionMismatch(PlotClozeError):
    """Model weight dimension does not match the feature extractor."""
